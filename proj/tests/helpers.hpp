#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "aod/geo_grid.hpp"
#include "aod/rng.hpp"

namespace test_helpers {

inline aod::GridField random_field(aod::Xoshiro256& rng, std::size_t nlat, std::size_t nlon,
                                   double nan_prob = 0.0) {
    aod::GridField field;
    field.spec.lat0 = rng.uniform(-60.0, 20.0);
    field.spec.dlat = rng.uniform(0.2, 1.0);
    field.spec.nlat = nlat;
    field.spec.lon0 = rng.uniform(-180.0, 180.0);
    field.spec.dlon = rng.uniform(0.2, 1.0);
    field.spec.nlon = nlon;
    field.date = 20150101 + static_cast<std::uint32_t>(rng.next_below(28));
    field.values.resize(nlat * nlon);
    for (auto& v : field.values) {
        if (nan_prob > 0.0 && rng.next_double() < nan_prob)
            v = std::numeric_limits<float>::quiet_NaN();
        else
            v = static_cast<float>(rng.uniform(0.0, 3.0));
    }
    return field;
}

// Fresh scratch directory under the build tree's temp space.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        namespace fs = std::filesystem;
        path_ = fs::temp_directory_path() / ("aodbench_" + tag + "_XXXXXX");
        std::string templ = path_.string();
        if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
        path_ = templ;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Runs the built CLI; returns the process exit code (-1 if it did not exit
// normally). Output is routed to files inside `dir` to keep test logs clean.
inline int run_cli(const std::string& args, const std::filesystem::path& dir) {
    const std::string cmd = std::string(AODBENCH_BIN) + " " + args + " >" +
                            (dir / "stdout.txt").string() + " 2>" + (dir / "stderr.txt").string();
    int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace test_helpers
