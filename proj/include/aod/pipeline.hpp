#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "aod/collocation.hpp"
#include "aod/errors.hpp"
#include "aod/grid_io.hpp"
#include "aod/metrics.hpp"
#include "aod/model_io.hpp"
#include "aod/report.hpp"
#include "aod/stations.hpp"
#include "aod/svg_map.hpp"
#include "aod/synth.hpp"
#include "aod/training.hpp"

namespace aod {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> read_binary_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

inline std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, const void* data, std::size_t len) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

inline void write_file(const fs::path& path, const std::string& text) {
    write_file(path, text.data(), text.size());
}

// Loads every *.bin in a directory as one dated series.
inline GridSeries load_series(const fs::path& grids_dir) {
    if (!fs::is_directory(grids_dir))
        throw DataError("grids path '" + grids_dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(grids_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".bin")
            files.push_back(entry.path());
    if (files.empty()) throw DataError("no .bin grid files in '" + grids_dir.string() + "'");
    std::sort(files.begin(), files.end());

    std::vector<GridField> fields;
    fields.reserve(files.size());
    for (const fs::path& f : files) {
        try {
            fields.push_back(parse_grid_file(read_binary_file(f)));
        } catch (const GridFormatError& e) {
            throw DataError("'" + f.string() + "': " + e.what());
        }
    }
    return make_series(std::move(fields));
}

inline std::vector<StationRecord> load_records(const fs::path& stations_csv) {
    return build_daily_records(parse_station_csv(read_text_file(stations_csv)));
}

inline InputDigest digest_file(const fs::path& path) {
    const auto bytes = read_binary_file(path);
    return {path.string(), fnv1a64(bytes.data(), bytes.size())};
}

inline InputDigest digest_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const fs::path& f : files) {
        const std::string name = f.filename().string();
        h = fnv1a64(name.data(), name.size(), h);
        const auto bytes = read_binary_file(f);
        h = fnv1a64(bytes.data(), bytes.size(), h);
    }
    return {dir.string(), h};
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthCmdArgs {
    SynthConfig config;
    fs::path out_dir;
};

struct SynthCmdResult {
    std::size_t grid_files = 0;
    std::size_t records = 0;
    fs::path grids_dir;
    fs::path stations_csv;
    fs::path truth_json;
};

constexpr std::uint64_t kAlphaStream = 0x414c5048; // "ALPH"

// Writes the grid series, a stations CSV that converts back to the intended
// 550 nm truth, and the truth-function sidecar.
inline SynthCmdResult cmd_synth(const SynthCmdArgs& args) {
    args.config.validate();
    const fs::path grids_dir = args.out_dir / "grids";
    std::error_code ec;
    fs::create_directories(grids_dir, ec);
    if (ec) throw DataError("cannot create '" + grids_dir.string() + "': " + ec.message());

    std::vector<GridField> series = gen_grid_series(args.config);
    SynthTruth truth = gen_station_truth(series, args.config);

    SynthCmdResult result;
    result.grids_dir = grids_dir;
    for (const GridField& field : series) {
        const auto bytes = write_grid_file(field);
        char name[32];
        std::snprintf(name, sizeof(name), "aod_%08u.bin", field.date);
        write_file(grids_dir / name, bytes.data(), bytes.size());
        ++result.grid_files;
    }

    // Random per-row Angstrom exponents exercise the 550 nm conversion on the
    // way back in: aod_500nm = truth * (550/500)^alpha.
    Xoshiro256 alpha_rng(args.config.seed, kAlphaStream);
    std::string csv = kStationCsvHeader;
    csv += '\n';
    for (const StationRecord& rec : truth.records) {
        const double alpha = alpha_rng.uniform(0.2, 1.8);
        const double aod500 = rec.aod550 * std::pow(550.0 / 500.0, alpha);
        csv += rec.site.name + "," + format_g17(rec.site.lat) + "," + format_g17(rec.site.lon) +
               "," + format_iso_date(rec.date) + "," + format_g17(aod500) + "," +
               format_g17(alpha) + "\n";
        ++result.records;
    }
    result.stations_csv = args.out_dir / "stations.csv";
    write_file(result.stations_csv, csv);

    json tf;
    tf["schema"] = "aodbench-truth-v1";
    tf["a"] = truth.truth.a;
    tf["b"] = truth.truth.b;
    tf["bonus_gain"] = truth.truth.bonus_gain;
    tf["bonus_start"] = truth.truth.bonus_start;
    tf["noise_sd"] = truth.truth.noise_sd;
    tf["stat"] = truth.truth.stat;
    tf["seed"] = args.config.seed;
    tf["sites"] = json::array();
    for (const Site& s : truth.sites)
        tf["sites"].push_back({{"name", s.name}, {"lat", s.lat}, {"lon", s.lon}});
    result.truth_json = args.out_dir / "truth.json";
    write_file(result.truth_json, tf.dump(2) + "\n");
    return result;
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

struct BaselineCmdArgs {
    fs::path grids_dir;
    fs::path stations_csv;
    std::size_t min_obs = 1;
    double threshold = 0.7;
    fs::path out_path;
};

inline json cmd_baseline(const BaselineCmdArgs& args) {
    GridSeries series = load_series(args.grids_dir);
    std::vector<StationRecord> records = load_records(args.stations_csv);

    CollocateStats cstats;
    std::vector<CollocatedPair> pairs = collocate(series, records, &cstats);
    if (pairs.empty()) throw DataError("empty collocation: no station record matches any grid date");

    BreakdownReport global = breakdown(pairs, args.threshold);
    std::vector<SiteStats> sites = per_site(pairs, args.min_obs, args.threshold);

    json report;
    report["schema"] = "aodbench-baseline-v1";
    report["threshold"] = args.threshold;
    report["min_obs"] = args.min_obs;
    report["max_collocation_distance_km"] = max_collocation_distance(series.begin()->second.spec);
    report["collocation"] = {{"paired", cstats.paired},
                             {"date_absent", cstats.date_absent},
                             {"missing_cell", cstats.missing_cell}};
    report["breakdown"] = breakdown_json(global);
    report["per_site"] = json::array();
    for (const SiteStats& s : sites) report["per_site"].push_back(site_stats_json(s));
    report["rankings"] = {
        {"by_extreme_count",
         ranking_json(rank_sites(sites, RankKey::ExtremeCount, 5), RankKey::ExtremeCount)},
        {"by_variance", ranking_json(rank_sites(sites, RankKey::Variance, 5), RankKey::Variance)}};

    json config;
    config["grids"] = args.grids_dir.string();
    config["stations"] = args.stations_csv.string();
    config["min_obs"] = args.min_obs;
    config["threshold"] = args.threshold;
    report["manifest"] =
        manifest_json("baseline", config, {digest_dir(args.grids_dir), digest_file(args.stations_csv)});

    if (!args.out_path.empty()) write_file(args.out_path, report.dump(2) + "\n");
    return report;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainCmdArgs {
    fs::path grids_dir;
    fs::path stations_csv;
    TrainConfig config;
    fs::path out_model;
    fs::path out_history; // empty -> "<out_model>.history.csv"
};

struct TrainCmdResult {
    TrainHistory history;
    SampleDropCounts drops;
    fs::path model_path;
    fs::path history_path;
};

inline TrainCmdResult cmd_train(const TrainCmdArgs& args) {
    GridSeries series = load_series(args.grids_dir);
    std::vector<StationRecord> records = load_records(args.stations_csv);

    SampleDropCounts drops;
    std::vector<Sample> samples = build_samples(series, records, &drops);

    TrainResult result = train(samples, args.config);

    TrainCmdResult out;
    out.history = result.history;
    out.drops = drops;
    out.model_path = args.out_model;
    write_file(args.out_model, nn::serialize_model(result.model));

    out.history_path = args.out_history.empty()
                           ? fs::path(args.out_model.string() + ".history.csv")
                           : args.out_history;
    std::string csv = "epoch,train_loss,heldout_rmse\n";
    for (const EpochStats& e : result.history.epochs)
        csv += std::to_string(e.epoch) + "," + format_g17(e.train_loss) + "," +
               format_g17(e.heldout_rmse) + "\n";
    write_file(out.history_path, csv);
    return out;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateCmdArgs {
    fs::path model_path;
    fs::path grids_dir;
    fs::path stations_csv;
    double threshold = 0.7;
    fs::path out_path;
};

inline json cmd_evaluate(const EvaluateCmdArgs& args) {
    nn::Model model = nn::deserialize_model(read_text_file(args.model_path));
    if (!model.scaler) throw DataError("model '" + args.model_path.string() + "' has no fitted scaler");

    GridSeries series = load_series(args.grids_dir);
    std::vector<StationRecord> records = load_records(args.stations_csv);

    SampleDropCounts drops;
    std::vector<Sample> samples = build_samples(series, records, &drops);
    if (samples.empty()) throw DataError("no usable samples for evaluation");

    // The comparison needs the same-day reanalysis value for each sample.
    std::vector<Sample> kept;
    std::vector<CollocatedPair> pairs;
    std::size_t no_baseline_cell = 0;
    for (Sample& s : samples) {
        const GridField& field = series.at(s.date); // build_samples guarantees presence
        GridIndex idx = nearest_index(field.spec, s.site.lat, s.site.lon);
        const float cell = field.at(idx.row, idx.col);
        if (std::isnan(cell)) {
            ++no_baseline_cell;
            continue;
        }
        const double dist = haversine_km(s.site.lat, s.site.lon, field.spec.lat_of_row(idx.row),
                                         field.spec.lon_of_col(idx.col));
        pairs.push_back({s.site, s.date, static_cast<double>(cell), s.target, dist});
        kept.push_back(std::move(s));
    }
    if (kept.empty()) throw DataError("no samples with a same-day baseline cell");

    EvaluateResult eval = evaluate(model, kept);
    ModelComparison cmp = compare_models(pairs, eval.predictions, args.threshold);

    // Per-site stats of the network predictions against truth.
    std::vector<CollocatedPair> model_pairs = pairs;
    for (std::size_t i = 0; i < model_pairs.size(); ++i) model_pairs[i].merra_aod = eval.predictions[i];
    std::vector<SiteStats> cnn_sites = per_site(model_pairs, 1, args.threshold);

    json report;
    report["schema"] = "aodbench-evaluate-v1";
    report["threshold"] = args.threshold;
    report["n_samples"] = kept.size();
    report["drops"] = {{"date_absent", drops.date_absent},
                       {"no_previous_day", drops.no_previous_day},
                       {"latitude_out_of_range", drops.latitude_out_of_range},
                       {"missing_cells", drops.missing_cells},
                       {"no_baseline_cell", no_baseline_cell}};
    report["negative_predictions"] = eval.negative_predictions;
    report["table2"] = comparison_table_json(cmp);
    report["baseline_breakdown"] = breakdown_json(cmp.baseline);
    report["cnn_breakdown"] = breakdown_json(cmp.model);
    report["per_site_cnn"] = json::array();
    for (const SiteStats& s : cnn_sites) report["per_site_cnn"].push_back(site_stats_json(s));

    json config;
    config["model"] = args.model_path.string();
    config["grids"] = args.grids_dir.string();
    config["stations"] = args.stations_csv.string();
    config["threshold"] = args.threshold;
    report["manifest"] = manifest_json(
        "evaluate", config,
        {digest_file(args.model_path), digest_dir(args.grids_dir), digest_file(args.stations_csv)});

    if (!args.out_path.empty()) write_file(args.out_path, report.dump(2) + "\n");
    return report;
}

// ---------------------------------------------------------------------------
// map
// ---------------------------------------------------------------------------

struct MapCmdArgs {
    fs::path report_path;
    std::string metric = "rmse"; // rmse | mae | mbe
    fs::path out_path;
};

inline std::string cmd_map(const MapCmdArgs& args) {
    if (args.metric != "rmse" && args.metric != "mae" && args.metric != "mbe")
        throw UsageError("unknown metric '" + args.metric + "', expected rmse|mae|mbe");

    json report;
    try {
        report = json::parse(read_text_file(args.report_path));
    } catch (const json::exception& e) {
        throw DataError("report '" + args.report_path.string() + "' is not valid JSON: " + e.what());
    }
    const char* key = report.contains("per_site") ? "per_site"
                      : report.contains("per_site_cnn") ? "per_site_cnn"
                                                        : nullptr;
    if (!key) throw DataError("report has no per-site stats to plot");

    std::vector<MapPoint> points;
    for (const auto& entry : report[key]) {
        MapPoint p;
        p.name = entry["site"]["name"].get<std::string>();
        p.lat = entry["site"]["lat"].get<double>();
        p.lon = entry["site"]["lon"].get<double>();
        p.value = entry[args.metric].get<double>();
        points.push_back(std::move(p));
    }

    const std::string svg = render_site_map(points, args.metric, args.metric == "mbe");
    if (!args.out_path.empty()) write_file(args.out_path, svg);
    return svg;
}

} // namespace aod
