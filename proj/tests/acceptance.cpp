// Acceptance suite: one binary, one PASS/FAIL line per criterion, nonzero
// exit if anything fails. The learnability run (criterion 5) trains the full
// network on the seed-7 synthetic dataset and takes a few minutes.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "aod/pipeline.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"

using namespace aod;

namespace {

int g_failures = 0;

void report(int criterion, const char* name, bool pass, const std::string& detail) {
    std::printf("%s  %2d  %-22s %s\n", pass ? "PASS" : "FAIL", criterion, name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

// --------------------------------------------------------------------------
// 1. Gradient oracle
// --------------------------------------------------------------------------

void criterion_gradients() {
    const auto start = std::chrono::steady_clock::now();
    double max_err = 0.0;
    std::size_t instances = 0;

    // each layer type in isolation, several seeded instances
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        Xoshiro256 rng(seed * 1111);

        nn::Model conv;
        conv.layers.push_back(nn::make_conv(2, 3, 3, 1, 1, rng));
        Tensor cx = test_helpers::random_tensor({2, 2, 6, 6}, rng, -1, 1);
        Tensor ct = test_helpers::random_tensor({2, 3, 6, 6}, rng, -1, 1);
        max_err = std::max(max_err, test_helpers::gradcheck_params(conv, cx, ct, 40, seed).max_rel_err);
        ++instances;

        nn::Model bn;
        bn.layers.push_back(nn::make_batchnorm(3));
        Tensor bx = test_helpers::random_tensor({3, 3, 4, 4}, rng, -2, 2);
        Tensor bt = test_helpers::random_tensor({3, 3, 4, 4}, rng, -1, 1);
        max_err = std::max(max_err, test_helpers::gradcheck_params(bn, bx, bt, 40, seed).max_rel_err);
        max_err = std::max(max_err, test_helpers::gradcheck_input(bn, bx, bt, 40, seed).max_rel_err);
        ++instances;

        nn::Model relu;
        relu.layers.push_back(nn::ReLU{});
        Tensor rx = test_helpers::away_from_zero_tensor({2, 3, 4, 4}, rng);
        Tensor rt = test_helpers::random_tensor({2, 3, 4, 4}, rng, -1, 1);
        max_err = std::max(max_err, test_helpers::gradcheck_input(relu, rx, rt, 60, seed).max_rel_err);
        ++instances;

        nn::Model pool;
        pool.layers.push_back(nn::MaxPool{2, 2});
        Tensor px = test_helpers::random_tensor({2, 2, 6, 6}, rng, -1, 1);
        Tensor pt = test_helpers::random_tensor({2, 2, 3, 3}, rng, -1, 1);
        max_err = std::max(max_err, test_helpers::gradcheck_input(pool, px, pt, 60, seed).max_rel_err);
        ++instances;

        nn::Model flat;
        flat.layers.push_back(nn::Flatten{});
        Tensor fx = test_helpers::random_tensor({2, 2, 3, 3}, rng, -1, 1);
        Tensor ft = test_helpers::random_tensor({2, 18}, rng, -1, 1);
        max_err = std::max(max_err, test_helpers::gradcheck_input(flat, fx, ft, 36, seed).max_rel_err);
        ++instances;

        nn::Model dense;
        dense.layers.push_back(nn::make_dense(10, 4, rng));
        Tensor dx = test_helpers::random_tensor({3, 10}, rng, -1, 1);
        Tensor dt = test_helpers::random_tensor({3, 4}, rng, -1, 1);
        max_err = std::max(max_err, test_helpers::gradcheck_params(dense, dx, dt, 44, seed).max_rel_err);
        ++instances;
    }

    // the composed default architecture, dropout disabled
    for (std::uint64_t seed = 100; seed < 103; ++seed) {
        nn::Model model = nn::default_architecture(seed);
        for (auto& layer : model.layers)
            if (auto* drop = std::get_if<nn::Dropout>(&layer)) drop->p = 0.0;
        Xoshiro256 rng(seed ^ 0x5a5a);
        Tensor x = test_helpers::random_tensor({2, 1, 30, 30}, rng, 0.0, 1.0);
        Tensor t = test_helpers::random_tensor({2, 1}, rng, 0.0, 1.5);
        max_err = std::max(max_err,
                           test_helpers::gradcheck_params(model, x, t, 4, seed).max_rel_err);
        ++instances;
    }

    const double elapsed = seconds_since(start);
    report(1, "gradient-oracle", max_err < 1e-6 && elapsed < 60.0 && instances >= 20,
           fmt("max rel err %.3g over %zu instances, %.1fs", max_err, instances, elapsed));
}

// --------------------------------------------------------------------------
// 2. Metric oracle
// --------------------------------------------------------------------------

void criterion_metrics() {
    Xoshiro256 rng(20);
    double worst = 0.0;
    bool invariants = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.next_below(60);
        std::vector<double> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng.uniform(0.0, 3.0);
            truth[i] = rng.uniform(0.0, 3.0);
        }
        ErrorStats s = compute_stats(pred, truth);

        double se = 0, ae = 0, be = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = pred[i] - truth[i];
            se += e * e;
            ae += std::fabs(e);
            be += e;
        }
        const double dn = static_cast<double>(n);
        const double rmse = std::sqrt(se / dn), mae = ae / dn, mbe = be / dn;
        auto rel = [](double a, double b) {
            return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300});
        };
        worst = std::max({worst, rel(s.rmse, rmse), rel(s.mae, mae),
                          s.mbe == mbe ? 0.0 : rel(s.mbe, mbe)});
        if (s.mae < std::fabs(s.mbe) - 1e-15 || s.rmse < std::fabs(s.mbe) - 1e-15)
            invariants = false;
    }
    report(2, "metric-oracle", worst < 1e-12 && invariants,
           fmt("max rel err %.3g vs naive oracle, invariants %s", worst,
               invariants ? "hold" : "VIOLATED"));
}

// --------------------------------------------------------------------------
// 3. Collocation oracle
// --------------------------------------------------------------------------

void criterion_collocation() {
    const GridSpec merra{-90.0, 0.5, 361, -180.0, 0.625, 576};

    // brute-force argmin via the monotone haversine kernel, row/col factored
    std::vector<double> node_lat(merra.nlat), node_coslat(merra.nlat);
    for (std::size_t r = 0; r < merra.nlat; ++r) {
        node_lat[r] = merra.lat_of_row(r) * kDegToRad;
        node_coslat[r] = std::cos(node_lat[r]);
    }

    Xoshiro256 rng(33);
    bool agml = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const double lat = rng.uniform(-90.0, 90.0);
        const double lon = rng.uniform(-180.0, 180.0);
        GridIndex got = nearest_index(merra, lat, lon);

        const double phi = lat * kDegToRad, cphi = std::cos(phi);
        std::vector<double> col_term(merra.nlon);
        for (std::size_t c = 0; c < merra.nlon; ++c) {
            const double dl = (merra.lon_of_col(c) - lon) * kDegToRad / 2.0;
            const double s = std::sin(dl);
            col_term[c] = s * s;
        }
        double best = 1e300;
        std::size_t best_r = 0, best_c = 0;
        for (std::size_t r = 0; r < merra.nlat; ++r) {
            const double dp = (node_lat[r] - phi) / 2.0;
            const double sp = std::sin(dp);
            const double row_term = sp * sp;
            const double scale = cphi * node_coslat[r];
            for (std::size_t c = 0; c < merra.nlon; ++c) {
                const double h = row_term + scale * col_term[c];
                if (h < best) {
                    best = h;
                    best_r = r;
                    best_c = c;
                }
            }
        }
        const double d_got =
            haversine_km(lat, lon, merra.lat_of_row(got.row), merra.lon_of_col(got.col));
        const double d_best =
            haversine_km(lat, lon, merra.lat_of_row(best_r), merra.lon_of_col(best_c));
        if (d_got > d_best + 1e-9) agml = false;
    }

    const double maxdist = max_collocation_distance(merra);
    const bool band = maxdist >= 40.0 && maxdist <= 45.0;

    // every emitted pair respects the bound
    GridField field;
    field.spec = merra;
    field.date = 20150601;
    field.values.resize(merra.nlat * merra.nlon);
    for (auto& v : field.values) v = static_cast<float>(rng.uniform(0.0, 2.0));
    GridSeries series = make_series({field});
    std::vector<StationRecord> records;
    for (int i = 0; i < 500; ++i)
        records.push_back({{"S" + std::to_string(i), rng.uniform(-89.0, 89.0), rng.uniform(-180.0, 180.0)},
                           20150601, 0.4, 1});
    auto pairs = collocate(series, records);
    bool bounded = pairs.size() == records.size();
    for (const auto& p : pairs)
        if (p.distance_km > maxdist + 1e-6) bounded = false;

    report(3, "collocation-oracle", agml && band && bounded,
           fmt("argmin agreement %s, max distance %.2f km, pair bound %s", agml ? "1000/1000" : "FAILED",
               maxdist, bounded ? "holds" : "VIOLATED"));
}

// --------------------------------------------------------------------------
// 4. Format round trips
// --------------------------------------------------------------------------

void criterion_roundtrips() {
    Xoshiro256 rng(44);
    bool grids_ok = true;
    for (int i = 0; i < 100; ++i) {
        GridField field = test_helpers::random_field(rng, 1 + rng.next_below(10), 1 + rng.next_below(10), 0.15);
        GridField back = parse_grid_file(write_grid_file(field));
        if (!(back.spec == field.spec) || back.date != field.date ||
            std::memcmp(back.values.data(), field.values.data(), field.values.size() * 4) != 0)
            grids_ok = false;
    }

    bool models_ok = true;
    for (int i = 0; i < 100; ++i) {
        nn::Model model;
        const std::size_t ch = 1 + rng.next_below(3);
        model.layers.push_back(nn::make_conv(1, ch, 1 + rng.next_below(3), 1, rng.next_below(2), rng));
        model.layers.push_back(nn::make_batchnorm(ch));
        model.layers.push_back(nn::ReLU{});
        model.layers.push_back(nn::MaxPool{2, 2});
        model.layers.push_back(nn::Flatten{});
        model.layers.push_back(nn::make_dense(1 + rng.next_below(40), 1 + rng.next_below(8), rng));
        model.layers.push_back(nn::Dropout{rng.uniform(0.0, 0.9)});
        if (rng.next_double() < 0.8) model.scaler = nn::ScalingParams{rng.uniform(-2, 0), rng.uniform(1, 4)};
        // sprinkle exact edge values through the parameters
        auto params = nn::parameters(model);
        (*params[0])[0] = 0.0;
        (*params[0])[params[0]->numel() - 1] = 1e-300;
        if (params[0]->numel() > 2) (*params[0])[1] = -1e300;

        nn::Model back = nn::deserialize_model(nn::serialize_model(model));
        if (back.layers.size() != model.layers.size()) models_ok = false;
        if (model.scaler.has_value() != back.scaler.has_value()) models_ok = false;
        if (model.scaler && (model.scaler->min != back.scaler->min || model.scaler->max != back.scaler->max))
            models_ok = false;
        auto pa = nn::parameters(model), pb = nn::parameters(back);
        if (pa.size() != pb.size()) models_ok = false;
        for (std::size_t t = 0; t < pa.size() && models_ok; ++t)
            if (pa[t]->data != pb[t]->data) models_ok = false;
    }

    report(4, "format-roundtrips", grids_ok && models_ok,
           fmt("AODGRID %s, aodcnn %s (100 seeded instances each)", grids_ok ? "exact" : "FAILED",
               models_ok ? "exact" : "FAILED"));
}

// --------------------------------------------------------------------------
// 5 & 6. Learnability analogue and the two-regime protocol
// --------------------------------------------------------------------------

void criteria_learnability(const fs::path& work) {
    const auto start = std::chrono::steady_clock::now();

    SynthCmdArgs synth;
    synth.config.seed = 7; // 60x60 grid, 400 days, 12 sites by default
    synth.out_dir = work / "data";
    auto data = cmd_synth(synth);

    TrainCmdArgs train_args;
    train_args.grids_dir = data.grids_dir;
    train_args.stations_csv = data.stations_csv;
    train_args.config.seed = 7;
    train_args.config.epochs = 50;
    train_args.config.regime = Regime::All;
    train_args.out_model = work / "model_all.json";
    auto trained = cmd_train(train_args);
    const double train_seconds = seconds_since(start);

    EvaluateCmdArgs eval_args;
    eval_args.model_path = train_args.out_model;
    eval_args.grids_dir = data.grids_dir;
    eval_args.stations_csv = data.stations_csv;
    eval_args.out_path = work / "evaluate.json";
    json rep = cmd_evaluate(eval_args);

    const double merra_all_rmse = rep["table2"]["all"]["merra2"]["rmse"].get<double>();
    const double cnn_all_rmse = rep["table2"]["all"]["cnn"]["rmse"].get<double>();
    const double merra_ext_mbe = rep["table2"]["extreme"]["merra2"]["mbe"].get<double>();
    const double cnn_ext_mbe = rep["table2"]["extreme"]["cnn"]["mbe"].get<double>();

    const bool rmse_ok = cnn_all_rmse <= 0.8 * merra_all_rmse;
    const bool mbe_ok = std::fabs(cnn_ext_mbe) < std::fabs(merra_ext_mbe);
    const bool time_ok = train_seconds < 600.0;
    report(5, "learnability", rmse_ok && mbe_ok && time_ok,
           fmt("all-RMSE cnn %.4f vs merra %.4f (ratio %.2f <= 0.8), extreme-MBE |%.3f| < |%.3f|, "
               "train %.0fs",
               cnn_all_rmse, merra_all_rmse, cnn_all_rmse / merra_all_rmse, cnn_ext_mbe,
               merra_ext_mbe, train_seconds));

    // criterion 6: same data, extreme regime; matched epochs isolate the filter
    GridSeries series = load_series(data.grids_dir);
    auto records = load_records(data.stations_csv);
    auto samples = build_samples(series, records);
    std::size_t brute = 0;
    for (const auto& s : samples)
        if (s.target > 0.7) ++brute;

    TrainConfig config;
    config.seed = 7;
    config.epochs = 5;
    TrainConfig all_cfg = config;
    all_cfg.regime = Regime::All;
    TrainConfig ext_cfg = config;
    ext_cfg.regime = Regime::Extreme;
    TrainResult all_model = train(samples, all_cfg);
    TrainResult ext_model = train(samples, ext_cfg);

    const bool count_ok = ext_model.history.n_regime == brute;
    const bool distinct = nn::serialize_model(all_model.model) != nn::serialize_model(ext_model.model);
    report(6, "two-regime-protocol", count_ok && distinct,
           fmt("extreme regime saw %zu samples (brute filter %zu), models %s",
               ext_model.history.n_regime, brute, distinct ? "distinct" : "IDENTICAL"));
}

// --------------------------------------------------------------------------
// 7. CLI determinism (real binary, twice)
// --------------------------------------------------------------------------

bool same_file(const fs::path& a, const fs::path& b) {
    return read_binary_file(a) == read_binary_file(b);
}

void criterion_determinism(const fs::path& work) {
    const std::string bin = AODBENCH_BIN;
    auto shell = [&work](const std::string& cmd) {
        const std::string full = cmd + " > " + (work / "log.txt").string() + " 2>&1";
        return std::system(full.c_str());
    };

    const fs::path d1 = work / "det1", d2 = work / "det2";
    bool synth_ok =
        shell(bin + " synth --seed 11 --days 30 --sites 4 --out-dir " + d1.string()) == 0 &&
        shell(bin + " synth --seed 11 --days 30 --sites 4 --out-dir " + d2.string()) == 0;
    if (synth_ok) {
        synth_ok = same_file(d1 / "stations.csv", d2 / "stations.csv") &&
                   same_file(d1 / "truth.json", d2 / "truth.json");
        for (const auto& entry : fs::directory_iterator(d1 / "grids"))
            if (!same_file(entry.path(), d2 / "grids" / entry.path().filename())) synth_ok = false;
    }

    const std::string common = " train --grids " + (d1 / "grids").string() + " --stations " +
                               (d1 / "stations.csv").string() +
                               " --seed 3 --epochs 2 --regime all --out ";
    bool train_ok = shell(bin + common + (work / "m1.json").string()) == 0 &&
                    shell(bin + common + (work / "m2.json").string()) == 0;
    if (train_ok)
        train_ok = same_file(work / "m1.json", work / "m2.json") &&
                   same_file(work / "m1.json.history.csv", work / "m2.json.history.csv");

    report(7, "cli-determinism", synth_ok && train_ok,
           fmt("synth outputs %s, model files %s", synth_ok ? "byte-identical" : "DIFFER",
               train_ok ? "byte-identical" : "DIFFER"));
}

// --------------------------------------------------------------------------
// 8. Breakdown partition
// --------------------------------------------------------------------------

void criterion_partition() {
    Xoshiro256 rng(88);
    bool ok = true;
    double data_max = 0.0;
    std::vector<CollocatedPair> pairs;
    for (int i = 0; i < 4000; ++i) {
        const double truth = rng.uniform(0.0, 1.6);
        data_max = std::max(data_max, truth);
        pairs.push_back({{"s" + std::to_string(i % 17), 0, 0}, 20150601, rng.uniform(0.0, 1.6), truth, 1.0});
    }
    BreakdownReport rep = breakdown(pairs);
    ok = ok && rep.normal.n + rep.extreme.n == rep.all.n && rep.extreme.n > 0;

    BreakdownReport above = breakdown(pairs, data_max + 0.01);
    ok = ok && above.extreme.n == 0 && above.normal.n == pairs.size();

    report(8, "breakdown-partition", ok,
           fmt("normal %zu + extreme %zu = all %zu; threshold beyond max empties extreme",
               rep.normal.n, rep.extreme.n, rep.all.n));
}

// --------------------------------------------------------------------------
// 9. Adam first step
// --------------------------------------------------------------------------

void criterion_adam() {
    nn::Model m;
    m.layers.push_back(nn::Dense{1, 1, Tensor({1, 1}, {0.0}), Tensor({1}, {0.0})});
    nn::AdamState state = nn::AdamState::init(m, 0.003);
    nn::Gradients grads(1);
    grads[0].present = true;
    grads[0].a = Tensor({1, 1}, {0.2});
    grads[0].b = Tensor({1}, {0.0});
    nn::adam_step(nn::parameters(m), nn::gradient_list(m, grads), state);
    const double w = std::get<nn::Dense>(m.layers[0]).weight[0];
    const double err = std::fabs(w - (-0.003));
    report(9, "adam-first-step", err < 1.5e-7, fmt("param %.10f, |err| %.3g < 1.5e-7", w, err));
}

// --------------------------------------------------------------------------
// 10. Angstrom conversion
// --------------------------------------------------------------------------

void criterion_angstrom() {
    const bool identity = angstrom_convert(0.2, 0.0) == 0.2 && angstrom_convert(1.3, 0.0) == 1.3;
    const double converted = angstrom_convert(0.2, 1.4);
    const bool reference = std::fabs(converted - 0.175017) <= 1e-5;

    Xoshiro256 rng(10);
    bool roundtrip = true;
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const double aod = rng.uniform(1e-6, 3.0);
        const double alpha = rng.uniform(-1.0, 3.0);
        const double back = angstrom_convert(angstrom_convert(aod, alpha, 500, 550), alpha, 550, 500);
        const double rel = std::fabs(back - aod) / aod;
        worst = std::max(worst, rel);
        if (rel > 1e-12) roundtrip = false;
    }
    report(10, "angstrom-conversion", identity && reference && roundtrip,
           fmt("alpha=0 exact, (0.2, 1.4) -> %.6f, round-trip max rel %.3g", converted, worst));
}

} // namespace

int main() {
    test_helpers::TempDir work("acceptance");
    std::printf("acceptance suite (%s %s)\n", kToolName, kToolVersion);

    criterion_gradients();
    criterion_metrics();
    criterion_collocation();
    criterion_roundtrips();
    criteria_learnability(work.path());
    criterion_determinism(work.path());
    criterion_partition();
    criterion_adam();
    criterion_angstrom();

    std::printf("%d criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
