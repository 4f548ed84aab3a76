// aodbench: collocate gridded reanalysis AOD with station ground truth,
// report bias breakdowns, and train/evaluate a patch-to-point CNN.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aod/pipeline.hpp"

namespace {

int run(int argc, char** argv) {
    CLI::App app{"Reanalysis AOD vs station truth: bias reports and CNN correction"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(aod::kToolName) + " " + aod::kToolVersion);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic dataset");
    aod::SynthCmdArgs synth_args;
    std::string synth_out;
    synth->add_option("--seed", synth_args.config.seed, "PRNG seed")->capture_default_str();
    synth->add_option("--days", synth_args.config.days, "number of consecutive days")
        ->capture_default_str();
    synth->add_option("--sites", synth_args.config.sites, "number of stations")->capture_default_str();
    synth->add_option("--nlat", synth_args.config.spec.nlat, "grid rows")->capture_default_str();
    synth->add_option("--nlon", synth_args.config.spec.nlon, "grid columns")->capture_default_str();
    synth->add_option("--extreme-fraction", synth_args.config.extreme_fraction,
                      "target share of truth values above 0.7")
        ->capture_default_str();
    synth->add_option("--noise-sd", synth_args.config.noise_sd, "truth noise standard deviation")
        ->capture_default_str();
    synth->add_option("--out-dir", synth_out, "output directory")->required();

    // baseline
    auto* baseline = app.add_subcommand("baseline", "Collocate and report reanalysis error breakdowns");
    aod::BaselineCmdArgs base_args;
    std::string base_grids, base_stations, base_out;
    baseline->add_option("--grids", base_grids, "directory of AODGRID .bin files")->required();
    baseline->add_option("--stations", base_stations, "stations CSV file")->required();
    baseline->add_option("--min-obs", base_args.min_obs, "keep sites with at least this many pairs")
        ->capture_default_str();
    baseline->add_option("--threshold", base_args.threshold, "extreme AOD threshold")
        ->capture_default_str();
    baseline->add_option("--out", base_out, "report JSON path")->required();

    // train
    auto* train = app.add_subcommand("train", "Train the patch-to-point CNN");
    aod::TrainCmdArgs train_args;
    std::string train_grids, train_stations, train_out, train_history, regime = "all";
    train->add_option("--grids", train_grids, "directory of AODGRID .bin files")->required();
    train->add_option("--stations", train_stations, "stations CSV file")->required();
    train->add_option("--regime", regime, "training regime: all|extreme")
        ->check(CLI::IsMember({"all", "extreme"}))
        ->capture_default_str();
    train->add_option("--epochs", train_args.config.epochs, "training epochs")->capture_default_str();
    train->add_option("--batch", train_args.config.batch_size, "mini-batch size")->capture_default_str();
    train->add_option("--lr", train_args.config.lr, "Adam learning rate")->capture_default_str();
    train->add_option("--seed", train_args.config.seed, "PRNG seed")->capture_default_str();
    train->add_option("--threshold", train_args.config.extreme_threshold, "extreme AOD threshold")
        ->capture_default_str();
    train->add_option("--dropout", train_args.config.dropout_p, "dropout probability")
        ->capture_default_str();
    train->add_option("--out", train_out, "model JSON path")->required();
    train->add_option("--history", train_history, "history CSV path (default: <out>.history.csv)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Compare baseline vs CNN on a dataset");
    aod::EvaluateCmdArgs eval_args;
    std::string eval_model, eval_grids, eval_stations, eval_out;
    evaluate->add_option("--model", eval_model, "aodcnn model JSON")->required();
    evaluate->add_option("--grids", eval_grids, "directory of AODGRID .bin files")->required();
    evaluate->add_option("--stations", eval_stations, "stations CSV file")->required();
    evaluate->add_option("--threshold", eval_args.threshold, "extreme AOD threshold")
        ->capture_default_str();
    evaluate->add_option("--out", eval_out, "report JSON path")->required();

    // map
    auto* map = app.add_subcommand("map", "Render per-site metrics as an SVG scatter map");
    aod::MapCmdArgs map_args;
    std::string map_report, map_out;
    map->add_option("--report", map_report, "baseline or evaluate report JSON")->required();
    map->add_option("--metric", map_args.metric, "rmse|mae|mbe")->capture_default_str();
    map->add_option("--out", map_out, "SVG output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help or the parse error
        return code == 0 ? 0 : 1;    // usage failures exit 1
    }

    if (synth->parsed()) {
        synth_args.out_dir = synth_out;
        auto result = aod::cmd_synth(synth_args);
        std::cout << "wrote " << result.grid_files << " grid files, " << result.records
                  << " station rows under " << synth_args.out_dir.string() << "\n";
        return 0;
    }
    if (baseline->parsed()) {
        base_args.grids_dir = base_grids;
        base_args.stations_csv = base_stations;
        base_args.out_path = base_out;
        auto report = aod::cmd_baseline(base_args);
        std::cout << "baseline report: " << base_out << " (pairs: "
                  << report["collocation"]["paired"] << ")\n";
        return 0;
    }
    if (train->parsed()) {
        train_args.grids_dir = train_grids;
        train_args.stations_csv = train_stations;
        train_args.config.regime = regime == "extreme" ? aod::Regime::Extreme : aod::Regime::All;
        train_args.out_model = train_out;
        if (!train_history.empty()) train_args.out_history = train_history;
        auto result = aod::cmd_train(train_args);
        std::cout << "trained regime=" << aod::regime_name(result.history.regime) << " on "
                  << result.history.n_train << " samples (" << result.history.n_heldout
                  << " held out); model: " << result.model_path.string() << "\n";
        if (!result.history.epochs.empty())
            std::cout << "final epoch train_loss=" << result.history.epochs.back().train_loss
                      << " heldout_rmse=" << result.history.epochs.back().heldout_rmse << "\n";
        return 0;
    }
    if (evaluate->parsed()) {
        eval_args.model_path = eval_model;
        eval_args.grids_dir = eval_grids;
        eval_args.stations_csv = eval_stations;
        eval_args.out_path = eval_out;
        auto report = aod::cmd_evaluate(eval_args);
        std::cout << "evaluate report: " << eval_out << " (samples: " << report["n_samples"]
                  << ")\n";
        return 0;
    }
    if (map->parsed()) {
        map_args.report_path = map_report;
        map_args.out_path = map_out;
        aod::cmd_map(map_args);
        std::cout << "map: " << map_out << "\n";
        return 0;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const aod::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const aod::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const aod::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
