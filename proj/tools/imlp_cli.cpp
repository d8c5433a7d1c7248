// Command-line harness: dataset preparation, stream runs, scoring,
// Pareto-front extraction, and the rank-test battery.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// failure, 5 statistics precondition failure.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "imlp/harness.hpp"

namespace {

struct CliArgs {
    // prep
    std::string table, schema;
    std::uint64_t prep_seed = 7;
    double train_fraction = 0.85;
    // run
    std::string config_path, manifest, out_dir;
    std::vector<std::uint64_t> seeds;
    std::string energy_spec, mode, model;
    std::size_t workers = 0;
    // score / pareto
    std::vector<std::string> inputs;
    // stats
    std::string matrix_path, control;
    double alpha = 0.05;
    bool lower_is_better = false;
    std::string stats_out;
};

int run_prep(const CliArgs& args) {
    const auto out = imlp::cmd_prep(args.table, args.schema, args.out_dir.empty() ? "prep" : args.out_dir,
                                    args.prep_seed, args.train_fraction);
    std::cout << imlp::read_text_file(out.summary_path);
    std::cout << "manifest written to " << out.manifest_path << "\n";
    return 0;
}

int run_run(const CliArgs& args) {
    imlp::RunSettings settings;
    if (!args.config_path.empty()) settings = imlp::load_run_settings(args.config_path);
    if (!args.manifest.empty()) settings.manifest_path = args.manifest;
    if (!args.out_dir.empty()) settings.out_dir = args.out_dir;
    if (!args.seeds.empty()) settings.seeds = args.seeds;
    if (!args.energy_spec.empty()) imlp::apply_energy_spec(settings, args.energy_spec);
    if (!args.mode.empty()) settings.train.mode = imlp::stream_mode_from(args.mode);
    if (!args.model.empty()) settings.kind = imlp::model_kind_from(args.model);
    if (args.workers > 0) settings.workers = args.workers;

    const auto out = imlp::cmd_run(settings);
    for (const auto& p : out.report_paths) std::cout << "report written to " << p << "\n";
    std::cout << "aggregate written to " << out.aggregate_path << "\n";
    const auto& agg = out.aggregate.at("aggregates");
    std::cout << "netscore_t " << agg.at("netscore_t").at("mean").get<double>() << " +- "
              << agg.at("netscore_t").at("std").get<double>() << " over " << settings.seeds.size() << " seed(s)\n";
    return 0;
}

int run_score(const CliArgs& args) {
    const auto rows = imlp::cmd_score(args.inputs);
    std::cout << imlp::render_score_table(rows);
    return 0;
}

int run_pareto(const CliArgs& args) {
    const auto out = imlp::cmd_pareto(args.inputs, args.out_dir.empty() ? "pareto" : args.out_dir);
    std::cout << "points: " << out.points.size() << ", front size: " << out.front.size() << "\n";
    for (const auto& p : out.front)
        std::cout << "  " << p.label << "  performance=" << p.performance << "  energy=" << p.energy << "\n";
    std::cout << "front table written to " << out.table_path << "\n";
    std::cout << "figure written to " << out.figure_path << "\n";
    return 0;
}

int run_stats(const CliArgs& args) {
    const imlp::ResultsMatrix matrix = imlp::load_results_matrix(args.matrix_path);
    imlp::StatsSettings settings;
    settings.alpha = args.alpha;
    settings.higher_is_better = !args.lower_is_better;
    settings.control = args.control;
    const imlp::json doc = imlp::cmd_stats(matrix, settings);
    std::cout << imlp::render_stats_report(doc);
    if (!args.stats_out.empty()) {
        imlp::write_text_file(args.stats_out, doc.dump(2) + "\n");
        std::cout << "stats report written to " << args.stats_out << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"imlp: energy-aware continual learning for tabular data streams"};
    app.set_version_flag("--version", std::string(imlp::kToolVersion));
    app.require_subcommand(1);
    CliArgs args;

    auto* prep = app.add_subcommand("prep", "segment a table file and fit the preprocessor");
    prep->add_option("table", args.table, "delimited table file with a header row")->required();
    prep->add_option("schema", args.schema, "sidecar schema file (imlp-schema-v1)")->required();
    prep->add_option("--out", args.out_dir, "output directory (default: prep)");
    prep->add_option("--seed", args.prep_seed, "split seed (default 7)");
    prep->add_option("--train-fraction", args.train_fraction, "per-segment training fraction (default 0.85)");

    auto* run = app.add_subcommand("run", "train and evaluate over the segment stream");
    run->add_option("--config", args.config_path, "run-config JSON (imlp-run-config-v1)");
    run->add_option("--manifest", args.manifest, "dataset manifest from prep");
    run->add_option("--out", args.out_dir, "output directory");
    run->add_option("--seed", args.seeds, "seed list (default 7 42 101)");
    run->add_option("--energy", args.energy_spec, "trace:<file> | flops[:<j_per_flop>] | constant:<watts>");
    run->add_option("--mode", args.mode, "incremental | cumulative-retrain");
    run->add_option("--model", args.model, "imlp | plain-mlp");
    run->add_option("--workers", args.workers, "concurrent seed runs (default 1)");

    auto* score = app.add_subcommand("score", "comparison table over run reports");
    score->add_option("reports", args.inputs, "report files")->required();

    auto* pareto = app.add_subcommand("pareto", "pareto front over reports or a points file");
    pareto->add_option("inputs", args.inputs, "report .json files or points .csv")->required();
    pareto->add_option("--out", args.out_dir, "output directory (default: pareto)");

    auto* stats = app.add_subcommand("stats", "friedman + post-hoc battery over a results matrix");
    stats->add_option("matrix", args.matrix_path, "results matrix csv (datasets x algorithms)")->required();
    stats->add_option("--alpha", args.alpha, "significance level (default 0.05)");
    stats->add_flag("--lower-is-better", args.lower_is_better, "rank lower metric values as better");
    stats->add_option("--control", args.control, "control algorithm (default: best average rank)");
    stats->add_option("--out", args.stats_out, "write the stats report JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(prep)) return run_prep(args);
        if (app.got_subcommand(run)) return run_run(args);
        if (app.got_subcommand(score)) return run_score(args);
        if (app.got_subcommand(pareto)) return run_pareto(args);
        if (app.got_subcommand(stats)) return run_stats(args);
    } catch (const imlp::stats_error& e) {
        std::cerr << "stats error: " << e.what() << "\n";
        return 5;
    } catch (const imlp::numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const imlp::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const imlp::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
