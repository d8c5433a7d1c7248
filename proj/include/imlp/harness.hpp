#pragma once

// Command implementations behind the CLI: prep, run, score, pareto, stats.
// Kept header-side so the test suite can drive every command directly.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "imlp/checkpoint.hpp"
#include "imlp/common.hpp"
#include "imlp/csv.hpp"
#include "imlp/data.hpp"
#include "imlp/metrics.hpp"
#include "imlp/model.hpp"
#include "imlp/report.hpp"
#include "imlp/stats.hpp"
#include "imlp/svg.hpp"
#include "imlp/trainer.hpp"

namespace imlp {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// prep

struct PrepOutputs {
    std::string manifest_path;
    std::string summary_path;
    DatasetManifest manifest;
};

/// Loads table + schema, plans segments, draws splits, fits the
/// preprocessor, and writes the manifest plus a human-readable summary.
inline PrepOutputs cmd_prep(const std::string& table_path, const std::string& schema_path, const std::string& out_dir,
                            std::uint64_t split_seed = 7, double train_fraction = 0.85) {
    const TableSchema schema = load_schema(schema_path);
    const RawTable table = load_table(table_path, schema);
    DatasetManifest manifest = build_manifest(table, table_path, split_seed, train_fraction);

    fs::create_directories(out_dir);
    PrepOutputs out;
    out.manifest_path = (fs::path(out_dir) / "manifest.json").string();
    out.summary_path = (fs::path(out_dir) / "prep_summary.txt").string();
    save_manifest(out.manifest_path, manifest);
    manifest.content_hash = load_manifest(out.manifest_path).content_hash;

    std::ostringstream s;
    s << "dataset preparation summary\n";
    s << "  table:          " << table_path << " (" << manifest.n_rows << " rows)\n";
    s << "  feature width:  " << manifest.preprocessor.feature_width() << "\n";
    s << "  classes:        " << manifest.label_classes.size() << "\n";
    s << "  segments:       " << manifest.plan.n_segments() << " (base size " << manifest.plan.base_size
      << ", remainder " << manifest.plan.remainder << ")\n";
    s << "  split:          " << train_fraction << " train / " << 1.0 - train_fraction << " test, seed " << split_seed
      << "\n";
    s << "  manifest hash:  " << manifest.content_hash << "\n";
    for (const auto& w : manifest.preprocessor.warnings) s << "  warning: " << w << "\n";
    write_text_file(out.summary_path, s.str());
    out.manifest = std::move(manifest);
    return out;
}

// ---------------------------------------------------------------------------
// run

struct RunSettings {
    std::string manifest_path;
    ModelKind kind = ModelKind::kImlp;

    // model knobs; d_in and n_classes are resolved from the manifest
    std::size_t d_h = 256;
    std::size_t d_ff = 512;
    std::size_t window = 8;
    bool attention_enabled = true;
    bool fc2_bias = true;
    bool normalize_prototypes = true;
    BufferGranularity buffer_granularity = BufferGranularity::kSegment;

    TrainConfig train;

    EnergyProviderKind energy_kind = EnergyProviderKind::kFlopsProxy;
    double joules_per_flop = 1e-9;
    double constant_watts = 30.0;
    double reference_flops_per_second = 1e9;
    std::string trace_file;

    std::vector<std::uint64_t> seeds{7, 42, 101};
    std::string out_dir = "runs";
    std::size_t workers = 1;
    bool write_checkpoints = true;
};

/// Parses `trace:<file>`, `flops[:<j_per_flop>]` or `constant:<watts>`.
inline void apply_energy_spec(RunSettings& s, const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string head = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (head == "trace") {
        if (rest.empty()) throw config_error("--energy trace:<file> requires a trace path");
        s.energy_kind = EnergyProviderKind::kTrace;
        s.trace_file = rest;
    } else if (head == "flops") {
        s.energy_kind = EnergyProviderKind::kFlopsProxy;
        if (!rest.empty()) s.joules_per_flop = parse_double(rest, "--energy flops");
    } else if (head == "constant") {
        if (rest.empty()) throw config_error("--energy constant:<watts> requires a wattage");
        s.energy_kind = EnergyProviderKind::kConstantPower;
        s.constant_watts = parse_double(rest, "--energy constant");
    } else {
        throw config_error("unknown energy spec '" + spec + "' (expected trace:<file>|flops[:jpf]|constant:<watts>)");
    }
}

/// Loads run settings from a JSON config file. Unknown keys are rejected.
inline RunSettings load_run_settings(const std::string& config_path) {
    json doc;
    try {
        doc = json::parse(read_text_file(config_path));
    } catch (const json::parse_error& e) {
        throw config_error(config_path + ": " + e.what());
    } catch (const data_error& e) {
        throw config_error(e.what());
    }
    reject_unknown_keys(doc, {"format", "manifest", "model", "train", "energy", "seeds", "out_dir", "workers",
                              "write_checkpoints"},
                        config_path);
    if (doc.value("format", "") != "imlp-run-config-v1")
        throw config_error(config_path + ": expected format imlp-run-config-v1");

    RunSettings s;
    if (doc.contains("manifest")) s.manifest_path = doc["manifest"].get<std::string>();
    if (doc.contains("out_dir")) s.out_dir = doc["out_dir"].get<std::string>();
    if (doc.contains("seeds")) s.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
    if (doc.contains("workers")) s.workers = doc["workers"].get<std::size_t>();
    if (doc.contains("write_checkpoints")) s.write_checkpoints = doc["write_checkpoints"].get<bool>();

    if (doc.contains("model")) {
        const json& m = doc["model"];
        reject_unknown_keys(m,
                            {"kind", "d_h", "d_ff", "window", "attention_enabled", "fc2_bias", "normalize_prototypes",
                             "buffer_granularity"},
                            config_path + " model");
        if (m.contains("kind")) s.kind = model_kind_from(m["kind"].get<std::string>());
        if (m.contains("d_h")) s.d_h = m["d_h"].get<std::size_t>();
        if (m.contains("d_ff")) s.d_ff = m["d_ff"].get<std::size_t>();
        if (m.contains("window")) s.window = m["window"].get<std::size_t>();
        if (m.contains("attention_enabled")) s.attention_enabled = m["attention_enabled"].get<bool>();
        if (m.contains("fc2_bias")) s.fc2_bias = m["fc2_bias"].get<bool>();
        if (m.contains("normalize_prototypes")) s.normalize_prototypes = m["normalize_prototypes"].get<bool>();
        if (m.contains("buffer_granularity"))
            s.buffer_granularity = granularity_from(m["buffer_granularity"].get<std::string>());
    }
    if (doc.contains("train")) {
        const json& t = doc["train"];
        reject_unknown_keys(t,
                            {"epochs_per_segment", "batch_size", "learning_rate", "optimizer", "beta1", "beta2",
                             "epsilon", "mode", "shuffle", "patience", "divergence_threshold"},
                            config_path + " train");
        if (t.contains("epochs_per_segment")) s.train.epochs_per_segment = t["epochs_per_segment"].get<std::size_t>();
        if (t.contains("batch_size")) s.train.batch_size = t["batch_size"].get<std::size_t>();
        if (t.contains("learning_rate")) s.train.learning_rate = t["learning_rate"].get<double>();
        if (t.contains("optimizer")) s.train.optimizer = optimizer_kind_from(t["optimizer"].get<std::string>());
        if (t.contains("beta1")) s.train.beta1 = t["beta1"].get<double>();
        if (t.contains("beta2")) s.train.beta2 = t["beta2"].get<double>();
        if (t.contains("epsilon")) s.train.epsilon = t["epsilon"].get<double>();
        if (t.contains("mode")) s.train.mode = stream_mode_from(t["mode"].get<std::string>());
        if (t.contains("shuffle")) s.train.shuffle = t["shuffle"].get<bool>();
        if (t.contains("patience")) s.train.patience = t["patience"].get<std::size_t>();
        if (t.contains("divergence_threshold")) s.train.divergence_threshold = t["divergence_threshold"].get<double>();
    }
    if (doc.contains("energy")) {
        const json& e = doc["energy"];
        reject_unknown_keys(
            e, {"kind", "joules_per_flop", "constant_watts", "reference_flops_per_second", "trace_file"},
            config_path + " energy");
        if (e.contains("kind")) {
            const std::string kind = e["kind"].get<std::string>();
            if (kind == "trace")
                s.energy_kind = EnergyProviderKind::kTrace;
            else if (kind == "flops-proxy")
                s.energy_kind = EnergyProviderKind::kFlopsProxy;
            else if (kind == "constant-power")
                s.energy_kind = EnergyProviderKind::kConstantPower;
            else
                throw config_error(config_path + ": unknown energy kind '" + kind + "'");
        }
        if (e.contains("joules_per_flop")) s.joules_per_flop = e["joules_per_flop"].get<double>();
        if (e.contains("constant_watts")) s.constant_watts = e["constant_watts"].get<double>();
        if (e.contains("reference_flops_per_second"))
            s.reference_flops_per_second = e["reference_flops_per_second"].get<double>();
        if (e.contains("trace_file")) s.trace_file = e["trace_file"].get<std::string>();
    }
    return s;
}

inline EnergyProvider make_energy_provider(const RunSettings& s) {
    EnergyProvider p;
    p.kind = s.energy_kind;
    p.joules_per_flop = s.joules_per_flop;
    p.constant_watts = s.constant_watts;
    p.reference_flops_per_second = s.reference_flops_per_second;
    if (s.energy_kind == EnergyProviderKind::kTrace) {
        if (s.trace_file.empty()) throw config_error("energy kind 'trace' requires a trace_file");
        p.trace = load_power_trace(s.trace_file);
    }
    p.validate();
    return p;
}

/// Full configuration echo: every default that affects numerics appears.
inline json run_config_echo(const RunSettings& s, const DatasetManifest& manifest) {
    json energy{{"kind", to_string(s.energy_kind)},
                {"joules_per_flop", s.joules_per_flop},
                {"constant_watts", s.constant_watts},
                {"reference_flops_per_second", s.reference_flops_per_second}};
    if (!s.trace_file.empty()) energy["trace_file"] = s.trace_file;
    return json{
        {"manifest", s.manifest_path},
        {"manifest_hash", manifest.content_hash},
        {"model", json{{"kind", to_string(s.kind)},
                       {"d_in", manifest.preprocessor.feature_width()},
                       {"d_h", s.d_h},
                       {"d_ff", s.d_ff},
                       {"n_classes", manifest.label_classes.size()},
                       {"window", s.window},
                       {"attention_enabled", s.attention_enabled},
                       {"fc2_bias", s.fc2_bias},
                       {"normalize_prototypes", s.normalize_prototypes},
                       {"buffer_granularity", to_string(s.buffer_granularity)}}},
        {"train", json{{"epochs_per_segment", s.train.epochs_per_segment},
                       {"batch_size", s.train.batch_size},
                       {"learning_rate", s.train.learning_rate},
                       {"optimizer", to_string(s.train.optimizer)},
                       {"beta1", s.train.beta1},
                       {"beta2", s.train.beta2},
                       {"epsilon", s.train.epsilon},
                       {"mode", to_string(s.train.mode)},
                       {"shuffle", s.train.shuffle},
                       {"patience", s.train.patience},
                       {"divergence_threshold", s.train.divergence_threshold}}},
        {"energy", energy},
        {"train_fraction", manifest.train_fraction},
        {"split_seed", manifest.split_seed}};
}

struct RunOutputs {
    std::vector<std::string> report_paths;  // one per seed
    std::string aggregate_path;
    std::vector<json> reports;
    json aggregate;
};

/// Executes the stream run for every seed and writes one report per seed
/// plus the seed-aggregated report. Seeds run independently; with
/// workers > 1 they execute concurrently on distinct outputs.
inline RunOutputs cmd_run(const RunSettings& settings) {
    if (settings.manifest_path.empty()) throw config_error("cmd_run: no manifest given");
    if (settings.seeds.empty()) throw config_error("cmd_run: no seeds given");
    const DatasetManifest manifest = load_manifest(settings.manifest_path);

    const std::string current_hash = hash_hex(fnv1a64(read_text_file(manifest.table_file)));
    if (current_hash != manifest.table_hash)
        throw data_error("cmd_run: table file '" + manifest.table_file + "' changed since prep (hash mismatch)");
    const RawTable table = load_table(manifest.table_file, manifest.schema);
    const std::vector<SegmentData> segments = materialize_segments(manifest, table);

    const EnergyProvider provider = make_energy_provider(settings);
    const json config_echo = run_config_echo(settings, manifest);
    fs::create_directories(settings.out_dir);

    RunOutputs out;
    out.report_paths.resize(settings.seeds.size());
    out.reports.resize(settings.seeds.size());
    std::mutex fail_mutex;
    std::exception_ptr first_failure;

    const auto run_one = [&](std::size_t idx) {
        try {
            const std::uint64_t seed = settings.seeds[idx];
            StreamRunOptions options;
            options.kind = settings.kind;
            options.model.d_in = manifest.preprocessor.feature_width();
            options.model.n_classes = manifest.label_classes.size();
            options.model.d_h = settings.d_h;
            options.model.d_ff = settings.d_ff;
            options.model.window = settings.window;
            options.model.attention_enabled = settings.attention_enabled;
            options.model.fc2_bias = settings.fc2_bias;
            options.model.normalize_prototypes = settings.normalize_prototypes;
            options.model.buffer_granularity = settings.buffer_granularity;
            options.train = settings.train;
            options.train.seed = seed;
            options.energy = provider;

            const std::string log_path =
                (fs::path(settings.out_dir) / ("run_seed" + std::to_string(seed) + ".log.jsonl")).string();
            std::ofstream log(log_path);
            options.progress = [&](const SegmentProgress& p) {
                json line{{"event", "segment_complete"},
                          {"segment", p.segment},
                          {"epochs_run", p.train.epochs_run},
                          {"early_stopped", p.train.early_stopped},
                          {"epoch_mean_losses", p.train.epoch_mean_losses},
                          {"steps", p.train.steps},
                          {"measured_total_s", p.measured_total_s}};
                log << line.dump() << "\n";
            };

            const StreamRunResult result = run_stream(segments, options);
            const json report = build_run_report(config_echo, seed, result.segments);
            const std::string report_path =
                (fs::path(settings.out_dir) / ("report_seed" + std::to_string(seed) + ".json")).string();
            write_text_file(report_path, report.dump(2) + "\n");
            if (settings.write_checkpoints) {
                const std::string ckpt_path =
                    (fs::path(settings.out_dir) / ("checkpoint_seed" + std::to_string(seed) + ".bin")).string();
                save_checkpoint(ckpt_path, result.effective_model, result.final_params, result.final_buffer);
            }
            out.report_paths[idx] = report_path;
            out.reports[idx] = report;
        } catch (...) {
            std::lock_guard<std::mutex> lock(fail_mutex);
            if (!first_failure) first_failure = std::current_exception();
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(settings.workers, settings.seeds.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < settings.seeds.size(); ++i) run_one(i);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex next_mutex;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                while (true) {
                    std::size_t idx;
                    {
                        std::lock_guard<std::mutex> lock(next_mutex);
                        if (next >= settings.seeds.size()) return;
                        idx = next++;
                    }
                    run_one(idx);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    if (first_failure) std::rethrow_exception(first_failure);

    // seed-aggregated report (mean +- std across seeds)
    std::vector<double> nst, acc, ll, energy_total, time_total;
    json per_seed = json::array();
    for (std::size_t i = 0; i < settings.seeds.size(); ++i) {
        const json& r = out.reports[i];
        const json& agg = r.at("aggregates");
        nst.push_back(agg.at("netscore_t").get<double>());
        acc.push_back(agg.at("balanced_accuracy").at("mean").get<double>());
        ll.push_back(agg.at("log_loss").at("mean").get<double>());
        energy_total.push_back(agg.at("energy_total_j").get<double>());
        time_total.push_back(agg.at("wall_time_total_s").get<double>());
        per_seed.push_back(json{{"seed", settings.seeds[i]},
                                {"netscore_t", nst.back()},
                                {"balanced_accuracy_mean", acc.back()},
                                {"log_loss_mean", ll.back()},
                                {"energy_total_j", energy_total.back()},
                                {"wall_time_total_s", time_total.back()},
                                {"report_hash", r.at("content_hash").get<std::string>()}});
    }
    json aggregate{{"format", "imlp-aggregate-report-v1"},
                   {"config", config_echo},
                   {"environment", json{{"tool_version", kToolVersion}}},
                   {"per_seed", per_seed},
                   {"aggregates", json{{"netscore_t", mean_std_json(mean_std(nst))},
                                       {"balanced_accuracy", mean_std_json(mean_std(acc))},
                                       {"log_loss", mean_std_json(mean_std(ll))},
                                       {"energy_total_j", mean_std_json(mean_std(energy_total))},
                                       {"wall_time_total_s", mean_std_json(mean_std(time_total))}}}};
    seal_content_hash(aggregate);
    out.aggregate_path = (fs::path(settings.out_dir) / "report_aggregate.json").string();
    write_text_file(out.aggregate_path, aggregate.dump(2) + "\n");
    out.aggregate = std::move(aggregate);
    return out;
}

// ---------------------------------------------------------------------------
// score

/// Display name for a report path: parent directory plus stem, which keeps
/// same-named reports from different runs distinguishable.
inline std::string report_display_name(const std::string& path) {
    const fs::path p(path);
    const std::string stem = p.stem().string();
    const std::string parent = p.parent_path().filename().string();
    return parent.empty() ? stem : parent + "/" + stem;
}

struct ScoreRow {
    std::string name;
    double energy_j = 0.0;
    double time_s = 0.0;
    double balanced_accuracy = 0.0;
    double log_loss = 0.0;
    double netscore_t = 0.0;
};

/// Comparison table over run reports, sorted by NetScore-T descending.
/// Stored aggregates are recomputed from the per-segment lists and must
/// agree to 1e-12.
inline std::vector<ScoreRow> cmd_score(const std::vector<std::string>& report_paths) {
    if (report_paths.empty()) throw config_error("cmd_score: no reports given");
    std::vector<ScoreRow> rows;
    for (const auto& path : report_paths) {
        ScoreRow row;
        row.name = report_display_name(path);
        try {
            const json doc = load_report(path);
            if (doc.at("format") == "imlp-report-v1") {
                std::vector<SegmentResult> segs;
                for (const auto& sj : doc.at("segments")) segs.push_back(segment_result_from_json(sj));
                if (segs.empty()) throw data_error(path + ": report has no segments");
                double energy_total = 0.0, time_total = 0.0, acc = 0.0, ll = 0.0;
                for (const auto& s : segs) {
                    energy_total += s.energy_j;
                    time_total += s.wall_time_s;
                    acc += s.balanced_accuracy;
                    ll += s.log_loss;
                    const double ns_re = netscore(s.balanced_accuracy, s.energy_j);
                    if (std::fabs(ns_re - s.netscore) > 1e-12)
                        throw data_error(path + ": stored netscore disagrees with recomputation at segment " +
                                         std::to_string(s.segment));
                }
                const double nst = netscore_t(segs);
                if (std::fabs(nst - doc.at("aggregates").at("netscore_t").get<double>()) > 1e-12)
                    throw data_error(path + ": stored NetScore-T disagrees with recomputation");
                row.energy_j = energy_total;
                row.time_s = time_total;
                row.balanced_accuracy = acc / static_cast<double>(segs.size());
                row.log_loss = ll / static_cast<double>(segs.size());
                row.netscore_t = nst;
            } else {  // aggregate report
                const json& agg = doc.at("aggregates");
                row.energy_j = agg.at("energy_total_j").at("mean").get<double>();
                row.time_s = agg.at("wall_time_total_s").at("mean").get<double>();
                row.balanced_accuracy = agg.at("balanced_accuracy").at("mean").get<double>();
                row.log_loss = agg.at("log_loss").at("mean").get<double>();
                row.netscore_t = agg.at("netscore_t").at("mean").get<double>();
            }
        } catch (const json::exception& e) {
            throw data_error(path + ": " + e.what());
        }
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ScoreRow& a, const ScoreRow& b) { return a.netscore_t > b.netscore_t; });
    return rows;
}

inline std::string render_score_table(const std::vector<ScoreRow>& rows) {
    std::ostringstream s;
    char line[256];
    std::snprintf(line, sizeof(line), "%-32s %14s %12s %10s %10s %12s\n", "run", "energy_j(v)", "time_s(v)",
                  "bal_acc(^)", "logloss(v)", "netscore_t(^)");
    s << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%-32s %14.4f %12.6f %10.4f %10.4f %12.6f\n", r.name.c_str(), r.energy_j,
                      r.time_s, r.balanced_accuracy, r.log_loss, r.netscore_t);
        s << line;
    }
    return s.str();
}

// ---------------------------------------------------------------------------
// pareto

struct ParetoOutputs {
    std::vector<TradeoffPoint> points;
    std::vector<TradeoffPoint> front;
    std::string table_path;
    std::string figure_path;
};

/// Points come either from run reports (.json: mean balanced accuracy vs
/// total energy) or from a points file (.csv with header
/// label,performance,energy).
inline ParetoOutputs cmd_pareto(const std::vector<std::string>& inputs, const std::string& out_dir) {
    if (inputs.empty()) throw config_error("cmd_pareto: no inputs given");
    ParetoOutputs out;
    for (const auto& path : inputs) {
        if (fs::path(path).extension() == ".json") {
            const json doc = load_report(path);
            TradeoffPoint p;
            p.label = report_display_name(path);
            if (doc.at("format") == "imlp-report-v1") {
                p.performance = doc.at("aggregates").at("balanced_accuracy").at("mean").get<double>();
                p.energy = doc.at("aggregates").at("energy_total_j").get<double>();
            } else {
                p.performance = doc.at("aggregates").at("balanced_accuracy").at("mean").get<double>();
                p.energy = doc.at("aggregates").at("energy_total_j").at("mean").get<double>();
            }
            out.points.push_back(std::move(p));
        } else {
            const auto rows = read_delimited_file(path, ',');
            if (rows.empty() || rows[0] != std::vector<std::string>{"label", "performance", "energy"})
                throw data_error(path + ": expected header 'label,performance,energy'");
            for (std::size_t i = 1; i < rows.size(); ++i) {
                if (rows[i].size() != 3) throw data_error(path + ": row " + std::to_string(i + 1) + " needs 3 fields");
                TradeoffPoint p;
                p.label = rows[i][0];
                p.performance = parse_double(rows[i][1], path);
                p.energy = parse_double(rows[i][2], path);
                out.points.push_back(std::move(p));
            }
        }
    }
    out.front = pareto_front(out.points);

    fs::create_directories(out_dir);
    out.table_path = (fs::path(out_dir) / "pareto_front.csv").string();
    out.figure_path = (fs::path(out_dir) / "pareto.svg").string();
    std::ostringstream table;
    table << "label,performance,energy\n";
    for (const auto& p : out.front) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", p.label.c_str(), p.performance, p.energy);
        table << buf;
    }
    write_text_file(out.table_path, table.str());
    write_scatter_front_svg(out.figure_path, out.points, out.front);
    return out;
}

// ---------------------------------------------------------------------------
// stats

struct StatsSettings {
    double alpha = 0.05;
    bool higher_is_better = true;
    std::string control;  // empty: best (lowest) average rank
};

/// Friedman first; the post-hoc battery (signed-rank + Holm against the
/// control, critical difference) only runs when the Friedman null is
/// rejected at the configured alpha. The critical-difference constant table
/// covers alpha 0.05 and 0.10; other gate levels fall back to 0.05 for the
/// CD value (recorded in the output).
inline json cmd_stats(const ResultsMatrix& matrix, const StatsSettings& settings) {
    const FriedmanResult fr = friedman_test(matrix, settings.higher_is_better);
    json avg_ranks = json::object();
    for (std::size_t j = 0; j < matrix.n_algorithms(); ++j) avg_ranks[matrix.algorithms[j]] = fr.avg_ranks[j];

    json doc{{"format", "imlp-stats-report-v1"},
             {"alpha", settings.alpha},
             {"higher_is_better", settings.higher_is_better},
             {"n_datasets", matrix.n_datasets()},
             {"n_algorithms", matrix.n_algorithms()},
             {"friedman", json{{"chi2", fr.chi2}, {"p_value", fr.p_value}, {"avg_ranks", avg_ranks}}},
             {"rejected", fr.p_value < settings.alpha}};

    if (fr.p_value < settings.alpha) {
        std::string control = settings.control;
        if (control.empty()) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < matrix.n_algorithms(); ++j)
                if (fr.avg_ranks[j] < fr.avg_ranks[best]) best = j;
            control = matrix.algorithms[best];
        }
        const auto comparisons = wilcoxon_holm(matrix, control, settings.alpha);
        json wj = json::array();
        for (const auto& c : comparisons) {
            wj.push_back(json{{"algorithm", c.algorithm},
                              {"w_plus", c.w_plus},
                              {"n_used", c.n_used},
                              {"zeros_dropped", c.zeros_dropped},
                              {"exact", c.exact},
                              {"degenerate", c.degenerate},
                              {"p_raw", c.p_raw},
                              {"p_adjusted", c.p_adjusted},
                              {"reject", c.reject}});
        }
        const double cd_alpha = (settings.alpha == 0.05 || settings.alpha == 0.10) ? settings.alpha : 0.05;
        doc["posthoc"] = json{{"control", control},
                              {"wilcoxon_holm", wj},
                              {"nemenyi", json{{"alpha", cd_alpha},
                                               {"critical_difference",
                                                nemenyi_cd(matrix.n_algorithms(), matrix.n_datasets(), cd_alpha)}}}};
    } else {
        doc["posthoc"] = nullptr;
    }
    seal_content_hash(doc);
    return doc;
}

inline std::string render_stats_report(const json& doc) {
    std::ostringstream s;
    const json& fr = doc.at("friedman");
    char line[256];
    std::snprintf(line, sizeof(line), "friedman: chi2 = %.6f, p = %.6g (alpha %.3g) -> %s\n",
                  fr.at("chi2").get<double>(), fr.at("p_value").get<double>(), doc.at("alpha").get<double>(),
                  doc.at("rejected").get<bool>() ? "reject" : "fail to reject");
    s << line;
    s << "average ranks:\n";
    for (const auto& [name, rank] : fr.at("avg_ranks").items()) {
        std::snprintf(line, sizeof(line), "  %-24s %.4f\n", name.c_str(), rank.get<double>());
        s << line;
    }
    if (!doc.at("posthoc").is_null()) {
        const json& ph = doc.at("posthoc");
        s << "post-hoc vs control '" << ph.at("control").get<std::string>() << "':\n";
        for (const auto& c : ph.at("wilcoxon_holm")) {
            std::snprintf(line, sizeof(line), "  %-24s W+=%8.1f  p_raw=%.6g  p_holm=%.6g  %s%s\n",
                          c.at("algorithm").get<std::string>().c_str(), c.at("w_plus").get<double>(),
                          c.at("p_raw").get<double>(), c.at("p_adjusted").get<double>(),
                          c.at("reject").get<bool>() ? "reject" : "keep",
                          c.at("degenerate").get<bool>() ? " (degenerate)" : "");
            s << line;
        }
        const json& nem = ph.at("nemenyi");
        std::snprintf(line, sizeof(line), "nemenyi critical difference (alpha %.2f): %.4f\n",
                      nem.at("alpha").get<double>(), nem.at("critical_difference").get<double>());
        s << line;
    } else {
        s << "post-hoc analysis suppressed (friedman null not rejected)\n";
    }
    return s.str();
}

}  // namespace imlp
