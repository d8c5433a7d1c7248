#pragma once

// Structured file formats: dataset schema, segmented-dataset manifest,
// power traces, results matrices, and run reports.
//
// Manifests and reports are JSON with alphabetically ordered keys and
// shortest-round-trip number formatting, so identical inputs produce
// byte-identical files; each carries an FNV-1a content hash computed over
// the serialized document with the hash field blanked.

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "imlp/common.hpp"
#include "imlp/csv.hpp"
#include "imlp/data.hpp"
#include "imlp/metrics.hpp"
#include "imlp/model.hpp"
#include "imlp/stats.hpp"
#include "imlp/trainer.hpp"

namespace imlp {

using nlohmann::json;

inline const char* const kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// small helpers

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

inline MeanStd mean_std(const std::vector<double>& v) {
    if (v.empty()) throw data_error("mean_std: empty input");
    MeanStd out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size()));
    return out;
}

/// Rejects keys outside the allowed set -- typos in config files fail loudly.
inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw config_error(where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (allowed.count(key) == 0) throw config_error(where + ": unknown key '" + key + "'");
}

inline json mean_std_json(const MeanStd& ms) { return json{{"mean", ms.mean}, {"std", ms.std}}; }

/// Serializes with the content_hash field blanked, hashes, then fills it in.
inline void seal_content_hash(json& doc) {
    doc["content_hash"] = "";
    const std::string payload = doc.dump(2);
    doc["content_hash"] = hash_hex(fnv1a64(payload));
}

inline void verify_content_hash(const json& doc, const std::string& where) {
    if (!doc.contains("content_hash")) throw data_error(where + ": missing content_hash");
    json copy = doc;
    const std::string stored = copy["content_hash"];
    copy["content_hash"] = "";
    if (hash_hex(fnv1a64(copy.dump(2))) != stored) throw data_error(where + ": content hash mismatch");
}

// ---------------------------------------------------------------------------
// enum names

inline std::string to_string(ColumnKind k) { return k == ColumnKind::kNumeric ? "numeric" : "categorical"; }
inline std::string to_string(StreamMode m) {
    return m == StreamMode::kIncremental ? "incremental" : "cumulative-retrain";
}
inline std::string to_string(ModelKind k) { return k == ModelKind::kImlp ? "imlp" : "plain-mlp"; }
inline std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::kAdaptiveMoment ? "adaptive-moment" : "sgd-momentum";
}
inline std::string to_string(BufferGranularity g) { return g == BufferGranularity::kSegment ? "segment" : "batch"; }
inline std::string to_string(EnergyProviderKind k) {
    switch (k) {
        case EnergyProviderKind::kTrace: return "trace";
        case EnergyProviderKind::kFlopsProxy: return "flops-proxy";
        case EnergyProviderKind::kConstantPower: return "constant-power";
    }
    return "flops-proxy";
}

inline ColumnKind column_kind_from(const std::string& s) {
    if (s == "numeric") return ColumnKind::kNumeric;
    if (s == "categorical") return ColumnKind::kCategorical;
    throw config_error("unknown column kind '" + s + "' (expected numeric|categorical)");
}
inline StreamMode stream_mode_from(const std::string& s) {
    if (s == "incremental") return StreamMode::kIncremental;
    if (s == "cumulative-retrain" || s == "cumulative") return StreamMode::kCumulativeRetrain;
    throw config_error("unknown mode '" + s + "' (expected incremental|cumulative-retrain)");
}
inline ModelKind model_kind_from(const std::string& s) {
    if (s == "imlp") return ModelKind::kImlp;
    if (s == "plain-mlp") return ModelKind::kPlainMlp;
    throw config_error("unknown model kind '" + s + "' (expected imlp|plain-mlp)");
}
inline OptimizerKind optimizer_kind_from(const std::string& s) {
    if (s == "adaptive-moment") return OptimizerKind::kAdaptiveMoment;
    if (s == "sgd-momentum") return OptimizerKind::kSgdMomentum;
    throw config_error("unknown optimizer '" + s + "' (expected adaptive-moment|sgd-momentum)");
}
inline BufferGranularity granularity_from(const std::string& s) {
    if (s == "segment") return BufferGranularity::kSegment;
    if (s == "batch") return BufferGranularity::kBatch;
    throw config_error("unknown buffer granularity '" + s + "' (expected segment|batch)");
}

// ---------------------------------------------------------------------------
// schema file

inline TableSchema load_schema(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw data_error(path + ": " + e.what());
    }
    reject_unknown_keys(doc, {"format", "target", "delimiter", "columns"}, path);
    if (doc.value("format", "") != "imlp-schema-v1") throw data_error(path + ": expected format imlp-schema-v1");

    TableSchema schema;
    schema.target = doc.at("target").get<std::string>();
    const std::string delim = doc.value("delimiter", ",");
    if (delim.size() != 1) throw data_error(path + ": delimiter must be a single character");
    schema.delimiter = delim[0];
    for (const auto& col : doc.at("columns")) {
        reject_unknown_keys(col, {"name", "kind", "categories"}, path + " column");
        ColumnSpec spec;
        spec.name = col.at("name").get<std::string>();
        spec.kind = column_kind_from(col.at("kind").get<std::string>());
        if (col.contains("categories")) spec.categories = col["categories"].get<std::vector<std::string>>();
        schema.columns.push_back(std::move(spec));
    }
    schema.validate();
    return schema;
}

inline json schema_to_json(const TableSchema& schema) {
    json cols = json::array();
    for (const auto& c : schema.columns) {
        json col{{"name", c.name}, {"kind", to_string(c.kind)}};
        if (!c.categories.empty()) col["categories"] = c.categories;
        cols.push_back(col);
    }
    return json{{"format", "imlp-schema-v1"},
                {"target", schema.target},
                {"delimiter", std::string(1, schema.delimiter)},
                {"columns", cols}};
}

inline TableSchema schema_from_json(const json& doc) {
    TableSchema schema;
    schema.target = doc.at("target").get<std::string>();
    const std::string delim = doc.value("delimiter", ",");
    schema.delimiter = delim.at(0);
    for (const auto& col : doc.at("columns")) {
        ColumnSpec spec;
        spec.name = col.at("name").get<std::string>();
        spec.kind = column_kind_from(col.at("kind").get<std::string>());
        if (col.contains("categories")) spec.categories = col["categories"].get<std::vector<std::string>>();
        schema.columns.push_back(std::move(spec));
    }
    schema.validate();
    return schema;
}

// ---------------------------------------------------------------------------
// power trace file: header `timestamp_s,power_w`, monotone timestamps

inline PowerTrace load_power_trace(const std::string& path) {
    const auto rows = read_delimited_file(path, ',');
    if (rows.size() < 2) throw data_error(path + ": power trace needs a header and at least one sample");
    if (rows[0].size() != 2 || rows[0][0] != "timestamp_s" || rows[0][1] != "power_w")
        throw data_error(path + ": expected header 'timestamp_s,power_w'");
    PowerTrace trace;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != 2) throw data_error(path + ": row " + std::to_string(i + 1) + " needs 2 fields");
        PowerTrace::Sample s;
        s.t_s = parse_double(rows[i][0], path + " row " + std::to_string(i + 1));
        s.watts = parse_double(rows[i][1], path + " row " + std::to_string(i + 1));
        trace.samples.push_back(s);
    }
    trace.validate();
    return trace;
}

// ---------------------------------------------------------------------------
// results matrix file: first column dataset labels, header row algorithms

inline ResultsMatrix load_results_matrix(const std::string& path, char delimiter = ',') {
    const auto rows = read_delimited_file(path, delimiter);
    if (rows.size() < 2 || rows[0].size() < 2)
        throw stats_error(path + ": results matrix needs a header row and at least one dataset row");
    ResultsMatrix m;
    for (std::size_t j = 1; j < rows[0].size(); ++j) m.algorithms.push_back(rows[0][j]);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw stats_error(path + ": row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                              " fields, expected " + std::to_string(rows[0].size()));
        m.datasets.push_back(rows[i][0]);
        for (std::size_t j = 1; j < rows[i].size(); ++j) {
            if (rows[i][j].empty())
                throw stats_error(path + ": missing cell at row " + std::to_string(i + 1) + ", column " +
                                  std::to_string(j + 1));
            m.values.push_back(parse_double(rows[i][j], path + " row " + std::to_string(i + 1)));
        }
    }
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// segmented-dataset manifest

struct DatasetManifest {
    std::string table_file;
    std::string table_hash;
    TableSchema schema;
    std::size_t n_rows = 0;
    std::vector<std::string> label_classes;
    std::uint64_t split_seed = 7;
    double train_fraction = 0.85;
    SegmentPlan plan;
    std::vector<SplitIndices> splits;  // global row indices per segment
    PreprocessModel preprocessor;
    std::string content_hash;
};

/// Plans segments, draws the per-segment stratified splits, and fits the
/// preprocessor on the first segment's training split.
inline DatasetManifest build_manifest(const RawTable& table, const std::string& table_file,
                                      std::uint64_t split_seed = 7, double train_fraction = 0.85) {
    DatasetManifest m;
    m.table_file = table_file;
    m.table_hash = hash_hex(fnv1a64(read_text_file(table_file)));
    m.schema = table.schema;
    m.n_rows = table.n_rows();
    m.label_classes = build_label_classes(table);
    m.split_seed = split_seed;
    m.train_fraction = train_fraction;
    m.plan = plan_segments(table.n_rows());

    // labels as dense indices, needed for stratification
    std::vector<int> labels(table.n_rows());
    {
        PreprocessModel label_map;
        label_map.label_classes = m.label_classes;
        for (std::size_t r = 0; r < table.n_rows(); ++r)
            labels[r] = label_map.label_index(table.rows[r][table.target_index]);
    }

    for (std::size_t s = 0; s < m.plan.n_segments(); ++s) {
        const auto [start, end] = m.plan.bounds[s];
        std::vector<int> seg_labels(labels.begin() + static_cast<std::ptrdiff_t>(start),
                                    labels.begin() + static_cast<std::ptrdiff_t>(end));
        SplitIndices local = stratified_split(seg_labels, train_fraction, detail::mix_seed(split_seed, s, 0x511));
        SplitIndices global;
        for (std::size_t i : local.train) global.train.push_back(start + i);
        for (std::size_t i : local.test) global.test.push_back(start + i);
        m.splits.push_back(std::move(global));
    }

    m.preprocessor = fit_preprocessor(table, m.splits.front().train, 0);
    m.preprocessor.label_classes = m.label_classes;
    return m;
}

inline json manifest_to_json(const DatasetManifest& m) {
    json segments = json::array();
    for (const auto& [start, end] : m.plan.bounds) segments.push_back(json{{"start", start}, {"end", end}});
    json splits = json::array();
    for (const auto& s : m.splits) splits.push_back(json{{"train", s.train}, {"test", s.test}});

    json columns = json::array();
    for (const auto& name : m.preprocessor.feature_columns) {
        const auto num = m.preprocessor.numeric.find(name);
        if (num != m.preprocessor.numeric.end()) {
            columns.push_back(json{{"name", name},
                                   {"kind", "numeric"},
                                   {"median", num->second.median},
                                   {"mean", num->second.mean},
                                   {"stddev", num->second.stddev},
                                   {"zero_variance", num->second.zero_variance}});
        } else {
            columns.push_back(
                json{{"name", name}, {"kind", "categorical"}, {"categories", m.preprocessor.categorical.at(name).categories}});
        }
    }

    json doc{{"format", "imlp-manifest-v1"},
             {"table_file", m.table_file},
             {"table_hash", m.table_hash},
             {"schema", schema_to_json(m.schema)},
             {"n_rows", m.n_rows},
             {"label_classes", m.label_classes},
             {"split_seed", m.split_seed},
             {"train_fraction", m.train_fraction},
             {"segmentation",
              json{{"base_size", m.plan.base_size}, {"remainder", m.plan.remainder}, {"segments", segments}}},
             {"splits", splits},
             {"preprocessor", json{{"fitted_on_segment", m.preprocessor.fitted_on_segment},
                                   {"feature_width", m.preprocessor.feature_width()},
                                   {"columns", columns}}},
             {"warnings", m.preprocessor.warnings}};
    seal_content_hash(doc);
    return doc;
}

inline DatasetManifest manifest_from_json(const json& doc, const std::string& where) {
    if (doc.value("format", "") != "imlp-manifest-v1") throw data_error(where + ": expected format imlp-manifest-v1");
    verify_content_hash(doc, where);

    DatasetManifest m;
    m.table_file = doc.at("table_file").get<std::string>();
    m.table_hash = doc.at("table_hash").get<std::string>();
    m.schema = schema_from_json(doc.at("schema"));
    m.n_rows = doc.at("n_rows").get<std::size_t>();
    m.label_classes = doc.at("label_classes").get<std::vector<std::string>>();
    m.split_seed = doc.at("split_seed").get<std::uint64_t>();
    m.train_fraction = doc.at("train_fraction").get<double>();

    const json& seg = doc.at("segmentation");
    m.plan.n_rows = m.n_rows;
    m.plan.base_size = seg.at("base_size").get<std::size_t>();
    m.plan.remainder = seg.at("remainder").get<std::size_t>();
    for (const auto& b : seg.at("segments"))
        m.plan.bounds.emplace_back(b.at("start").get<std::size_t>(), b.at("end").get<std::size_t>());

    for (const auto& s : doc.at("splits")) {
        SplitIndices si;
        si.train = s.at("train").get<std::vector<std::size_t>>();
        si.test = s.at("test").get<std::vector<std::size_t>>();
        m.splits.push_back(std::move(si));
    }

    const json& prep = doc.at("preprocessor");
    m.preprocessor.fitted_on_segment = prep.at("fitted_on_segment").get<std::size_t>();
    for (const auto& col : prep.at("columns")) {
        const std::string name = col.at("name").get<std::string>();
        m.preprocessor.feature_columns.push_back(name);
        if (col.at("kind").get<std::string>() == "numeric") {
            NumericStats st;
            st.median = col.at("median").get<double>();
            st.mean = col.at("mean").get<double>();
            st.stddev = col.at("stddev").get<double>();
            st.zero_variance = col.at("zero_variance").get<bool>();
            m.preprocessor.numeric[name] = st;
        } else {
            CategoricalStats st;
            st.categories = col.at("categories").get<std::vector<std::string>>();
            st.missing_slot = st.categories.size() - 1;
            m.preprocessor.categorical[name] = st;
        }
    }
    m.preprocessor.label_classes = m.label_classes;
    m.preprocessor.warnings = doc.at("warnings").get<std::vector<std::string>>();
    m.content_hash = doc.at("content_hash").get<std::string>();
    return m;
}

inline void save_manifest(const std::string& path, const DatasetManifest& m) {
    write_text_file(path, manifest_to_json(m).dump(2) + "\n");
}

inline DatasetManifest load_manifest(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw data_error(path + ": " + e.what());
    }
    return manifest_from_json(doc, path);
}

/// Builds the per-segment training/evaluation matrices from a manifest,
/// re-reading the table it references.
inline std::vector<SegmentData> materialize_segments(const DatasetManifest& m, const RawTable& table) {
    std::vector<SegmentData> out;
    for (const auto& split : m.splits) {
        SegmentData seg;
        auto [xtr, ytr] = transform(m.preprocessor, table, split.train);
        auto [xte, yte] = transform(m.preprocessor, table, split.test);
        seg.x_train = std::move(xtr);
        seg.y_train = std::move(ytr);
        seg.x_test = std::move(xte);
        seg.y_test = std::move(yte);
        out.push_back(std::move(seg));
    }
    return out;
}

// ---------------------------------------------------------------------------
// run report

inline json segment_result_to_json(const SegmentResult& r) {
    return json{{"segment", r.segment},
                {"balanced_accuracy", r.balanced_accuracy},
                {"log_loss", r.log_loss},
                {"energy_j", r.energy_j},
                {"wall_time_s", r.wall_time_s},
                {"netscore", r.netscore},
                {"netscore_capped", r.netscore_capped},
                {"flops_train", r.flops_train},
                {"flops_finalize", r.flops_finalize},
                {"flops_eval", r.flops_eval},
                {"row_visits_train", r.row_visits_train}};
}

inline SegmentResult segment_result_from_json(const json& j) {
    SegmentResult r;
    r.segment = j.at("segment").get<std::size_t>();
    r.balanced_accuracy = j.at("balanced_accuracy").get<double>();
    r.log_loss = j.at("log_loss").get<double>();
    r.energy_j = j.at("energy_j").get<double>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.netscore = j.at("netscore").get<double>();
    r.netscore_capped = j.at("netscore_capped").get<bool>();
    r.flops_train = j.at("flops_train").get<std::uint64_t>();
    r.flops_finalize = j.at("flops_finalize").get<std::uint64_t>();
    r.flops_eval = j.at("flops_eval").get<std::uint64_t>();
    r.row_visits_train = j.at("row_visits_train").get<std::uint64_t>();
    return r;
}

/// Full per-seed report: config echo (every default in effect), per-segment
/// results, aggregates, environment stamp, content hash.
inline json build_run_report(const json& config_echo, std::uint64_t seed,
                             const std::vector<SegmentResult>& segments) {
    std::vector<double> acc, ll, energy, wall, ns;
    json seg_json = json::array();
    for (const auto& s : segments) {
        seg_json.push_back(segment_result_to_json(s));
        acc.push_back(s.balanced_accuracy);
        ll.push_back(s.log_loss);
        energy.push_back(s.energy_j);
        wall.push_back(s.wall_time_s);
        ns.push_back(s.netscore);
    }
    double energy_total = 0.0, wall_total = 0.0;
    for (const auto& s : segments) {
        energy_total += s.energy_j;
        wall_total += s.wall_time_s;
    }

    json doc{{"format", "imlp-report-v1"},
             {"config", config_echo},
             {"environment", json{{"tool_version", kToolVersion}, {"seed", seed}}},
             {"segments", seg_json},
             {"aggregates", json{{"balanced_accuracy", mean_std_json(mean_std(acc))},
                                 {"log_loss", mean_std_json(mean_std(ll))},
                                 {"energy_j", mean_std_json(mean_std(energy))},
                                 {"wall_time_s", mean_std_json(mean_std(wall))},
                                 {"netscore", mean_std_json(mean_std(ns))},
                                 {"netscore_t", netscore_t(segments)},
                                 {"energy_total_j", energy_total},
                                 {"wall_time_total_s", wall_total}}}};
    seal_content_hash(doc);
    return doc;
}

inline json load_report(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw data_error(path + ": " + e.what());
    }
    if (doc.value("format", "") != "imlp-report-v1" && doc.value("format", "") != "imlp-aggregate-report-v1")
        throw data_error(path + ": not a run report");
    verify_content_hash(doc, path);
    return doc;
}

}  // namespace imlp
