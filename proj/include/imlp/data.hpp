#pragma once

// Table ingestion and stream preparation: schema-driven loading,
// chronological segmentation with remainder redistribution, preprocessing
// (median / constant imputation, standardization, one-hot), and per-segment
// stratified splits.
//
// Row order is semantic: the file order is the temporal order of the
// stream, so segmentation never reorders rows. Preprocessing statistics are
// fit once on the first segment's training split and frozen, which keeps
// the feature width constant across the stream and never looks ahead.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "imlp/common.hpp"
#include "imlp/csv.hpp"
#include "imlp/matrix.hpp"

namespace imlp {

enum class ColumnKind { kNumeric, kCategorical };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::kNumeric;
    std::vector<std::string> categories;  // optional declared category list
};

struct TableSchema {
    std::vector<ColumnSpec> columns;
    std::string target;
    char delimiter = ',';

    const ColumnSpec& column(const std::string& name) const {
        for (const auto& c : columns)
            if (c.name == name) return c;
        throw data_error("schema: unknown column '" + name + "'");
    }

    void validate() const {
        if (columns.empty()) throw data_error("schema: no columns declared");
        std::set<std::string> seen;
        for (const auto& c : columns) {
            if (!seen.insert(c.name).second) throw data_error("schema: duplicate column '" + c.name + "'");
        }
        if (target.empty()) throw data_error("schema: no target column declared");
        if (seen.count(target) == 0) throw data_error("schema: target column '" + target + "' not among columns");
        if (column(target).kind != ColumnKind::kCategorical)
            throw data_error("schema: target column '" + target + "' must be categorical");
    }
};

inline bool is_missing_cell(const std::string& s) {
    return s.empty() || s == "?" || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

/// A loaded table: cells kept as raw strings, row order preserved.
struct RawTable {
    TableSchema schema;
    std::vector<std::string> column_order;  // file order
    std::size_t target_index = 0;           // position in column_order
    std::vector<std::vector<std::string>> rows;

    std::size_t n_rows() const { return rows.size(); }

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < column_order.size(); ++i)
            if (column_order[i] == name) return i;
        throw data_error("table: unknown column '" + name + "'");
    }
};

/// Loads a delimited table and checks it against the schema. Every header
/// column must be declared and every declared column must be present.
inline RawTable load_table(const std::string& path, const TableSchema& schema) {
    schema.validate();
    auto raw = read_delimited_file(path, schema.delimiter);
    if (raw.empty()) throw data_error(path + ": file has no header row");

    RawTable table;
    table.schema = schema;
    table.column_order = raw.front();
    std::set<std::string> header_seen;
    for (const auto& name : table.column_order) {
        schema.column(name);  // rejects unknown columns
        if (!header_seen.insert(name).second) throw data_error(path + ": duplicate header column '" + name + "'");
    }
    for (const auto& c : schema.columns) {
        bool found = false;
        for (const auto& name : table.column_order) found = found || name == c.name;
        if (!found) throw data_error(path + ": schema column '" + c.name + "' missing from header");
    }
    table.target_index = table.column_index(schema.target);

    const std::size_t width = table.column_order.size();
    for (std::size_t r = 1; r < raw.size(); ++r) {
        if (raw[r].size() != width)
            throw data_error(path + ": row " + std::to_string(r + 1) + " has " + std::to_string(raw[r].size()) +
                             " fields, expected " + std::to_string(width));
        table.rows.push_back(std::move(raw[r]));
    }
    if (table.rows.empty()) throw data_error(path + ": table has no data rows");
    return table;
}

// ---------------------------------------------------------------------------
// Segmentation

struct SegmentPlan {
    std::size_t n_rows = 0;
    std::size_t base_size = 0;   // chosen s
    std::size_t remainder = 0;   // n mod s, spread over the first segments
    std::vector<std::pair<std::size_t, std::size_t>> bounds;  // [start, end) per segment

    std::size_t n_segments() const { return bounds.size(); }
};

/// Contiguous chronological segments of near-uniform size. For n above
/// max_size the base size s in [min_size, max_size] minimizes n mod s
/// (smallest s on ties); the remainder is redistributed one row each to the
/// first segments, so all sizes are s or s+1.
inline SegmentPlan plan_segments(std::size_t n, std::size_t min_size = 500, std::size_t max_size = 1000) {
    if (n == 0) throw data_error("plan_segments: empty input");
    if (min_size == 0 || max_size < min_size) throw config_error("plan_segments: invalid size range");

    SegmentPlan plan;
    plan.n_rows = n;
    if (n <= max_size) {
        plan.base_size = n;
        plan.remainder = 0;
        plan.bounds.emplace_back(0, n);
        return plan;
    }

    std::size_t best_s = min_size;
    std::size_t best_r = n % min_size;
    for (std::size_t s = min_size + 1; s <= max_size; ++s) {
        const std::size_t r = n % s;
        if (r < best_r) {
            best_r = r;
            best_s = s;
        }
    }
    const std::size_t k = n / best_s;
    if (best_r > k)
        throw numeric_error("plan_segments: remainder exceeds segment count");  // cannot happen for n > max_size
    plan.base_size = best_s;
    plan.remainder = best_r;
    std::size_t start = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t size = best_s + (i < best_r ? 1 : 0);
        plan.bounds.emplace_back(start, start + size);
        start += size;
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Preprocessing

struct NumericStats {
    double median = 0.0;
    double mean = 0.0;
    double stddev = 0.0;  // population stddev over imputed values
    bool zero_variance = false;
};

struct CategoricalStats {
    std::vector<std::string> categories;  // declared or first-appearance order
    std::size_t missing_slot = 0;         // reserved token index (last)
};

inline const char* const kMissingToken = "<missing>";

/// Frozen preprocessing statistics plus the global label map.
struct PreprocessModel {
    std::vector<std::string> feature_columns;      // file order, target excluded
    std::map<std::string, NumericStats> numeric;   // by column name
    std::map<std::string, CategoricalStats> categorical;
    std::vector<std::string> label_classes;        // dense class index order
    std::size_t fitted_on_segment = 0;
    std::vector<std::string> warnings;

    std::size_t feature_width() const {
        std::size_t w = 0;
        for (const auto& name : feature_columns) {
            const auto it = categorical.find(name);
            w += it == categorical.end() ? 1 : it->second.categories.size();
        }
        return w;
    }

    std::size_t n_classes() const { return label_classes.size(); }

    int label_index(const std::string& value) const {
        for (std::size_t i = 0; i < label_classes.size(); ++i)
            if (label_classes[i] == value) return static_cast<int>(i);
        throw data_error("unseen label value '" + value + "': the class set is fixed for the stream");
    }
};

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Global label map. Uses the declared category list of the target when the
/// schema provides one, otherwise first-appearance order over the whole
/// table (the label space is fixed across the stream either way).
inline std::vector<std::string> build_label_classes(const RawTable& table) {
    const ColumnSpec& target = table.schema.column(table.schema.target);
    if (!target.categories.empty()) return target.categories;
    std::vector<std::string> classes;
    for (const auto& row : table.rows) {
        const std::string& v = row[table.target_index];
        if (is_missing_cell(v)) throw data_error("missing label value in table");
        if (std::find(classes.begin(), classes.end(), v) == classes.end()) classes.push_back(v);
    }
    return classes;
}

/// Fits imputation / standardization / one-hot statistics on the given rows
/// (by global row index). Deterministic: category order is declared order
/// or first appearance, with the reserved missing token appended last.
inline PreprocessModel fit_preprocessor(const RawTable& table, const std::vector<std::size_t>& row_indices,
                                        std::size_t fitted_on_segment = 0) {
    if (row_indices.empty()) throw data_error("fit_preprocessor: empty fitting slice");
    PreprocessModel model;
    model.fitted_on_segment = fitted_on_segment;
    model.label_classes = build_label_classes(table);

    for (std::size_t ci = 0; ci < table.column_order.size(); ++ci) {
        if (ci == table.target_index) continue;
        const std::string& name = table.column_order[ci];
        model.feature_columns.push_back(name);
        const ColumnSpec& spec = table.schema.column(name);

        if (spec.kind == ColumnKind::kNumeric) {
            std::vector<double> present;
            for (std::size_t r : row_indices) {
                const std::string& cell = table.rows[r][ci];
                if (!is_missing_cell(cell)) present.push_back(parse_double(cell, "column '" + name + "'"));
            }
            NumericStats st;
            if (present.empty()) {
                st.median = 0.0;
                model.warnings.push_back("column '" + name + "': all values missing in fitting slice, imputing 0");
            } else {
                st.median = detail::median_of(present);
            }
            double sum = 0.0;
            for (std::size_t r : row_indices) {
                const std::string& cell = table.rows[r][ci];
                sum += is_missing_cell(cell) ? st.median : parse_double(cell, "column '" + name + "'");
            }
            st.mean = sum / static_cast<double>(row_indices.size());
            double ss = 0.0;
            for (std::size_t r : row_indices) {
                const std::string& cell = table.rows[r][ci];
                const double v = is_missing_cell(cell) ? st.median : parse_double(cell, "column '" + name + "'");
                ss += (v - st.mean) * (v - st.mean);
            }
            st.stddev = std::sqrt(ss / static_cast<double>(row_indices.size()));
            st.zero_variance = st.stddev == 0.0;
            model.numeric[name] = st;
        } else {
            CategoricalStats st;
            if (!spec.categories.empty()) {
                st.categories = spec.categories;
            } else {
                for (std::size_t r : row_indices) {
                    const std::string& cell = table.rows[r][ci];
                    if (is_missing_cell(cell)) continue;
                    if (std::find(st.categories.begin(), st.categories.end(), cell) == st.categories.end())
                        st.categories.push_back(cell);
                }
            }
            st.categories.push_back(kMissingToken);
            st.missing_slot = st.categories.size() - 1;
            model.categorical[name] = st;
        }
    }
    return model;
}

/// Applies the frozen statistics: numeric cells imputed then standardized
/// (zero-variance columns map to 0), categorical cells one-hot encoded with
/// unseen categories mapping to an all-zero block, labels mapped through
/// the global label map.
inline std::pair<Matrix, std::vector<int>> transform(const PreprocessModel& model, const RawTable& table,
                                                     const std::vector<std::size_t>& row_indices) {
    const std::size_t d_in = model.feature_width();
    Matrix x(row_indices.size(), d_in);
    std::vector<int> y(row_indices.size(), 0);

    // resolve column positions once
    std::vector<std::size_t> positions;
    for (const auto& name : model.feature_columns) positions.push_back(table.column_index(name));

    for (std::size_t out_r = 0; out_r < row_indices.size(); ++out_r) {
        const auto& row = table.rows[row_indices[out_r]];
        std::size_t offset = 0;
        for (std::size_t f = 0; f < model.feature_columns.size(); ++f) {
            const std::string& name = model.feature_columns[f];
            const std::string& cell = row[positions[f]];
            const auto num_it = model.numeric.find(name);
            if (num_it != model.numeric.end()) {
                const NumericStats& st = num_it->second;
                const double v = is_missing_cell(cell) ? st.median : parse_double(cell, "column '" + name + "'");
                x(out_r, offset) = st.zero_variance ? 0.0 : (v - st.mean) / st.stddev;
                offset += 1;
            } else {
                const CategoricalStats& st = model.categorical.at(name);
                std::size_t slot = st.categories.size();  // sentinel: unseen -> all-zero block
                if (is_missing_cell(cell)) {
                    slot = st.missing_slot;
                } else {
                    for (std::size_t c = 0; c + 1 < st.categories.size(); ++c) {
                        if (st.categories[c] == cell) {
                            slot = c;
                            break;
                        }
                    }
                }
                if (slot < st.categories.size()) x(out_r, offset + slot) = 1.0;
                offset += st.categories.size();
            }
        }
        y[out_r] = model.label_index(row[table.target_index]);
    }
    return {std::move(x), std::move(y)};
}

// ---------------------------------------------------------------------------
// Stratified split

struct SplitIndices {
    std::vector<std::size_t> train;  // local row indices, ascending
    std::vector<std::size_t> test;
};

/// Per-class proportional train/test split. Classes with at least two
/// members contribute at least one row to each side where rounding permits;
/// class counts are a function of the data only, membership is a function
/// of the seed.
inline SplitIndices stratified_split(const std::vector<int>& labels, double train_fraction, std::uint64_t seed) {
    if (labels.size() < 2) throw data_error("stratified_split: segment needs at least 2 rows");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw config_error("stratified_split: train_fraction must lie in (0, 1)");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    Rng rng(seed);
    SplitIndices out;
    // class id -> indices allocated to train, kept to support the fix-up below
    std::map<int, std::vector<std::size_t>> train_by_class;
    for (auto& [cls, members] : by_class) {
        rng.shuffle(members);
        const std::size_t n_c = members.size();
        std::size_t n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n_c) + 0.5));
        if (n_c >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n_c - 1);
        if (n_c == 1) n_train = 1;
        train_by_class[cls] = {members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train)};
        for (std::size_t i = n_train; i < n_c; ++i) out.test.push_back(members[i]);
    }

    // An all-singleton segment can leave one side empty; move one row over.
    if (out.test.empty()) {
        int donor = -1;
        std::size_t best = 0;
        for (const auto& [cls, rows] : train_by_class)
            if (rows.size() > best || (rows.size() == best && donor >= 0 && cls > donor)) {
                best = rows.size();
                donor = cls;
            }
        out.test.push_back(train_by_class[donor].back());
        train_by_class[donor].pop_back();
    }
    for (const auto& [cls, rows] : train_by_class)
        for (std::size_t r : rows) out.train.push_back(r);

    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

}  // namespace imlp
