#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <set>

#include "imlp/data.hpp"
#include "test_support.hpp"

using namespace imlp;

namespace {

/// In-memory table: column specs plus rows of raw cells.
RawTable make_table(std::vector<ColumnSpec> columns, const std::string& target,
                    std::vector<std::vector<std::string>> rows) {
    RawTable t;
    t.schema.columns = std::move(columns);
    t.schema.target = target;
    t.schema.validate();
    for (const auto& c : t.schema.columns) t.column_order.push_back(c.name);
    t.target_index = t.column_index(target);
    t.rows = std::move(rows);
    return t;
}

std::vector<std::size_t> all_rows(const RawTable& t) {
    std::vector<std::size_t> idx(t.n_rows());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

}  // namespace

TEST_CASE("plan_segments") {
    SECTION("n=2000 brute force picks s=500 and four segments") {
        // oracle: scan every s in [500, 1000] for the smallest remainder
        std::size_t best_s = 500, best_r = 2000 % 500;
        for (std::size_t s = 501; s <= 1000; ++s)
            if (2000 % s < best_r) {
                best_r = 2000 % s;
                best_s = s;
            }
        REQUIRE(best_s == 500);
        REQUIRE(best_r == 0);
        const SegmentPlan plan = plan_segments(2000);
        CHECK(plan.base_size == 500);
        REQUIRE(plan.n_segments() == 4);
        for (const auto& [start, end] : plan.bounds) CHECK(end - start == 500);
    }
    SECTION("n=1234 splits as two segments of 617") {
        std::size_t best_s = 500, best_r = 1234 % 500;
        for (std::size_t s = 501; s <= 1000; ++s)
            if (1234 % s < best_r) {
                best_r = 1234 % s;
                best_s = s;
            }
        REQUIRE(best_s == 617);
        const SegmentPlan plan = plan_segments(1234);
        CHECK(plan.base_size == 617);
        REQUIRE(plan.n_segments() == 2);
        CHECK(plan.bounds[0] == std::pair<std::size_t, std::size_t>{0, 617});
        CHECK(plan.bounds[1] == std::pair<std::size_t, std::size_t>{617, 1234});
    }
    SECTION("n below the maximum stays one segment") {
        const SegmentPlan plan = plan_segments(300);
        REQUIRE(plan.n_segments() == 1);
        CHECK(plan.bounds[0] == std::pair<std::size_t, std::size_t>{0, 300});
    }
    SECTION("zero rows is an error") { CHECK_THROWS_AS(plan_segments(0), data_error); }
    SECTION("random n: contiguous cover, near-uniform sizes") {
        Rng rng(201);
        for (int trial = 0; trial < 300; ++trial) {
            const std::size_t n = 1 + rng.below(100000);
            const SegmentPlan plan = plan_segments(n);
            std::size_t cursor = 0, smallest = n, largest = 0;
            for (const auto& [start, end] : plan.bounds) {
                REQUIRE(start == cursor);
                REQUIRE(end > start);
                cursor = end;
                smallest = std::min(smallest, end - start);
                largest = std::max(largest, end - start);
            }
            REQUIRE(cursor == n);
            CHECK(largest - smallest <= 1);
            if (n > 1000) {
                CHECK(plan.base_size >= 500);
                CHECK(plan.base_size <= 1000);
            }
        }
    }
}

TEST_CASE("fit_preprocessor") {
    SECTION("median imputation then standardization statistics") {
        const RawTable t = make_table({{"v", ColumnKind::kNumeric, {}}, {"y", ColumnKind::kCategorical, {}}}, "y",
                                      {{"1", "a"}, {"", "a"}, {"3", "b"}});
        const PreprocessModel model = fit_preprocessor(t, all_rows(t));
        const NumericStats& st = model.numeric.at("v");
        CHECK(st.median == 2.0);  // median of {1, 3}
        CHECK(st.mean == 2.0);    // mean over imputed {1, 2, 3}
        CHECK_THAT(st.stddev, Catch::Matchers::WithinAbs(std::sqrt(2.0 / 3.0), 1e-12));
    }
    SECTION("categorical list keeps first-appearance order plus the missing token") {
        const RawTable t = make_table({{"c", ColumnKind::kCategorical, {}}, {"y", ColumnKind::kCategorical, {}}}, "y",
                                      {{"a", "0"}, {"b", "0"}, {"", "1"}});
        const PreprocessModel model = fit_preprocessor(t, all_rows(t));
        const CategoricalStats& st = model.categorical.at("c");
        REQUIRE(st.categories.size() == 3);
        CHECK(st.categories[0] == "a");
        CHECK(st.categories[1] == "b");
        CHECK(st.categories[2] == kMissingToken);
    }
    SECTION("constant numeric column standardizes to zero") {
        const RawTable t = make_table({{"v", ColumnKind::kNumeric, {}}, {"y", ColumnKind::kCategorical, {}}}, "y",
                                      {{"5", "0"}, {"5", "1"}, {"5", "0"}});
        const PreprocessModel model = fit_preprocessor(t, all_rows(t));
        CHECK(model.numeric.at("v").zero_variance);
        const auto [x, y] = transform(model, t, all_rows(t));
        for (std::size_t i = 0; i < 3; ++i) CHECK(x(i, 0) == 0.0);
    }
    SECTION("an all-missing numeric column imputes zero and records a warning") {
        const RawTable t = make_table({{"v", ColumnKind::kNumeric, {}}, {"y", ColumnKind::kCategorical, {}}}, "y",
                                      {{"", "0"}, {"?", "1"}});
        const PreprocessModel model = fit_preprocessor(t, all_rows(t));
        CHECK(model.numeric.at("v").median == 0.0);
        REQUIRE(model.warnings.size() == 1);
        CHECK(model.warnings[0].find("'v'") != std::string::npos);
    }
}

TEST_CASE("transform") {
    const RawTable t = make_table(
        {{"v", ColumnKind::kNumeric, {}}, {"c", ColumnKind::kCategorical, {}}, {"y", ColumnKind::kCategorical, {}}},
        "y",
        {{"1.0", "red", "no"}, {"2.0", "green", "yes"}, {"3.0", "red", "no"}, {"4.0", "green", "yes"}});
    const PreprocessModel model = fit_preprocessor(t, all_rows(t));

    SECTION("a value equal to the fitted mean standardizes to zero") {
        const auto [x, y] = transform(model, t, all_rows(t));
        // mean of {1,2,3,4} is 2.5; no row hits it, but the identity holds:
        const NumericStats& st = model.numeric.at("v");
        CHECK_THAT(st.mean, Catch::Matchers::WithinAbs(2.5, 1e-15));
        RawTable probe = t;
        probe.rows = {{"2.5", "red", "no"}};
        const auto [xp, yp] = transform(model, probe, {0});
        CHECK(xp(0, 0) == 0.0);
    }
    SECTION("one-hot layout and label mapping") {
        const auto [x, y] = transform(model, t, all_rows(t));
        REQUIRE(x.cols == 1 + 3);  // numeric + {red, green, <missing>}
        CHECK(x(0, 1) == 1.0);     // red
        CHECK(x(1, 2) == 1.0);     // green
        CHECK(y == std::vector<int>{0, 1, 0, 1});
    }
    SECTION("unseen category maps to an all-zero block") {
        RawTable probe = t;
        probe.rows = {{"1.0", "blue", "no"}};
        const auto [x, y] = transform(model, probe, {0});
        CHECK(x(0, 1) == 0.0);
        CHECK(x(0, 2) == 0.0);
        CHECK(x(0, 3) == 0.0);
    }
    SECTION("missing category maps to the reserved slot") {
        RawTable probe = t;
        probe.rows = {{"1.0", "", "no"}};
        const auto [x, y] = transform(model, probe, {0});
        CHECK(x(0, 3) == 1.0);
    }
    SECTION("unseen label value is an error: the class set is fixed") {
        RawTable probe = t;
        probe.rows = {{"1.0", "red", "maybe"}};
        CHECK_THROWS_AS(transform(model, probe, {0}), data_error);
    }
    SECTION("round trip: fitted rows standardize to mean 0, stddev 1") {
        const auto [x, y] = transform(model, t, all_rows(t));
        double mean = 0.0;
        for (std::size_t i = 0; i < 4; ++i) mean += x(i, 0);
        mean /= 4.0;
        double ss = 0.0;
        for (std::size_t i = 0; i < 4; ++i) ss += (x(i, 0) - mean) * (x(i, 0) - mean);
        const double stddev = std::sqrt(ss / 4.0);
        CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.0, 1e-9));
        CHECK_THAT(stddev, Catch::Matchers::WithinAbs(1.0, 1e-9));
    }
}

TEST_CASE("stratified_split") {
    SECTION("100 rows at 60/40 allocate 51/34 train and 9/6 test") {
        std::vector<int> labels;
        for (int i = 0; i < 60; ++i) labels.push_back(0);
        for (int i = 0; i < 40; ++i) labels.push_back(1);
        const SplitIndices split = stratified_split(labels, 0.85, 7);
        std::size_t train0 = 0, train1 = 0, test0 = 0, test1 = 0;
        for (std::size_t i : split.train) (labels[i] == 0 ? train0 : train1) += 1;
        for (std::size_t i : split.test) (labels[i] == 0 ? test0 : test1) += 1;
        CHECK(train0 == 51);
        CHECK(train1 == 34);
        CHECK(test0 == 9);
        CHECK(test1 == 6);
    }
    SECTION("two singleton classes land one per side") {
        const SplitIndices split = stratified_split({0, 1}, 0.85, 7);
        REQUIRE(split.train.size() == 1);
        REQUIRE(split.test.size() == 1);
        CHECK(split.train[0] != split.test[0]);
    }
    SECTION("single-row segments are degenerate") {
        CHECK_THROWS_AS(stratified_split({0}, 0.85, 7), data_error);
    }
    SECTION("same seed reproduces, different seed keeps class counts") {
        std::vector<int> labels;
        for (int i = 0; i < 300; ++i) labels.push_back(i % 3);
        const SplitIndices a = stratified_split(labels, 0.85, 7);
        const SplitIndices b = stratified_split(labels, 0.85, 7);
        const SplitIndices c = stratified_split(labels, 0.85, 8);
        CHECK(a.train == b.train);
        CHECK(a.test == b.test);
        CHECK(a.train != c.train);  // membership moves with the seed
        std::map<int, std::size_t> count_a, count_c;
        for (std::size_t i : a.train) count_a[labels[i]] += 1;
        for (std::size_t i : c.train) count_c[labels[i]] += 1;
        CHECK(count_a == count_c);  // class counts do not
    }
    SECTION("train and test partition the segment") {
        std::vector<int> labels;
        for (int i = 0; i < 97; ++i) labels.push_back(i % 2);
        const SplitIndices split = stratified_split(labels, 0.85, 11);
        std::set<std::size_t> seen;
        for (std::size_t i : split.train) seen.insert(i);
        for (std::size_t i : split.test) seen.insert(i);
        CHECK(seen.size() == 97);
        CHECK(split.train.size() + split.test.size() == 97);
    }
    SECTION("per-class train share stays within one row of the fraction") {
        Rng rng(202);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<int> labels;
            const std::size_t n_classes = 2 + rng.below(4);
            const std::size_t n = 10 + rng.below(400);
            for (std::size_t i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.below(n_classes)));
            std::map<int, std::size_t> totals;
            for (int y : labels) totals[y] += 1;
            if (totals.size() < 2) continue;
            const SplitIndices split = stratified_split(labels, 0.85, trial);
            std::map<int, std::size_t> train_counts;
            for (std::size_t i : split.train) train_counts[labels[i]] += 1;
            for (const auto& [cls, total] : totals) {
                const double share = static_cast<double>(train_counts[cls]) / static_cast<double>(total);
                CHECK(std::fabs(share - 0.85) <= 1.0 / static_cast<double>(total) + 1e-12);
            }
        }
    }
}
