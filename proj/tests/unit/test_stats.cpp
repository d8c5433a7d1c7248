#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "imlp/stats.hpp"
#include "test_support.hpp"

using namespace imlp;

namespace {

/// Exhaustive O(n^2) domination oracle.
std::vector<TradeoffPoint> pareto_oracle(const std::vector<TradeoffPoint>& points) {
    std::vector<TradeoffPoint> front;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < points.size() && !dominated; ++j)
            if (j != i && dominates(points[j], points[i])) dominated = true;
        if (!dominated) front.push_back(points[i]);
    }
    return front;
}

std::multiset<std::pair<double, double>> as_multiset(const std::vector<TradeoffPoint>& pts) {
    std::multiset<std::pair<double, double>> out;
    for (const auto& p : pts) out.insert({p.performance, p.energy});
    return out;
}

ResultsMatrix make_matrix(std::vector<std::string> algorithms, std::vector<std::vector<double>> rows) {
    ResultsMatrix m;
    m.algorithms = std::move(algorithms);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.datasets.push_back("d" + std::to_string(i));
        for (double v : rows[i]) m.values.push_back(v);
    }
    m.validate();
    return m;
}

}  // namespace

TEST_CASE("pareto_front") {
    SECTION("worked three-point example") {
        const std::vector<TradeoffPoint> pts{{0.9, 100, "a"}, {0.8, 50, "b"}, {0.85, 120, "c"}};
        const auto front = pareto_front(pts);
        REQUIRE(front.size() == 2);
        CHECK(front[0].label == "b");  // ascending energy
        CHECK(front[1].label == "a");
    }
    SECTION("single point is its own front") {
        const auto front = pareto_front({{0.5, 10, "only"}});
        REQUIRE(front.size() == 1);
        CHECK(front[0].label == "only");
    }
    SECTION("identical points are all retained") {
        const auto front = pareto_front({{0.5, 10, "x"}, {0.5, 10, "y"}});
        CHECK(front.size() == 2);
    }
    SECTION("equal energy, different performance keeps only the better point") {
        const auto front = pareto_front({{0.5, 10, "lo"}, {0.7, 10, "hi"}});
        REQUIRE(front.size() == 1);
        CHECK(front[0].label == "hi");
    }
    SECTION("matches the exhaustive oracle on 200 random sets") {
        Rng rng(401);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 1 + rng.below(50);
            std::vector<TradeoffPoint> pts;
            for (std::size_t i = 0; i < n; ++i) {
                // coarse grids make ties and duplicates common
                TradeoffPoint p;
                p.performance = static_cast<double>(rng.below(8)) / 8.0;
                p.energy = static_cast<double>(rng.below(10)) * 10.0;
                p.label = "p" + std::to_string(i);
                pts.push_back(p);
            }
            const auto fast = pareto_front(pts);
            const auto slow = pareto_oracle(pts);
            CHECK(as_multiset(fast) == as_multiset(slow));
            // ascending energy, no mutual domination
            for (std::size_t i = 1; i < fast.size(); ++i) CHECK(fast[i - 1].energy <= fast[i].energy);
            for (std::size_t i = 0; i < fast.size(); ++i)
                for (std::size_t j = 0; j < fast.size(); ++j)
                    if (i != j) CHECK_FALSE(dominates(fast[i], fast[j]));
            // every excluded point is dominated by some front member
            const auto front_set = as_multiset(fast);
            for (const auto& p : pts) {
                if (front_set.count({p.performance, p.energy})) continue;
                bool covered = false;
                for (const auto& f : fast) covered = covered || dominates(f, p);
                CHECK(covered);
            }
        }
    }
}

TEST_CASE("friedman_test") {
    SECTION("identical algorithms give mid ranks and a zero statistic") {
        const ResultsMatrix m = make_matrix({"a", "b", "c"}, {{1, 1, 1}, {2, 2, 2}, {3, 3, 3}});
        const FriedmanResult fr = friedman_test(m, true);
        CHECK(fr.chi2 == 0.0);
        for (double r : fr.avg_ranks) CHECK_THAT(r, Catch::Matchers::WithinAbs(2.0, 1e-15));
        CHECK_THAT(fr.p_value, Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("two datasets, three algorithms, the same strict order") {
        const ResultsMatrix m = make_matrix({"a", "b", "c"}, {{3, 2, 1}, {30, 20, 10}});
        const FriedmanResult fr = friedman_test(m, true);
        CHECK_THAT(fr.avg_ranks[0], Catch::Matchers::WithinAbs(1.0, 1e-15));
        CHECK_THAT(fr.avg_ranks[1], Catch::Matchers::WithinAbs(2.0, 1e-15));
        CHECK_THAT(fr.avg_ranks[2], Catch::Matchers::WithinAbs(3.0, 1e-15));
        CHECK_THAT(fr.chi2, Catch::Matchers::WithinAbs(4.0, 1e-12));  // the maximum N(k-1)
        CHECK_THAT(fr.p_value, Catch::Matchers::WithinAbs(std::exp(-2.0), 1e-10));
    }
    SECTION("direction flag flips the ranks") {
        const ResultsMatrix m = make_matrix({"a", "b", "c"}, {{3, 2, 1}, {30, 20, 10}});
        const FriedmanResult fr = friedman_test(m, false);
        CHECK_THAT(fr.avg_ranks[0], Catch::Matchers::WithinAbs(3.0, 1e-15));
        CHECK_THAT(fr.avg_ranks[2], Catch::Matchers::WithinAbs(1.0, 1e-15));
    }
    SECTION("fewer than three algorithms is a precondition failure") {
        const ResultsMatrix m = make_matrix({"a", "b"}, {{1, 2}, {2, 1}});
        CHECK_THROWS_AS(friedman_test(m, true), stats_error);
    }
    SECTION("invariant under per-row monotone transforms, bounded by N(k-1)") {
        Rng rng(402);
        for (int trial = 0; trial < 30; ++trial) {
            const std::size_t n = 2 + rng.below(10), k = 3 + rng.below(5);
            ResultsMatrix m;
            for (std::size_t j = 0; j < k; ++j) m.algorithms.push_back("a" + std::to_string(j));
            for (std::size_t i = 0; i < n; ++i) {
                m.datasets.push_back("d" + std::to_string(i));
                for (std::size_t j = 0; j < k; ++j) m.values.push_back(rng.uniform(-3, 3));
            }
            ResultsMatrix transformed = m;
            for (double& v : transformed.values) v = std::exp(0.5 * v) + v * v * v;  // strictly increasing
            const FriedmanResult fr = friedman_test(m, true);
            const FriedmanResult ft = friedman_test(transformed, true);
            CHECK_THAT(fr.chi2, Catch::Matchers::WithinAbs(ft.chi2, 1e-9));
            CHECK(fr.chi2 >= 0.0);
            CHECK(fr.chi2 <= static_cast<double>(n * (k - 1)) + 1e-9);
        }
    }
}

TEST_CASE("chi-square survival function") {
    // df=2 closed form: exp(-x/2)
    CHECK_THAT(detail::chi2_survival(4.0, 2), Catch::Matchers::WithinAbs(std::exp(-2.0), 1e-12));
    // df=1 closed form: erfc(sqrt(x/2))
    CHECK_THAT(detail::chi2_survival(1.0, 1), Catch::Matchers::WithinAbs(std::erfc(std::sqrt(0.5)), 1e-10));
    CHECK_THAT(detail::chi2_survival(7.5, 3), Catch::Matchers::WithinAbs(0.0575584519726364, 1e-10));
    CHECK(detail::chi2_survival(0.0, 4) == 1.0);
}

TEST_CASE("wilcoxon_holm") {
    SECTION("identical columns are degenerate with p = 1") {
        const ResultsMatrix m = make_matrix({"ctrl", "same"}, {{1, 1}, {2, 2}, {3, 3}});
        const auto cmps = wilcoxon_holm(m, "ctrl");
        REQUIRE(cmps.size() == 1);
        CHECK(cmps[0].degenerate);
        CHECK(cmps[0].p_raw == 1.0);
        CHECK(cmps[0].zeros_dropped == 3);
    }
    SECTION("six same-sign differences give the exact two-sided 2/64") {
        ResultsMatrix m;
        m.algorithms = {"ctrl", "worse"};
        for (int i = 1; i <= 6; ++i) {
            m.datasets.push_back("d" + std::to_string(i));
            m.values.push_back(static_cast<double>(i));  // ctrl - worse = i
            m.values.push_back(0.0);
        }
        const auto cmps = wilcoxon_holm(m, "ctrl");
        REQUIRE(cmps.size() == 1);
        CHECK(cmps[0].exact);
        CHECK(cmps[0].w_plus == 21.0);
        CHECK(cmps[0].p_raw == 0.03125);
    }
    SECTION("exact path handles tied absolute differences") {
        ResultsMatrix m;
        m.algorithms = {"ctrl", "other"};
        const double diffs[] = {1, 1, -1, 2, 2, 3};
        for (int i = 0; i < 6; ++i) {
            m.datasets.push_back("d" + std::to_string(i));
            m.values.push_back(diffs[i]);
            m.values.push_back(0.0);
        }
        const auto cmps = wilcoxon_holm(m, "ctrl");
        CHECK(cmps[0].exact);
        CHECK(cmps[0].p_raw > 0.0);
        CHECK(cmps[0].p_raw <= 1.0);
    }
    SECTION("large samples switch to the normal approximation") {
        Rng rng(403);
        ResultsMatrix m;
        m.algorithms = {"ctrl", "other"};
        for (int i = 0; i < 30; ++i) {
            m.datasets.push_back("d" + std::to_string(i));
            const double v = rng.uniform(-1, 1);
            m.values.push_back(v + 0.3);
            m.values.push_back(v);
        }
        const auto cmps = wilcoxon_holm(m, "ctrl");
        CHECK_FALSE(cmps[0].exact);
        CHECK(cmps[0].p_raw > 0.0);
        CHECK(cmps[0].p_raw < 0.05);  // consistent positive shift must be detected
    }
    SECTION("unknown control is rejected") {
        const ResultsMatrix m = make_matrix({"a", "b"}, {{1, 2}, {2, 1}});
        CHECK_THROWS_AS(wilcoxon_holm(m, "nope"), stats_error);
    }
}

TEST_CASE("holm_adjust") {
    SECTION("worked step-down example") {
        const auto adj = holm_adjust({0.01, 0.04});
        CHECK_THAT(adj[0], Catch::Matchers::WithinAbs(0.02, 1e-15));
        CHECK_THAT(adj[1], Catch::Matchers::WithinAbs(0.04, 1e-15));
    }
    SECTION("adjusted values are monotone in the ordered sequence and never below raw") {
        Rng rng(404);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> raw;
            for (int i = 0; i < 8; ++i) raw.push_back(rng.uniform(0.0, 1.0));
            const auto adj = holm_adjust(raw);
            for (std::size_t i = 0; i < raw.size(); ++i) {
                CHECK(adj[i] >= raw[i]);
                CHECK(adj[i] <= 1.0);
            }
            std::vector<std::size_t> order(raw.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
            for (std::size_t i = 1; i < order.size(); ++i) CHECK(adj[order[i]] >= adj[order[i - 1]]);
        }
    }
}

TEST_CASE("nemenyi_cd") {
    SECTION("k=2 collapses to 1.96 over root N") {
        for (std::size_t n : {4u, 9u, 25u, 100u})
            CHECK_THAT(nemenyi_cd(2, n, 0.05),
                       Catch::Matchers::WithinAbs(1.960 / std::sqrt(static_cast<double>(n)), 1e-12));
    }
    SECTION("worked value for k=3, N=36") {
        CHECK_THAT(nemenyi_cd(3, 36, 0.05), Catch::Matchers::WithinAbs(0.5523, 1e-3));
    }
    SECTION("shrinks monotonically with more datasets") {
        double prev = nemenyi_cd(5, 2, 0.05);
        for (std::size_t n = 4; n <= 4096; n *= 2) {
            const double cd = nemenyi_cd(5, n, 0.05);
            CHECK(cd < prev);
            prev = cd;
        }
        CHECK(prev < 0.1);
    }
    SECTION("the 0.10 table sits below the 0.05 table") {
        for (std::size_t k = 2; k <= 20; ++k) CHECK(nemenyi_cd(k, 36, 0.10) < nemenyi_cd(k, 36, 0.05));
    }
    SECTION("unsupported k or alpha is a range error") {
        CHECK_THROWS_AS(nemenyi_cd(1, 10, 0.05), stats_error);
        CHECK_THROWS_AS(nemenyi_cd(21, 10, 0.05), stats_error);
        CHECK_THROWS_AS(nemenyi_cd(3, 10, 0.01), stats_error);
    }
}
