#pragma once

// Cross-model comparison machinery: Pareto front extraction and the
// Friedman / Wilcoxon-Holm / Nemenyi test battery over a complete
// datasets x algorithms results matrix.
//
// The chi-square tail probability is computed from the regularized
// incomplete gamma function (series + continued fraction), so the module
// has no numerical dependencies.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "imlp/common.hpp"

namespace imlp {

// ---------------------------------------------------------------------------
// Pareto front

/// One candidate: performance is maximized, energy minimized.
struct TradeoffPoint {
    double performance = 0.0;
    double energy = 0.0;
    std::string label;
};

inline bool dominates(const TradeoffPoint& a, const TradeoffPoint& b) {
    return a.performance >= b.performance && a.energy <= b.energy &&
           (a.performance > b.performance || a.energy < b.energy);
}

/// Exactly the non-dominated points, ascending energy. Duplicate points
/// (identical performance and energy) are all retained: neither dominates
/// the other because no inequality is strict.
inline std::vector<TradeoffPoint> pareto_front(const std::vector<TradeoffPoint>& points) {
    if (points.empty()) return {};
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (points[a].energy != points[b].energy) return points[a].energy < points[b].energy;
        if (points[a].performance != points[b].performance) return points[a].performance > points[b].performance;
        return a < b;
    });

    std::vector<TradeoffPoint> front;
    double best_p_lower_energy = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && points[order[j]].energy == points[order[i]].energy) ++j;
        const double group_max_p = points[order[i]].performance;  // sorted descending within the group
        for (std::size_t g = i; g < j; ++g) {
            const TradeoffPoint& pt = points[order[g]];
            if (pt.performance == group_max_p && pt.performance > best_p_lower_energy) front.push_back(pt);
        }
        best_p_lower_energy = std::max(best_p_lower_energy, group_max_p);
        i = j;
    }
    return front;
}

// ---------------------------------------------------------------------------
// Results matrix

/// Complete N x k block of one metric: datasets on rows, algorithms on
/// columns. The rank tests require no missing cells.
struct ResultsMatrix {
    std::vector<std::string> datasets;    // N row labels
    std::vector<std::string> algorithms;  // k column labels
    std::vector<double> values;           // row-major N x k

    std::size_t n_datasets() const { return datasets.size(); }
    std::size_t n_algorithms() const { return algorithms.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row * algorithms.size() + col]; }

    void validate() const {
        if (values.size() != datasets.size() * algorithms.size())
            throw stats_error("ResultsMatrix: cell count does not match labels");
        for (double v : values)
            if (!std::isfinite(v)) throw stats_error("ResultsMatrix: non-finite cell");
    }
};

namespace detail {

/// Ranks with mid-rank averaging for ties; rank 1 is the best value.
inline std::vector<double> rank_row(const std::vector<double>& vals, bool higher_is_better) {
    const std::size_t k = vals.size();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return higher_is_better ? vals[a] > vals[b] : vals[a] < vals[b];
    });
    std::vector<double> ranks(k, 0.0);
    std::size_t i = 0;
    while (i < k) {
        std::size_t j = i;
        while (j < k && vals[order[j]] == vals[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of positions i+1 .. j
        for (std::size_t g = i; g < j; ++g) ranks[order[g]] = mid;
        i = j;
    }
    return ranks;
}

/// Regularized upper incomplete gamma Q(a, x), series / continued fraction.
inline double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw stats_error("gamma_q: requires a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) {
        // lower series, Q = 1 - P
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 10000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
        }
        return 1.0 - sum * std::exp(log_prefactor);
    }
    // continued fraction (modified Lentz)
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return std::exp(log_prefactor) * h;
}

inline double chi2_survival(double x, std::size_t df) {
    return gamma_q(0.5 * static_cast<double>(df), 0.5 * x);
}

inline double normal_two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Friedman test

struct FriedmanResult {
    double chi2 = 0.0;
    double p_value = 1.0;
    std::vector<double> avg_ranks;  // per algorithm, order as in the matrix
};

/// Rank-based test that the k algorithms perform equally across N datasets.
inline FriedmanResult friedman_test(const ResultsMatrix& m, bool higher_is_better) {
    m.validate();
    const std::size_t n = m.n_datasets();
    const std::size_t k = m.n_algorithms();
    if (k < 3)
        throw stats_error("friedman_test: needs at least 3 algorithms; use the pairwise signed-rank test for 2");
    if (n < 2) throw stats_error("friedman_test: needs at least 2 datasets");

    std::vector<double> rank_sum(k, 0.0);
    std::vector<double> row(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) row[j] = m.at(i, j);
        const std::vector<double> ranks = detail::rank_row(row, higher_is_better);
        for (std::size_t j = 0; j < k; ++j) rank_sum[j] += ranks[j];
    }

    FriedmanResult out;
    out.avg_ranks.resize(k);
    double sum_r2 = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        out.avg_ranks[j] = rank_sum[j] / static_cast<double>(n);
        sum_r2 += out.avg_ranks[j] * out.avg_ranks[j];
    }
    const double kd = static_cast<double>(k);
    const double nd = static_cast<double>(n);
    out.chi2 = (12.0 * nd / (kd * (kd + 1.0))) * (sum_r2 - kd * (kd + 1.0) * (kd + 1.0) / 4.0);
    if (out.chi2 < 0.0) out.chi2 = 0.0;  // guard against roundoff on full ties
    out.p_value = detail::chi2_survival(out.chi2, k - 1);
    return out;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank with Holm step-down correction

struct WilcoxonComparison {
    std::string algorithm;         // compared against the control
    double w_plus = 0.0;           // sum of ranks of positive differences
    std::size_t n_used = 0;        // pairs after dropping zero differences
    std::size_t zeros_dropped = 0;
    bool degenerate = false;       // all differences were zero
    bool exact = false;            // exact enumeration vs normal approximation
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    bool reject = false;
};

namespace detail {

constexpr std::size_t kWilcoxonExactLimit = 25;

/// Two-sided signed-rank p-value for differences d (zeros already removed).
/// Exact null enumeration up to kWilcoxonExactLimit pairs, otherwise the
/// normal approximation with tie correction and 0.5 continuity correction.
inline void wilcoxon_p_value(const std::vector<double>& d, WilcoxonComparison& out) {
    const std::size_t n = d.size();
    out.n_used = n;
    if (n == 0) {
        out.degenerate = true;
        out.p_raw = 1.0;
        return;
    }
    std::vector<double> abs_d(n);
    for (std::size_t i = 0; i < n; ++i) abs_d[i] = std::fabs(d[i]);
    const std::vector<double> ranks = rank_row(abs_d, /*higher_is_better=*/false);  // rank 1 = smallest |d|

    double w_plus = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (d[i] > 0.0) w_plus += ranks[i];
    out.w_plus = w_plus;

    if (n <= kWilcoxonExactLimit) {
        out.exact = true;
        // Doubled mid-ranks are integers; count sign assignments by their
        // doubled rank sum.
        std::vector<long> doubled(n);
        long total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            doubled[i] = std::lround(2.0 * ranks[i]);
            total += doubled[i];
        }
        std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
        ways[0] = 1.0;
        long reach = 0;
        for (std::size_t i = 0; i < n; ++i) {
            reach += doubled[i];
            for (long s = reach; s >= doubled[i]; --s)
                ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - doubled[i])];
        }
        const double denom = std::pow(2.0, static_cast<double>(n));
        const long w2 = std::lround(2.0 * w_plus);
        double cdf = 0.0, sf = 0.0;
        for (long s = 0; s <= total; ++s) {
            if (s <= w2) cdf += ways[static_cast<std::size_t>(s)];
            if (s >= w2) sf += ways[static_cast<std::size_t>(s)];
        }
        out.p_raw = std::min(1.0, 2.0 * std::min(cdf, sf) / denom);
    } else {
        out.exact = false;
        const double nd = static_cast<double>(n);
        const double mean = nd * (nd + 1.0) / 4.0;
        double tie_term = 0.0;
        std::size_t i = 0;
        std::vector<double> sorted_abs = abs_d;
        std::sort(sorted_abs.begin(), sorted_abs.end());
        while (i < n) {
            std::size_t j = i;
            while (j < n && sorted_abs[j] == sorted_abs[i]) ++j;
            const double tcount = static_cast<double>(j - i);
            tie_term += tcount * tcount * tcount - tcount;
            i = j;
        }
        const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
        if (var <= 0.0) {
            out.degenerate = true;
            out.p_raw = 1.0;
            return;
        }
        const double diff = w_plus - mean;
        const double cc = diff > 0.0 ? -0.5 : (diff < 0.0 ? 0.5 : 0.0);
        const double z = (diff + cc) / std::sqrt(var);
        out.p_raw = normal_two_sided_p(z);
    }
}

}  // namespace detail

/// Holm step-down adjustment: order raw p ascending, adjusted p_i is the
/// running maximum of (m - j + 1) * p_j, clipped to 1.
inline std::vector<double> holm_adjust(const std::vector<double>& raw) {
    const std::size_t m = raw.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
    std::vector<double> adjusted(m, 0.0);
    double running = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double scaled = static_cast<double>(m - i) * raw[order[i]];
        running = std::max(running, scaled);
        adjusted[order[i]] = std::min(1.0, running);
    }
    return adjusted;
}

/// Signed-rank tests of every algorithm against the control column, with
/// Holm-adjusted two-sided p-values.
inline std::vector<WilcoxonComparison> wilcoxon_holm(const ResultsMatrix& m, const std::string& control,
                                                     double alpha = 0.05) {
    m.validate();
    const auto it = std::find(m.algorithms.begin(), m.algorithms.end(), control);
    if (it == m.algorithms.end()) throw stats_error("wilcoxon_holm: unknown control algorithm '" + control + "'");
    const std::size_t ctrl = static_cast<std::size_t>(it - m.algorithms.begin());

    std::vector<WilcoxonComparison> comparisons;
    for (std::size_t j = 0; j < m.n_algorithms(); ++j) {
        if (j == ctrl) continue;
        WilcoxonComparison cmp;
        cmp.algorithm = m.algorithms[j];
        std::vector<double> diffs;
        diffs.reserve(m.n_datasets());
        std::size_t zeros = 0;
        for (std::size_t i = 0; i < m.n_datasets(); ++i) {
            const double d = m.at(i, ctrl) - m.at(i, j);
            if (d == 0.0)
                ++zeros;
            else
                diffs.push_back(d);
        }
        cmp.zeros_dropped = zeros;
        detail::wilcoxon_p_value(diffs, cmp);
        comparisons.push_back(std::move(cmp));
    }

    std::vector<double> raw(comparisons.size());
    for (std::size_t i = 0; i < comparisons.size(); ++i) raw[i] = comparisons[i].p_raw;
    const std::vector<double> adj = holm_adjust(raw);
    for (std::size_t i = 0; i < comparisons.size(); ++i) {
        comparisons[i].p_adjusted = adj[i];
        comparisons[i].reject = adj[i] < alpha;
    }
    return comparisons;
}

// ---------------------------------------------------------------------------
// Nemenyi critical difference

/// Critical difference q_alpha * sqrt(k(k+1) / (6N)). The q constants are
/// the standard studentized-range-based reference values for average-rank
/// comparisons, tabulated for k = 2..20 at alpha in {0.05, 0.10}; they are
/// external reference constants, not derived here.
inline double nemenyi_cd(std::size_t k, std::size_t n_datasets, double alpha = 0.05) {
    static const double q05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219,
                                 3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544};
    static const double q10[] = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978,
                                 3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319};
    if (k < 2 || k > 20) throw stats_error("nemenyi_cd: k must be within [2, 20]");
    if (n_datasets < 1) throw stats_error("nemenyi_cd: needs at least one dataset");
    const double* table = nullptr;
    if (alpha == 0.05)
        table = q05;
    else if (alpha == 0.10)
        table = q10;
    else
        throw stats_error("nemenyi_cd: alpha must be 0.05 or 0.10");
    const double q = table[k - 2];
    const double kd = static_cast<double>(k);
    return q * std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n_datasets)));
}

}  // namespace imlp
