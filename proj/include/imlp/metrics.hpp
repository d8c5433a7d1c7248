#pragma once

// Performance metrics, energy accounting, and the NetScore-T trade-off
// metric.
//
// Energy comes from one of three providers: integration of a recorded power
// trace, a FLOPs proxy (counted operations times a joules-per-FLOP
// constant), or a constant-power model. The joules-per-FLOP default is an
// order-of-magnitude placeholder, not a physical calibration; cross-mode
// comparisons stay meaningful because every mode in a comparison uses the
// same constant.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include "imlp/common.hpp"
#include "imlp/matrix.hpp"

namespace imlp {

/// Mean per-class recall over the classes present in y_true. Classes that
/// never occur in y_true are excluded from the mean rather than counted as
/// zero recall, so small evaluation slices are not silently punished.
inline double balanced_accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                std::size_t n_classes) {
    if (y_true.empty() || y_true.size() != y_pred.size())
        throw data_error("balanced_accuracy: inputs must be nonempty and of equal length");
    std::vector<std::uint64_t> count(n_classes, 0), correct(n_classes, 0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int y = y_true[i];
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
            throw data_error("balanced_accuracy: label outside [0, n_classes)");
        count[static_cast<std::size_t>(y)] += 1;
        if (y_pred[i] == y) correct[static_cast<std::size_t>(y)] += 1;
    }
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (count[c] == 0) continue;
        sum += static_cast<double>(correct[c]) / static_cast<double>(count[c]);
        present += 1;
    }
    if (present == 0) throw data_error("balanced_accuracy: no class present");
    return sum / static_cast<double>(present);
}

/// Mean of -log(p[i, y_i]) with probabilities clipped at clip_eps.
inline double log_loss(const std::vector<int>& y_true, const Matrix& probs, double clip_eps = 1e-15) {
    if (y_true.size() != probs.rows) throw shape_error("log_loss: label count != probability rows");
    if (y_true.empty()) throw data_error("log_loss: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int y = y_true[i];
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols)
            throw data_error("log_loss: label outside probability columns");
        sum -= std::log(std::max(probs(i, static_cast<std::size_t>(y)), clip_eps));
    }
    return sum / static_cast<double>(y_true.size());
}

/// Ordered (timestamp, watts) samples from a power meter log.
struct PowerTrace {
    struct Sample {
        double t_s = 0.0;
        double watts = 0.0;
    };
    std::vector<Sample> samples;

    void validate() const {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (samples[i].watts < 0.0) throw data_error("PowerTrace: negative power at sample " + std::to_string(i));
            if (i > 0 && samples[i].t_s <= samples[i - 1].t_s)
                throw data_error("PowerTrace: timestamps not strictly increasing at sample " + std::to_string(i));
        }
    }

    double t_begin() const { return samples.front().t_s; }
    double t_end() const { return samples.back().t_s; }

    /// Linear interpolation inside the sampled range.
    double power_at(double t) const {
        const auto it = std::lower_bound(samples.begin(), samples.end(), t,
                                         [](const Sample& s, double v) { return s.t_s < v; });
        if (it == samples.begin()) return it->watts;
        if (it == samples.end()) return samples.back().watts;
        const Sample& hi = *it;
        const Sample& lo = *(it - 1);
        const double f = (t - lo.t_s) / (hi.t_s - lo.t_s);
        return lo.watts + f * (hi.watts - lo.watts);
    }
};

/// Trapezoidal integration of power over [t_start, t_end], exact for
/// piecewise-linear traces. The window is clamped to the sampled range with
/// boundary interpolation; a window entirely outside the trace is an error.
inline double integrate_energy(const PowerTrace& trace, double t_start, double t_end) {
    if (trace.samples.empty()) throw data_error("integrate_energy: empty power trace");
    if (!(t_start < t_end)) throw data_error("integrate_energy: t_start must precede t_end");
    const double lo = std::max(t_start, trace.t_begin());
    const double hi = std::min(t_end, trace.t_end());
    if (!(lo < hi))
        throw data_error("integrate_energy: window [" + std::to_string(t_start) + ", " + std::to_string(t_end) +
                         "] lies outside the trace");
    double joules = 0.0;
    double prev_t = lo;
    double prev_p = trace.power_at(lo);
    for (const auto& s : trace.samples) {
        if (s.t_s <= lo) continue;
        if (s.t_s >= hi) break;
        joules += 0.5 * (prev_p + s.watts) * (s.t_s - prev_t);
        prev_t = s.t_s;
        prev_p = s.watts;
    }
    joules += 0.5 * (prev_p + trace.power_at(hi)) * (hi - prev_t);
    return joules;
}

inline double estimate_energy_flops(std::uint64_t flops, double joules_per_flop) {
    if (joules_per_flop < 0.0) throw config_error("estimate_energy_flops: joules_per_flop must be >= 0");
    return static_cast<double>(flops) * joules_per_flop;
}

/// Below this energy the score is reported capped: the ratio degenerates as
/// the denominator log10(E+1) approaches zero.
constexpr double kNetscoreEnergyFloorJ = 1e-3;

struct NetScoreValue {
    double value = 0.0;
    bool capped = false;
};

/// Per-segment score P / log10(E + 1), capped at P / log10(1 + floor) for
/// E below the floor (the ratio is undefined at E = 0).
inline NetScoreValue netscore_checked(double performance, double energy_j) {
    if (performance < 0.0) throw data_error("netscore: performance must be >= 0");
    if (energy_j < 0.0) throw data_error("netscore: energy must be >= 0");
    if (energy_j < kNetscoreEnergyFloorJ)
        return {performance / std::log10(1.0 + kNetscoreEnergyFloorJ), true};
    return {performance / std::log10(energy_j + 1.0), false};
}

inline double netscore(double performance, double energy_j) { return netscore_checked(performance, energy_j).value; }

/// Per-segment record produced by a stream run.
struct SegmentResult {
    std::size_t segment = 0;          // t, 0-based
    double balanced_accuracy = 0.0;   // P in [0, 1]
    double log_loss = 0.0;
    double energy_j = 0.0;            // E over the segment's train+inference span
    double wall_time_s = 0.0;         // modeled duration (see EnergyProvider)
    double netscore = 0.0;            // P / log10(E + 1)
    bool netscore_capped = false;

    // instrumentation
    std::uint64_t flops_train = 0;
    std::uint64_t flops_finalize = 0;
    std::uint64_t flops_eval = 0;
    std::uint64_t row_visits_train = 0;

    std::uint64_t flops_total() const { return flops_train + flops_finalize + flops_eval; }
};

/// Stream aggregate: arithmetic mean of the per-segment scores.
inline double netscore_t(const std::vector<SegmentResult>& results) {
    if (results.empty()) throw data_error("netscore_t: empty result list");
    double sum = 0.0;
    for (const auto& r : results) sum += r.netscore;
    return sum / static_cast<double>(results.size());
}

inline double netscore_t_values(const std::vector<double>& per_segment) {
    if (per_segment.empty()) throw data_error("netscore_t: empty score list");
    double sum = 0.0;
    for (double v : per_segment) sum += v;
    return sum / static_cast<double>(per_segment.size());
}

enum class EnergyProviderKind { kTrace, kFlopsProxy, kConstantPower };

/// Converts a segment's counted work into (joules, seconds).
///
/// Durations are modeled from the FLOPs count at a fixed reference
/// throughput rather than measured, so runs with identical configuration
/// reproduce byte-identical reports; measured wall time goes to the progress
/// log instead. Trace mode lays segment intervals onto the trace timeline
/// starting at the trace's first timestamp.
struct EnergyProvider {
    EnergyProviderKind kind = EnergyProviderKind::kFlopsProxy;
    double joules_per_flop = 1e-9;  // placeholder scale, not a hardware constant
    double constant_watts = 30.0;
    double reference_flops_per_second = 1e9;
    PowerTrace trace;

    void validate() const {
        if (joules_per_flop <= 0.0 || constant_watts <= 0.0 || reference_flops_per_second <= 0.0)
            throw config_error("EnergyProvider: rates must be positive");
        if (kind == EnergyProviderKind::kTrace) {
            if (trace.samples.size() < 2) throw data_error("EnergyProvider: trace must hold at least 2 samples");
            trace.validate();
        }
    }

    double duration_s(std::uint64_t flops) const {
        return static_cast<double>(flops) / reference_flops_per_second;
    }

    /// Energy for a segment spanning [t_start, t_start + duration) on the
    /// provider's timeline, where t_start is seconds since run start.
    double energy_j(std::uint64_t flops, double t_start, double duration) const {
        switch (kind) {
            case EnergyProviderKind::kFlopsProxy:
                return estimate_energy_flops(flops, joules_per_flop);
            case EnergyProviderKind::kConstantPower:
                return constant_watts * duration;
            case EnergyProviderKind::kTrace: {
                const double origin = trace.t_begin();
                return integrate_energy(trace, origin + t_start, origin + t_start + duration);
            }
        }
        throw config_error("EnergyProvider: unknown kind");
    }
};

}  // namespace imlp
