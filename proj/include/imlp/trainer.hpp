#pragma once

// Segment-by-segment continual training loop.
//
// Incremental mode trains on the current segment only (multiple epochs,
// minibatch cross-entropy), then enqueues one detached prototype computed in
// a dedicated inference pass over the segment, then evaluates on the
// segment's held-out split. Cumulative-retrain mode is the baseline
// protocol: reinitialize and train from scratch on everything seen so far
// before evaluating the current segment.
//
// Raw rows from earlier segments are never read in incremental mode; the
// optional row probe exists so tests can verify that from the outside.

#include <chrono>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "imlp/common.hpp"
#include "imlp/data.hpp"
#include "imlp/feature_buffer.hpp"
#include "imlp/matrix.hpp"
#include "imlp/metrics.hpp"
#include "imlp/model.hpp"
#include "imlp/optimizer.hpp"

namespace imlp {

enum class StreamMode { kIncremental, kCumulativeRetrain };
enum class ModelKind { kImlp, kPlainMlp };

struct TrainConfig {
    std::size_t epochs_per_segment = 20;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::kAdaptiveMoment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 7;
    StreamMode mode = StreamMode::kIncremental;
    bool shuffle = true;
    std::size_t patience = 0;  // 0 disables validation-loss early stopping
    double divergence_threshold = 1e6;

    void validate() const {
        if (epochs_per_segment < 1) throw config_error("TrainConfig: epochs_per_segment must be >= 1");
        if (batch_size < 1) throw config_error("TrainConfig: batch_size must be >= 1");
        if (!(learning_rate >= 0.0)) throw config_error("TrainConfig: learning_rate must be >= 0");
    }

    OptimizerConfig optimizer_config() const {
        return OptimizerConfig{optimizer, learning_rate, beta1, beta2, epsilon};
    }
};

/// One segment of the stream, already preprocessed and split.
struct SegmentData {
    Matrix x_train;
    std::vector<int> y_train;
    Matrix x_test;
    std::vector<int> y_test;
};

struct TrainStats {
    std::vector<double> epoch_mean_losses;  // row-weighted mean loss per epoch
    std::uint64_t steps = 0;
    std::uint64_t flops = 0;
    std::uint64_t row_visits = 0;
    std::size_t epochs_run = 0;
    bool early_stopped = false;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
    std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    h = (h ^ (stream + 0x517cc1b727220a95ull)) * 0xff51afd7ed558ccdull;
    h = (h ^ (h >> 33) ^ salt) * 0xc4ceb9fe1a85ec53ull;
    return h ^ (h >> 33);
}

inline std::size_t effective_window_fill(const ImlpConfig& cfg, const FeatureBuffer& buffer) {
    return cfg.attention_enabled && !buffer.empty() ? buffer.size() : 0;
}

inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), m.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(idx[i], j);
    return out;
}

template <typename T>
inline std::vector<T> gather(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(v[i]);
    return out;
}

}  // namespace detail

/// Minibatch training on one block of rows. The buffer is read-only here
/// unless the model is configured for per-batch prototype enqueueing.
/// `context` tags error messages (e.g. "segment 3").
inline TrainStats train_segment(ImlpParams& params, OptimizerState& opt_state, FeatureBuffer& buffer,
                                const Matrix& x, const std::vector<int>& y, const ImlpConfig& model_cfg,
                                const TrainConfig& train_cfg, std::uint64_t shuffle_seed,
                                const std::string& context = "",
                                const std::function<void(std::size_t)>& row_probe = nullptr) {
    train_cfg.validate();
    model_cfg.validate();
    if (x.rows == 0) throw data_error("train_segment: empty segment" + (context.empty() ? "" : " (" + context + ")"));
    if (y.size() != x.rows) throw shape_error("train_segment: label count != row count");

    const OptimizerConfig opt_cfg = train_cfg.optimizer_config();
    Rng rng(shuffle_seed);

    // Optional validation carve-out for early stopping (10% of the block).
    std::vector<std::size_t> train_rows(x.rows);
    std::iota(train_rows.begin(), train_rows.end(), 0);
    Matrix x_val;
    std::vector<int> y_val;
    if (train_cfg.patience > 0 && x.rows >= 10) {
        const SplitIndices val_split = stratified_split(y, 0.9, detail::mix_seed(shuffle_seed, 0, 0xa11));
        train_rows = val_split.train;
        x_val = detail::gather_rows(x, val_split.test);
        y_val = detail::gather(y, val_split.test);
    }

    TrainStats stats;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t epochs_since_best = 0;
    std::vector<std::size_t> order = train_rows;

    for (std::size_t epoch = 0; epoch < train_cfg.epochs_per_segment; ++epoch) {
        if (train_cfg.shuffle) rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += train_cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + train_cfg.batch_size);
            const std::vector<std::size_t> batch_rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                      order.begin() + static_cast<std::ptrdiff_t>(stop));
            const Matrix xb = detail::gather_rows(x, batch_rows);
            const std::vector<int> yb = detail::gather(y, batch_rows);
            if (row_probe)
                for (std::size_t r : batch_rows) row_probe(r);

            const ForwardTrace trace = forward(params, model_cfg, xb, buffer);
            ImlpGrads grads;
            const double loss = loss_and_backward(trace, params, model_cfg, yb, grads);
            stats.steps += 1;
            stats.row_visits += batch_rows.size();
            stats.flops += training_flops_per_batch(model_cfg, batch_rows.size(),
                                                    detail::effective_window_fill(model_cfg, buffer));
            if (!std::isfinite(loss) || loss > train_cfg.divergence_threshold)
                throw numeric_error("training diverged" + (context.empty() ? "" : " in " + context) + " at step " +
                                    std::to_string(stats.steps) + " (loss " + std::to_string(loss) + ")");
            apply_gradients(params, opt_state, grads, opt_cfg);
            loss_sum += loss * static_cast<double>(batch_rows.size());

            if (model_cfg.buffer_granularity == BufferGranularity::kBatch)
                buffer.push(segment_prototype(trace.h, model_cfg.normalize_prototypes));
        }
        stats.epoch_mean_losses.push_back(loss_sum / static_cast<double>(order.size()));
        stats.epochs_run = epoch + 1;

        if (train_cfg.patience > 0 && x_val.rows > 0) {
            const ForwardTrace vt = forward(params, model_cfg, x_val, buffer);
            stats.flops += flops_per_batch(model_cfg, x_val.rows, detail::effective_window_fill(model_cfg, buffer));
            const double val_loss = log_loss(y_val, vt.p);
            if (val_loss < best_val_loss) {
                best_val_loss = val_loss;
                epochs_since_best = 0;
            } else if (++epochs_since_best >= train_cfg.patience) {
                stats.early_stopped = true;
                break;
            }
        }
    }
    return stats;
}

/// Dedicated inference pass over the segment's training rows: collect
/// penultimate features, enqueue their (optionally normalized) mean as the
/// segment prototype. No-op under per-batch granularity, where prototypes
/// were already enqueued during training. Returns the FLOPs of the pass.
inline std::uint64_t finalize_segment(const ImlpParams& params, FeatureBuffer& buffer, const Matrix& x_train,
                                      const ImlpConfig& model_cfg) {
    if (model_cfg.buffer_granularity == BufferGranularity::kBatch) return 0;
    if (x_train.rows == 0) throw data_error("finalize_segment: empty segment");
    const std::uint64_t flops =
        flops_per_batch(model_cfg, x_train.rows, detail::effective_window_fill(model_cfg, buffer));
    const Matrix features = penultimate_features(params, model_cfg, x_train, buffer);
    buffer.push(segment_prototype(features, model_cfg.normalize_prototypes));
    return flops;
}

/// Per-segment progress record for the structured log stream. Wall times
/// here are measured; the deterministic report carries modeled durations.
struct SegmentProgress {
    std::size_t segment = 0;
    TrainStats train;
    double measured_train_s = 0.0;
    double measured_total_s = 0.0;
};

struct StreamRunOptions {
    ModelKind kind = ModelKind::kImlp;
    ImlpConfig model;
    TrainConfig train;
    EnergyProvider energy;
    /// Called once per training-row visit with (segment the row came from,
    /// row index within that segment).
    std::function<void(std::size_t, std::size_t)> row_probe;
    std::function<void(const SegmentProgress&)> progress;
};

struct StreamRunResult {
    std::vector<SegmentResult> segments;
    ImlpParams final_params;
    FeatureBuffer final_buffer{1, 1};
    ImlpConfig effective_model;
};

/// Runs the full stream protocol and scores every segment on its held-out
/// split. The per-segment energy spans the segment's training, prototype,
/// and inference work on the provider's timeline.
inline StreamRunResult run_stream(const std::vector<SegmentData>& stream, const StreamRunOptions& options) {
    if (stream.empty()) throw data_error("run_stream: empty stream");
    ImlpConfig cfg = options.model;
    if (options.kind == ModelKind::kPlainMlp) cfg.attention_enabled = false;
    cfg.validate();
    options.train.validate();
    options.energy.validate();
    for (std::size_t t = 0; t < stream.size(); ++t) {
        if (stream[t].x_train.cols != cfg.d_in || stream[t].x_test.cols != cfg.d_in)
            throw shape_error("run_stream: segment " + std::to_string(t) + " feature width != d_in");
    }

    StreamRunResult result;
    result.effective_model = cfg;
    ImlpParams params = init_params(cfg, options.train.seed);
    OptimizerState opt_state = OptimizerState::zeros(cfg);
    FeatureBuffer buffer(cfg.window, cfg.d_h);
    double timeline_cursor_s = 0.0;

    for (std::size_t t = 0; t < stream.size(); ++t) {
        const auto wall_start = std::chrono::steady_clock::now();
        SegmentResult seg;
        seg.segment = t;
        const std::string context = "segment " + std::to_string(t);
        TrainStats train_stats;

        try {
            if (options.train.mode == StreamMode::kIncremental) {
                const std::function<void(std::size_t)> probe =
                    options.row_probe ? [&, t](std::size_t r) { options.row_probe(t, r); }
                                      : std::function<void(std::size_t)>();
                train_stats = train_segment(params, opt_state, buffer, stream[t].x_train, stream[t].y_train, cfg,
                                            options.train, detail::mix_seed(options.train.seed, t, 0x5eed), context,
                                            probe);
                seg.flops_finalize = finalize_segment(params, buffer, stream[t].x_train, cfg);
            } else {
                // retrain from scratch on the concatenation of segments 0..t
                params = init_params(cfg, options.train.seed);
                opt_state = OptimizerState::zeros(cfg);
                buffer.clear();
                std::size_t total_rows = 0;
                for (std::size_t s = 0; s <= t; ++s) total_rows += stream[s].x_train.rows;
                Matrix x_all(total_rows, cfg.d_in);
                std::vector<int> y_all;
                y_all.reserve(total_rows);
                std::vector<std::pair<std::size_t, std::size_t>> provenance;  // (segment, row)
                provenance.reserve(total_rows);
                std::size_t row = 0;
                for (std::size_t s = 0; s <= t; ++s) {
                    for (std::size_t r = 0; r < stream[s].x_train.rows; ++r, ++row) {
                        for (std::size_t j = 0; j < cfg.d_in; ++j) x_all(row, j) = stream[s].x_train(r, j);
                        y_all.push_back(stream[s].y_train[r]);
                        provenance.emplace_back(s, r);
                    }
                }
                const std::function<void(std::size_t)> probe =
                    options.row_probe
                        ? [&](std::size_t r) { options.row_probe(provenance[r].first, provenance[r].second); }
                        : std::function<void(std::size_t)>();
                train_stats = train_segment(params, opt_state, buffer, x_all, y_all, cfg, options.train,
                                            detail::mix_seed(options.train.seed, t, 0x5eed), context, probe);
                seg.flops_finalize = finalize_segment(params, buffer, x_all, cfg);
            }

            // held-out evaluation for this segment
            const std::size_t eval_fill = detail::effective_window_fill(cfg, buffer);
            const auto [classes, probs] = predict(params, cfg, stream[t].x_test, buffer);
            seg.flops_eval = flops_per_batch(cfg, stream[t].x_test.rows, eval_fill);
            seg.balanced_accuracy = balanced_accuracy(stream[t].y_test, classes, cfg.n_classes);
            seg.log_loss = log_loss(stream[t].y_test, probs);
        } catch (const numeric_error& e) {
            throw numeric_error(std::string(e.what()) + " [" + context + "]");
        } catch (const data_error& e) {
            throw data_error(std::string(e.what()) + " [" + context + "]");
        }

        seg.flops_train = train_stats.flops;
        seg.row_visits_train = train_stats.row_visits;
        seg.wall_time_s = options.energy.duration_s(seg.flops_total());
        seg.energy_j = options.energy.energy_j(seg.flops_total(), timeline_cursor_s, seg.wall_time_s);
        timeline_cursor_s += seg.wall_time_s;
        const NetScoreValue ns = netscore_checked(seg.balanced_accuracy, seg.energy_j);
        seg.netscore = ns.value;
        seg.netscore_capped = ns.capped;
        result.segments.push_back(seg);

        if (options.progress) {
            SegmentProgress prog;
            prog.segment = t;
            prog.train = train_stats;
            prog.measured_total_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
            options.progress(prog);
        }
    }

    result.final_params = std::move(params);
    result.final_buffer = std::move(buffer);
    return result;
}

}  // namespace imlp
