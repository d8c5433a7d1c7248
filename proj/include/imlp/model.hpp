#pragma once

// Context-aware incremental MLP.
//
// A compact MLP whose input is augmented with a context vector retrieved by
// windowed scaled dot-product attention over a fixed-size buffer of latent
// prototypes. Values are tied to keys (V = K), so the attention module owns
// only the query and key projections. The attended context is concatenated
// with the raw features and passed through two shared feed-forward layers
// and a linear classifier head.
//
// The backward pass is hand-coded layer by layer; buffer entries are
// constants (no gradient ever reaches them). Finite-difference checks for
// every parameter live in the test suite.

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include "imlp/common.hpp"
#include "imlp/feature_buffer.hpp"
#include "imlp/matrix.hpp"

namespace imlp {

enum class BufferGranularity { kSegment, kBatch };

struct ImlpConfig {
    std::size_t d_in = 0;        // input features after preprocessing
    std::size_t d_h = 256;       // latent width; also the buffer entry dim
    std::size_t d_ff = 512;      // hidden width of the two-layer extractor
    std::size_t n_classes = 0;
    std::size_t window = 8;      // buffer capacity W
    bool attention_enabled = true;
    bool fc2_bias = true;        // second extractor layer carries a bias
    bool normalize_prototypes = true;
    BufferGranularity buffer_granularity = BufferGranularity::kSegment;

    void validate() const {
        if (d_in < 1 || d_h < 1 || d_ff < 1 || n_classes < 1 || window < 1)
            throw config_error("ImlpConfig: all dimensions must be >= 1");
    }
};

/// All learnable tensors. Biases are plain vectors; weights are row-major
/// with fan-in on the row axis, so layers apply as x * W.
struct ImlpParams {
    Matrix w_query;  // d_in x d_h
    Matrix w_key;    // d_h x d_h
    Matrix w1;       // (d_in + d_h) x d_ff
    Vector b1;       // d_ff
    Matrix w2;       // d_ff x d_h
    Vector b2;       // d_h (all zeros when fc2_bias is off)
    Matrix w_cls;    // d_h x n_classes
    Vector b_cls;    // n_classes

    /// Visits every tensor's flat storage in a fixed order.
    template <typename F>
    void for_each_tensor(F&& f) {
        f(w_query.data);
        f(w_key.data);
        f(w1.data);
        f(b1);
        f(w2.data);
        f(b2);
        f(w_cls.data);
        f(b_cls);
    }

    template <typename F>
    void for_each_tensor(F&& f) const {
        f(w_query.data);
        f(w_key.data);
        f(w1.data);
        f(b1);
        f(w2.data);
        f(b2);
        f(w_cls.data);
        f(b_cls);
    }
};

using ImlpGrads = ImlpParams;  // gradient shapes mirror the parameters

inline ImlpParams zero_params_like(const ImlpConfig& cfg) {
    ImlpParams p;
    p.w_query = Matrix(cfg.d_in, cfg.d_h);
    p.w_key = Matrix(cfg.d_h, cfg.d_h);
    p.w1 = Matrix(cfg.d_in + cfg.d_h, cfg.d_ff);
    p.b1 = Vector(cfg.d_ff, 0.0);
    p.w2 = Matrix(cfg.d_ff, cfg.d_h);
    p.b2 = Vector(cfg.d_h, 0.0);
    p.w_cls = Matrix(cfg.d_h, cfg.n_classes);
    p.b_cls = Vector(cfg.n_classes, 0.0);
    return p;
}

namespace detail {

inline void fill_fan_in_uniform(Matrix& m, Rng& rng) {
    // Fan-in scaled uniform with ReLU gain: limit = sqrt(6 / fan_in),
    // giving entry stddev sqrt(2 / fan_in).
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows));
    for (double& v : m.data) v = rng.uniform(-limit, limit);
}

}  // namespace detail

/// Deterministic initialization: weights fan-in-scaled uniform, biases zero.
inline ImlpParams init_params(const ImlpConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ImlpParams p = zero_params_like(cfg);
    Rng rng(seed);
    detail::fill_fan_in_uniform(p.w_query, rng);
    detail::fill_fan_in_uniform(p.w_key, rng);
    detail::fill_fan_in_uniform(p.w1, rng);
    detail::fill_fan_in_uniform(p.w2, rng);
    detail::fill_fan_in_uniform(p.w_cls, rng);
    return p;
}

/// Every intermediate of one forward pass, kept for the backward pass.
struct ForwardTrace {
    bool attention_active = false;
    std::size_t window_fill = 0;  // W' actually attended over

    Matrix x;           // B x d_in input (copy)
    Matrix keys_input;  // W' x d_h buffer snapshot (shared across the batch)
    Matrix query;       // B x d_h
    BatchTensor3 keys;  // B x W' x d_h projected keys (= values)
    Matrix scores;      // B x W' raw dot products
    Matrix alpha;       // B x W' normalized attention weights
    Matrix context;     // B x d_h attended context (zeros when gate closed)
    Matrix z;           // B x (d_in + d_h) concatenation
    Matrix a1;          // B x d_ff pre-activation, first extractor layer
    Matrix r1;          // B x d_ff activation
    Matrix a2;          // B x d_h pre-activation, second extractor layer
    Matrix h;           // B x d_h penultimate activation
    Matrix logits;      // B x C
    Matrix p;           // B x C row-softmax of logits
};

namespace detail {

inline void add_row_vector(Matrix& m, const Vector& v) {
    if (m.cols != v.size()) throw shape_error("add_row_vector: width mismatch");
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) r[j] += v[j];
    }
}

inline Vector col_sum(const Matrix& m) {
    Vector out(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) out[j] += r[j];
    }
    return out;
}

inline Matrix concat_cols(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw shape_error("concat_cols: row counts differ");
    Matrix out(a.rows, a.cols + b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ar = a.row(i);
        const double* br = b.row(i);
        double* orow = out.row(i);
        for (std::size_t j = 0; j < a.cols; ++j) orow[j] = ar[j];
        for (std::size_t j = 0; j < b.cols; ++j) orow[a.cols + j] = br[j];
    }
    return out;
}

}  // namespace detail

/// Forward pass. The attention gate is open iff attention is enabled and the
/// buffer holds at least one prototype; a closed gate substitutes a zero
/// context, which makes the model an ordinary MLP on [x || 0].
inline ForwardTrace forward(const ImlpParams& params, const ImlpConfig& cfg, const Matrix& x,
                            const FeatureBuffer& buffer) {
    if (x.cols != cfg.d_in)
        throw shape_error("forward: input width " + std::to_string(x.cols) + " != d_in " + std::to_string(cfg.d_in));
    if (buffer.dim() != cfg.d_h)
        throw shape_error("forward: buffer dim " + std::to_string(buffer.dim()) + " != d_h " + std::to_string(cfg.d_h));
    const std::size_t batch = x.rows;

    ForwardTrace t;
    t.x = x;
    t.attention_active = cfg.attention_enabled && !buffer.empty();

    if (t.attention_active) {
        t.window_fill = buffer.size();
        t.keys_input = buffer.as_matrix();                       // W' x d_h
        t.query = matmul(x, params.w_query);                     // B x d_h
        const BatchTensor3 stacked = buffer.stacked(batch);      // B x W' x d_h
        t.keys = batched_matmul_shared(stacked, params.w_key);   // B x W' x d_h

        // scores[b] = K[b] * q[b]^T, one dot product per window slot
        BatchTensor3 q3(batch, cfg.d_h, 1);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t d = 0; d < cfg.d_h; ++d) q3(b, d, 0) = t.query(b, d);
        const BatchTensor3 s3 = batched_matmul(t.keys, q3);      // B x W' x 1
        t.scores = Matrix(batch, t.window_fill);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t w = 0; w < t.window_fill; ++w) t.scores(b, w) = s3(b, w, 0);

        Matrix scaled = t.scores;
        const double inv_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_h));
        for (double& v : scaled.data) v *= inv_scale;
        t.alpha = softmax_rows(scaled);                          // B x W'

        // context[b] = alpha[b]^T * K[b]  (values tied to keys)
        BatchTensor3 a3(batch, 1, t.window_fill);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t w = 0; w < t.window_fill; ++w) a3(b, 0, w) = t.alpha(b, w);
        const BatchTensor3 c3 = batched_matmul(a3, t.keys);      // B x 1 x d_h
        t.context = Matrix(batch, cfg.d_h);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t d = 0; d < cfg.d_h; ++d) t.context(b, d) = c3(b, 0, d);
    } else {
        t.window_fill = 0;
        t.context = Matrix(batch, cfg.d_h);  // gate closed: zero context
    }

    t.z = detail::concat_cols(x, t.context);
    t.a1 = matmul(t.z, params.w1);
    detail::add_row_vector(t.a1, params.b1);
    t.r1 = relu(t.a1);
    t.a2 = matmul(t.r1, params.w2);
    if (cfg.fc2_bias) detail::add_row_vector(t.a2, params.b2);
    t.h = relu(t.a2);
    t.logits = matmul(t.h, params.w_cls);
    detail::add_row_vector(t.logits, params.b_cls);
    t.p = softmax_rows(t.logits);
    return t;
}

/// Mean cross-entropy over the batch plus gradients for every parameter.
/// Gradient flows through the query/key projections and the attention
/// weights, but never into the buffered prototypes.
inline double loss_and_backward(const ForwardTrace& t, const ImlpParams& params, const ImlpConfig& cfg,
                                const std::vector<int>& labels, ImlpGrads& grads) {
    const std::size_t batch = t.p.rows;
    const std::size_t n_classes = t.p.cols;
    if (labels.size() != batch) throw shape_error("loss_and_backward: label count != batch size");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes)
            throw data_error("loss_and_backward: label " + std::to_string(y) + " outside [0, " +
                             std::to_string(n_classes) + ")");

    grads = zero_params_like(cfg);

    double loss = 0.0;
    Matrix dlogits = t.p;  // (p - one_hot(y)) / B
    const double inv_b = 1.0 / static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        loss -= std::log(t.p(i, y));
        dlogits(i, y) -= 1.0;
    }
    loss *= inv_b;
    for (double& v : dlogits.data) v *= inv_b;

    // classifier head
    grads.w_cls = matmul(transpose(t.h), dlogits);
    grads.b_cls = detail::col_sum(dlogits);
    const Matrix dh = matmul(dlogits, transpose(params.w_cls));

    // second extractor layer
    const Matrix da2 = relu_backward(t.a2, dh);
    grads.w2 = matmul(transpose(t.r1), da2);
    if (cfg.fc2_bias) grads.b2 = detail::col_sum(da2);
    const Matrix dr1 = matmul(da2, transpose(params.w2));

    // first extractor layer
    const Matrix da1 = relu_backward(t.a1, dr1);
    grads.w1 = matmul(transpose(t.z), da1);
    grads.b1 = detail::col_sum(da1);
    const Matrix dz = matmul(da1, transpose(params.w1));

    if (!t.attention_active) return loss;  // x is data, context is constant zero

    // context slice of dz
    Matrix dcontext(batch, cfg.d_h);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t d = 0; d < cfg.d_h; ++d) dcontext(b, d) = dz(b, cfg.d_in + d);

    const std::size_t fill = t.window_fill;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_h));

    // through context = alpha^T K and scores = K q, accumulating both key paths
    Matrix dalpha(batch, fill);
    Matrix dquery(batch, cfg.d_h);
    BatchTensor3 dkeys(batch, fill, cfg.d_h);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t w = 0; w < fill; ++w) {
            double acc = 0.0;
            for (std::size_t d = 0; d < cfg.d_h; ++d) acc += t.keys(b, w, d) * dcontext(b, d);
            dalpha(b, w) = acc;
            for (std::size_t d = 0; d < cfg.d_h; ++d) dkeys(b, w, d) = t.alpha(b, w) * dcontext(b, d);
        }
    }

    const Matrix dscaled = softmax_rows_backward(t.alpha, dalpha);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t w = 0; w < fill; ++w) {
            const double ds = dscaled(b, w) * inv_scale;
            for (std::size_t d = 0; d < cfg.d_h; ++d) {
                dquery(b, d) += ds * t.keys(b, w, d);
                dkeys(b, w, d) += ds * t.query(b, d);
            }
        }
    }

    // keys = stacked(buffer) * w_key; the stacked entries are constants,
    // so only w_key receives gradient from the key path.
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t w = 0; w < fill; ++w) {
            const double* e = t.keys_input.row(w);
            for (std::size_t d1 = 0; d1 < cfg.d_h; ++d1) {
                const double ev = e[d1];
                if (ev == 0.0) continue;
                double* grow = grads.w_key.row(d1);
                for (std::size_t d2 = 0; d2 < cfg.d_h; ++d2) grow[d2] += ev * dkeys(b, w, d2);
            }
        }
    }
    grads.w_query = matmul(transpose(t.x), dquery);
    return loss;
}

/// Argmax classes (ties broken toward the lower index) plus probabilities.
inline std::pair<std::vector<int>, Matrix> predict(const ImlpParams& params, const ImlpConfig& cfg, const Matrix& x,
                                                   const FeatureBuffer& buffer) {
    const ForwardTrace t = forward(params, cfg, x, buffer);
    std::vector<int> classes(t.p.rows, 0);
    for (std::size_t i = 0; i < t.p.rows; ++i) {
        const double* row = t.p.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < t.p.cols; ++j)
            if (row[j] > row[best]) best = j;
        classes[i] = static_cast<int>(best);
    }
    return {std::move(classes), t.p};
}

/// Penultimate activations as a detached value copy.
inline Matrix penultimate_features(const ImlpParams& params, const ImlpConfig& cfg, const Matrix& x,
                                   const FeatureBuffer& buffer) {
    return forward(params, cfg, x, buffer).h;
}

/// Floating-point operations of one forward pass at the given batch size and
/// window fill. The query/key/score/aggregation terms follow the attention
/// data flow; multiply by 3 for a training step (forward + backward).
inline std::uint64_t flops_per_batch(const ImlpConfig& cfg, std::uint64_t batch, std::uint64_t window_fill) {
    const std::uint64_t d_in = cfg.d_in, d_h = cfg.d_h, d_ff = cfg.d_ff, c = cfg.n_classes;
    const std::uint64_t query = 2 * batch * d_in * d_h;
    const std::uint64_t key_proj = 2 * batch * window_fill * d_h * d_h;
    const std::uint64_t scores = 2 * batch * window_fill * d_h;
    const std::uint64_t aggregation = 2 * batch * window_fill * d_h;
    const std::uint64_t trunk = 2 * batch * ((d_in + d_h) * d_ff + d_ff * d_h + d_h * c);
    return query + key_proj + scores + aggregation + trunk;
}

constexpr std::uint64_t kTrainStepFlopsFactor = 3;  // forward + backward ~ 3x forward

inline std::uint64_t training_flops_per_batch(const ImlpConfig& cfg, std::uint64_t batch, std::uint64_t window_fill) {
    return kTrainStepFlopsFactor * flops_per_batch(cfg, batch, window_fill);
}

}  // namespace imlp
