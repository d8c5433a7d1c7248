#pragma once

// Fixed-capacity FIFO of latent prototype vectors.
//
// The buffer owns value copies of everything pushed into it, so stored
// entries never track later parameter updates. Footprint is capacity * dim
// regardless of how many vectors have passed through.

#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "imlp/common.hpp"
#include "imlp/matrix.hpp"

namespace imlp {

class FeatureBuffer {
public:
    FeatureBuffer(std::size_t capacity, std::size_t dim) : capacity_(capacity), dim_(dim) {
        if (capacity == 0) throw config_error("FeatureBuffer: capacity must be >= 1");
        if (dim == 0) throw config_error("FeatureBuffer: dim must be >= 1");
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// Append newest-last; evict the single oldest entry when full.
    void push(const Vector& feature) {
        if (feature.size() != dim_)
            throw shape_error("FeatureBuffer::push: feature length " + std::to_string(feature.size()) +
                              " != buffer dim " + std::to_string(dim_));
        if (entries_.size() == capacity_) entries_.pop_front();
        entries_.push_back(feature);
    }

    /// Entries oldest-first. entry(0) is the next to be evicted.
    const Vector& entry(std::size_t i) const { return entries_.at(i); }

    /// Entries as a size x dim matrix, oldest first.
    Matrix as_matrix() const {
        Matrix m(entries_.size(), dim_);
        for (std::size_t i = 0; i < entries_.size(); ++i)
            for (std::size_t d = 0; d < dim_; ++d) m(i, d) = entries_[i][d];
        return m;
    }

    /// Entries replicated across the batch axis: batch x size x dim,
    /// every batch slice identical. Callers must take the attention-inactive
    /// path when the buffer is empty.
    BatchTensor3 stacked(std::size_t batch) const {
        if (entries_.empty()) throw data_error("FeatureBuffer::stacked: buffer is empty");
        BatchTensor3 t(batch, entries_.size(), dim_);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t s = 0; s < entries_.size(); ++s)
                for (std::size_t d = 0; d < dim_; ++d) t(b, s, d) = entries_[s][d];
        return t;
    }

    void clear() { entries_.clear(); }

private:
    std::size_t capacity_;
    std::size_t dim_;
    std::deque<Vector> entries_;  // oldest first
};

/// Elementwise mean of the inputs, optionally l2-normalized. This is the
/// per-segment prototype that gets enqueued after a segment is consumed.
inline Vector segment_prototype(const std::vector<Vector>& features, bool normalize, double eps = 1e-8) {
    if (features.empty()) throw data_error("segment_prototype: empty feature list");
    const std::size_t dim = features.front().size();
    Vector mean(dim, 0.0);
    for (const Vector& f : features) {
        if (f.size() != dim) throw shape_error("segment_prototype: inconsistent feature dimensions");
        for (std::size_t d = 0; d < dim; ++d) mean[d] += f[d];
    }
    const double inv = 1.0 / static_cast<double>(features.size());
    for (double& v : mean) v *= inv;
    return normalize ? l2_normalize(mean, eps) : mean;
}

/// Mean of the rows of a matrix, optionally l2-normalized.
inline Vector segment_prototype(const Matrix& features, bool normalize, double eps = 1e-8) {
    if (features.rows == 0) throw data_error("segment_prototype: empty feature matrix");
    Vector mean(features.cols, 0.0);
    for (std::size_t i = 0; i < features.rows; ++i)
        for (std::size_t d = 0; d < features.cols; ++d) mean[d] += features(i, d);
    const double inv = 1.0 / static_cast<double>(features.rows);
    for (double& v : mean) v *= inv;
    return normalize ? l2_normalize(mean, eps) : mean;
}

}  // namespace imlp
