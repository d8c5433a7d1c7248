#pragma once

// Binary checkpoint: config header, every parameter tensor (dims then
// row-major 64-bit values), then the prototype buffer as a dense
// capacity x dim block plus fill count. Little-endian, fixed field order.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "imlp/common.hpp"
#include "imlp/feature_buffer.hpp"
#include "imlp/model.hpp"

namespace imlp {

namespace detail {

constexpr char kCheckpointMagic[8] = {'I', 'M', 'L', 'P', 'C', 'K', 'P', '1'};

inline void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw data_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_f64(std::ostream& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(out, bits);
}

inline double read_f64(std::istream& in) {
    const std::uint64_t bits = read_u64(in);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

inline void write_tensor(std::ostream& out, std::uint64_t rows, std::uint64_t cols, const std::vector<double>& data) {
    write_u64(out, rows);
    write_u64(out, cols);
    for (double v : data) write_f64(out, v);
}

inline void read_tensor(std::istream& in, std::uint64_t expect_rows, std::uint64_t expect_cols,
                        std::vector<double>& data, const char* what) {
    const std::uint64_t rows = read_u64(in);
    const std::uint64_t cols = read_u64(in);
    if (rows != expect_rows || cols != expect_cols)
        throw data_error(std::string("checkpoint: unexpected dims for ") + what);
    data.resize(rows * cols);
    for (double& v : data) v = read_f64(in);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ImlpConfig& cfg, const ImlpParams& params,
                            const FeatureBuffer& buffer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("checkpoint: cannot write " + path);
    out.write(detail::kCheckpointMagic, 8);
    detail::write_u64(out, cfg.d_in);
    detail::write_u64(out, cfg.d_h);
    detail::write_u64(out, cfg.d_ff);
    detail::write_u64(out, cfg.n_classes);
    detail::write_u64(out, cfg.window);
    detail::write_u64(out, (cfg.attention_enabled ? 1u : 0u) | (cfg.fc2_bias ? 2u : 0u) |
                               (cfg.normalize_prototypes ? 4u : 0u) |
                               (cfg.buffer_granularity == BufferGranularity::kBatch ? 8u : 0u));

    detail::write_tensor(out, cfg.d_in, cfg.d_h, params.w_query.data);
    detail::write_tensor(out, cfg.d_h, cfg.d_h, params.w_key.data);
    detail::write_tensor(out, cfg.d_in + cfg.d_h, cfg.d_ff, params.w1.data);
    detail::write_tensor(out, 1, cfg.d_ff, params.b1);
    detail::write_tensor(out, cfg.d_ff, cfg.d_h, params.w2.data);
    detail::write_tensor(out, 1, cfg.d_h, params.b2);
    detail::write_tensor(out, cfg.d_h, cfg.n_classes, params.w_cls.data);
    detail::write_tensor(out, 1, cfg.n_classes, params.b_cls);

    // dense capacity x dim block, oldest-first, unfilled slots zero
    detail::write_u64(out, buffer.capacity());
    detail::write_u64(out, buffer.dim());
    detail::write_u64(out, buffer.size());
    for (std::size_t s = 0; s < buffer.capacity(); ++s) {
        if (s < buffer.size()) {
            for (double v : buffer.entry(s)) detail::write_f64(out, v);
        } else {
            for (std::size_t d = 0; d < buffer.dim(); ++d) detail::write_f64(out, 0.0);
        }
    }
    if (!out) throw data_error("checkpoint: write failed for " + path);
}

struct Checkpoint {
    ImlpConfig config;
    ImlpParams params;
    FeatureBuffer buffer{1, 1};
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
        throw data_error("checkpoint: bad magic in " + path);

    Checkpoint ck;
    ck.config.d_in = detail::read_u64(in);
    ck.config.d_h = detail::read_u64(in);
    ck.config.d_ff = detail::read_u64(in);
    ck.config.n_classes = detail::read_u64(in);
    ck.config.window = detail::read_u64(in);
    const std::uint64_t flags = detail::read_u64(in);
    ck.config.attention_enabled = (flags & 1u) != 0;
    ck.config.fc2_bias = (flags & 2u) != 0;
    ck.config.normalize_prototypes = (flags & 4u) != 0;
    ck.config.buffer_granularity = (flags & 8u) != 0 ? BufferGranularity::kBatch : BufferGranularity::kSegment;
    ck.config.validate();

    ck.params = zero_params_like(ck.config);
    detail::read_tensor(in, ck.config.d_in, ck.config.d_h, ck.params.w_query.data, "w_query");
    detail::read_tensor(in, ck.config.d_h, ck.config.d_h, ck.params.w_key.data, "w_key");
    detail::read_tensor(in, ck.config.d_in + ck.config.d_h, ck.config.d_ff, ck.params.w1.data, "w1");
    detail::read_tensor(in, 1, ck.config.d_ff, ck.params.b1, "b1");
    detail::read_tensor(in, ck.config.d_ff, ck.config.d_h, ck.params.w2.data, "w2");
    detail::read_tensor(in, 1, ck.config.d_h, ck.params.b2, "b2");
    detail::read_tensor(in, ck.config.d_h, ck.config.n_classes, ck.params.w_cls.data, "w_cls");
    detail::read_tensor(in, 1, ck.config.n_classes, ck.params.b_cls, "b_cls");

    const std::uint64_t capacity = detail::read_u64(in);
    const std::uint64_t dim = detail::read_u64(in);
    const std::uint64_t fill = detail::read_u64(in);
    if (fill > capacity) throw data_error("checkpoint: buffer fill exceeds capacity");
    ck.buffer = FeatureBuffer(capacity, dim);
    for (std::uint64_t s = 0; s < capacity; ++s) {
        Vector v(dim);
        for (std::uint64_t d = 0; d < dim; ++d) v[d] = detail::read_f64(in);
        if (s < fill) ck.buffer.push(v);
    }
    return ck;
}

}  // namespace imlp
