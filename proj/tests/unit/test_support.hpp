#pragma once

// Shared test helpers: finite-difference oracles, random builders, and
// synthetic segment streams.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "imlp/common.hpp"
#include "imlp/data.hpp"
#include "imlp/matrix.hpp"
#include "imlp/model.hpp"
#include "imlp/trainer.hpp"

namespace test_support {

using imlp::Matrix;
using imlp::Rng;
using imlp::Vector;

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

inline Vector random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

/// Relative error with an absolute floor for near-zero pairs.
inline double grad_rel_error(double analytic, double numeric) {
    const double scale = std::max(std::fabs(analytic), std::fabs(numeric));
    if (scale < 1e-6) return std::fabs(analytic - numeric);  // absolute regime
    return std::fabs(analytic - numeric) / scale;
}

/// Central finite difference of a scalar function at coordinate i of a
/// flat parameter buffer.
inline double central_difference(std::vector<double>& storage, std::size_t i, double step,
                                 const std::function<double()>& f) {
    const double saved = storage[i];
    storage[i] = saved + step;
    const double plus = f();
    storage[i] = saved - step;
    const double minus = f();
    storage[i] = saved;
    return (plus - minus) / (2.0 * step);
}

/// Worst relative error between an analytic gradient buffer and central
/// differences over every coordinate of `storage`.
inline double max_grad_error(std::vector<double>& storage, const std::vector<double>& analytic, double step,
                             const std::function<double()>& f) {
    double worst = 0.0;
    for (std::size_t i = 0; i < storage.size(); ++i) {
        const double fd = central_difference(storage, i, step, f);
        worst = std::max(worst, grad_rel_error(analytic[i], fd));
    }
    return worst;
}

/// Moves feed-forward pre-activations away from the ReLU kink so central
/// differences with step 1e-4 never cross it. Returns false if it gives up.
inline bool nudge_away_from_kinks(imlp::ImlpParams& params, const imlp::ImlpConfig& cfg, const Matrix& x,
                                  const imlp::FeatureBuffer& buf) {
    for (int pass = 0; pass < 20; ++pass) {
        const imlp::ForwardTrace t = imlp::forward(params, cfg, x, buf);
        bool clean = true;
        for (std::size_t j = 0; j < cfg.d_ff; ++j)
            for (std::size_t i = 0; i < t.a1.rows; ++i)
                if (std::fabs(t.a1(i, j)) < 5e-3) {
                    params.b1[j] += 2e-2;
                    clean = false;
                    break;
                }
        for (std::size_t j = 0; j < cfg.d_h; ++j)
            for (std::size_t i = 0; i < t.a2.rows; ++i)
                if (std::fabs(t.a2(i, j)) < 5e-3) {
                    params.b2[j] += 2e-2;
                    clean = false;
                    break;
                }
        if (clean) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// synthetic streams

struct StreamSpec {
    std::size_t n_segments = 10;
    std::size_t rows_per_segment = 600;
    std::size_t d_in = 10;
    double separation = 1.4;       // class-mean offset along the drifting axis
    double noise = 0.8;            // within-class stddev on informative dims
    double drift_per_segment = 0.17;  // rotation of the class axis, radians
    double train_fraction = 0.85;
    std::uint64_t seed = 7;
};

/// Two Gaussian classes whose means rotate a little every segment.
/// Each segment is stratified-split into train/test.
inline std::vector<imlp::SegmentData> make_drifting_stream(const StreamSpec& spec) {
    Rng rng(spec.seed);
    std::vector<imlp::SegmentData> stream;
    for (std::size_t t = 0; t < spec.n_segments; ++t) {
        const double theta = spec.drift_per_segment * static_cast<double>(t);
        const double ax = std::cos(theta), ay = std::sin(theta);

        Matrix x(spec.rows_per_segment, spec.d_in);
        std::vector<int> y(spec.rows_per_segment);
        for (std::size_t r = 0; r < spec.rows_per_segment; ++r) {
            const int cls = static_cast<int>(r % 2);  // balanced classes
            const double sign = cls == 0 ? 1.0 : -1.0;
            x(r, 0) = sign * spec.separation * ax + spec.noise * rng.normal();
            x(r, 1) = sign * spec.separation * ay + spec.noise * rng.normal();
            for (std::size_t d = 2; d < spec.d_in; ++d) x(r, d) = 0.5 * rng.normal();
            y[r] = cls;
        }

        const imlp::SplitIndices split =
            imlp::stratified_split(y, spec.train_fraction, spec.seed * 1000 + t);
        imlp::SegmentData seg;
        seg.x_train = Matrix(split.train.size(), spec.d_in);
        seg.x_test = Matrix(split.test.size(), spec.d_in);
        for (std::size_t i = 0; i < split.train.size(); ++i) {
            for (std::size_t d = 0; d < spec.d_in; ++d) seg.x_train(i, d) = x(split.train[i], d);
            seg.y_train.push_back(y[split.train[i]]);
        }
        for (std::size_t i = 0; i < split.test.size(); ++i) {
            for (std::size_t d = 0; d < spec.d_in; ++d) seg.x_test(i, d) = x(split.test[i], d);
            seg.y_test.push_back(y[split.test[i]]);
        }
        stream.push_back(std::move(seg));
    }
    return stream;
}

struct RecurringSpec {
    std::size_t n_segments = 12;
    std::size_t rows_per_segment = 600;
    std::size_t d_in = 8;
    std::size_t period = 4;     // segment t repeats the distribution of t - period
    double center_scale = 2.5;  // concept centers sit at scaled corners
    double noise = 1.0;
    double train_fraction = 0.85;
    std::uint64_t seed = 7;
};

/// Recurring-concept stream: segment t draws from concept t mod period.
/// Concepts live at distinct centers with distinct class boundaries, so
/// past latent prototypes of the same concept are informative again when
/// the concept returns.
inline std::vector<imlp::SegmentData> make_recurring_stream(const RecurringSpec& spec) {
    Rng rng(spec.seed);
    std::vector<imlp::SegmentData> stream;
    for (std::size_t t = 0; t < spec.n_segments; ++t) {
        const std::size_t concept_id = t % spec.period;
        const double cx = (concept_id == 0 || concept_id == 3) ? spec.center_scale : -spec.center_scale;
        const double cy = (concept_id == 0 || concept_id == 1) ? spec.center_scale : -spec.center_scale;
        const double phi = static_cast<double>(concept_id) * 0.25 * 3.14159265358979323846 + 0.3927;
        const double ux = std::cos(phi), uy = std::sin(phi);

        Matrix x(spec.rows_per_segment, spec.d_in);
        std::vector<int> y(spec.rows_per_segment);
        for (std::size_t r = 0; r < spec.rows_per_segment; ++r) {
            const double dx = spec.noise * rng.normal();
            const double dy = spec.noise * rng.normal();
            x(r, 0) = cx + dx;
            x(r, 1) = cy + dy;
            for (std::size_t d = 2; d < spec.d_in; ++d) x(r, d) = 0.5 * rng.normal();
            y[r] = (ux * dx + uy * dy) > 0.0 ? 1 : 0;
        }

        const imlp::SplitIndices split =
            imlp::stratified_split(y, spec.train_fraction, spec.seed * 1000 + t);
        imlp::SegmentData seg;
        seg.x_train = Matrix(split.train.size(), spec.d_in);
        seg.x_test = Matrix(split.test.size(), spec.d_in);
        for (std::size_t i = 0; i < split.train.size(); ++i) {
            for (std::size_t d = 0; d < spec.d_in; ++d) seg.x_train(i, d) = x(split.train[i], d);
            seg.y_train.push_back(y[split.train[i]]);
        }
        for (std::size_t i = 0; i < split.test.size(); ++i) {
            for (std::size_t d = 0; d < spec.d_in; ++d) seg.x_test(i, d) = x(split.test[i], d);
            seg.y_test.push_back(y[split.test[i]]);
        }
        stream.push_back(std::move(seg));
    }
    return stream;
}

/// Ordinary-least-squares slope of values against their index.
inline double ols_slope(const std::vector<double>& values) {
    const std::size_t n = values.size();
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_x += static_cast<double>(i);
        mean_y += values[i];
    }
    mean_x /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - mean_x;
        num += dx * (values[i] - mean_y);
        den += dx * dx;
    }
    return num / den;
}

/// R^2 of the least-squares fit y ~ a + b x.
inline double linear_fit_r2(const std::vector<double>& y) {
    const std::size_t n = y.size();
    const double b = ols_slope(y);
    double mean_x = (static_cast<double>(n) - 1.0) / 2.0;
    double mean_y = 0.0;
    for (double v : y) mean_y += v;
    mean_y /= static_cast<double>(n);
    const double a = mean_y - b * mean_x;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double fit = a + b * static_cast<double>(i);
        ss_res += (y[i] - fit) * (y[i] - fit);
        ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    }
    return 1.0 - ss_res / ss_tot;
}

/// Least-squares quadratic fit y ~ c0 + c1 x + c2 x^2; returns {c0, c1, c2}.
inline std::array<double, 3> quadratic_fit(const std::vector<double>& y) {
    const std::size_t n = y.size();
    double s[5] = {0, 0, 0, 0, 0};
    double b[3] = {0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i);
        double xp = 1.0;
        for (int p = 0; p <= 4; ++p) {
            s[p] += xp;
            if (p <= 2) b[p] += xp * y[i];
            xp *= x;
        }
    }
    double a[3][4] = {{s[0], s[1], s[2], b[0]}, {s[1], s[2], s[3], b[1]}, {s[2], s[3], s[4], b[2]}};
    for (int col = 0; col < 3; ++col) {  // gaussian elimination with partial pivot
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        for (int c = 0; c < 4; ++c) std::swap(a[col][c], a[piv][c]);
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
        }
    }
    return {a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]};
}

/// Unique temporary directory for harness tests.
inline std::string make_temp_dir(const std::string& tag) {
    static std::uint64_t counter = 0;
    const auto dir =
        std::filesystem::temp_directory_path() / ("imlp_test_" + tag + "_" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace test_support
