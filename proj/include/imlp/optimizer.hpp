#pragma once

// First-order optimizers over the parameter struct. Moment buffers mirror
// the parameter shapes exactly and are visited in the same fixed order.

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <vector>

#include "imlp/common.hpp"
#include "imlp/model.hpp"

namespace imlp {

enum class OptimizerKind { kAdaptiveMoment, kSgdMomentum };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::kAdaptiveMoment;
    double learning_rate = 1e-3;
    double beta1 = 0.9;    // first-moment decay (adaptive) / momentum factor (sgd)
    double beta2 = 0.999;  // second-moment decay
    double epsilon = 1e-8;
};

struct OptimizerState {
    ImlpParams m;  // first moments / velocity
    ImlpParams v;  // second moments (unused by sgd-momentum)
    std::uint64_t step = 0;

    static OptimizerState zeros(const ImlpConfig& cfg) {
        return OptimizerState{zero_params_like(cfg), zero_params_like(cfg), 0};
    }
};

inline void apply_gradients(ImlpParams& params, OptimizerState& state, const ImlpGrads& grads,
                            const OptimizerConfig& opt) {
    state.step += 1;
    if (opt.kind == OptimizerKind::kAdaptiveMoment) {
        const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
        const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
        std::size_t slot = 0;
        std::vector<std::vector<double>*> ms, vs;
        std::vector<const std::vector<double>*> gs;
        state.m.for_each_tensor([&](std::vector<double>& t) { ms.push_back(&t); });
        state.v.for_each_tensor([&](std::vector<double>& t) { vs.push_back(&t); });
        grads.for_each_tensor([&](const std::vector<double>& t) { gs.push_back(&t); });
        params.for_each_tensor([&](std::vector<double>& p) {
            std::vector<double>& m = *ms[slot];
            std::vector<double>& v = *vs[slot];
            const std::vector<double>& g = *gs[slot];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
                v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
                const double m_hat = m[i] / bc1;
                const double v_hat = v[i] / bc2;
                p[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
            }
            ++slot;
        });
    } else {
        std::size_t slot = 0;
        std::vector<std::vector<double>*> ms;
        std::vector<const std::vector<double>*> gs;
        state.m.for_each_tensor([&](std::vector<double>& t) { ms.push_back(&t); });
        grads.for_each_tensor([&](const std::vector<double>& t) { gs.push_back(&t); });
        params.for_each_tensor([&](std::vector<double>& p) {
            std::vector<double>& vel = *ms[slot];
            const std::vector<double>& g = *gs[slot];
            for (std::size_t i = 0; i < p.size(); ++i) {
                vel[i] = opt.beta1 * vel[i] + g[i];
                p[i] -= opt.learning_rate * vel[i];
            }
            ++slot;
        });
    }
}

}  // namespace imlp
