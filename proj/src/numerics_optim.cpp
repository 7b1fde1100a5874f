#include "mexflow/optim.hpp"

#include <cmath>

namespace mex::nn {

OptimState make_adam_state(std::span<Parameter* const> params, AdamConfig config) {
    OptimState s;
    s.config = config;
    for (const Parameter* p : params) {
        s.first_moment.emplace_back(p->value.shape(), 0.0);
        s.second_moment.emplace_back(p->value.shape(), 0.0);
    }
    return s;
}

void adam_step(std::span<Parameter* const> params, OptimState& state) {
    if (params.size() != state.first_moment.size())
        throw std::invalid_argument("adam_step: optimizer state built for " + std::to_string(state.first_moment.size()) +
                                    " parameters, got " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Parameter& p = *params[i];
        if (p.grad.shape() != p.value.shape() || state.first_moment[i].shape() != p.value.shape())
            throw std::invalid_argument("adam_step: shape mismatch for " + p.name + " " +
                                        shape_to_string(p.value.shape()));
        if (!p.grad.all_finite()) throw NonFiniteGradient("non-finite gradient in parameter " + p.name);
    }
    const auto& c = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        double* m = state.first_moment[i].raw();
        double* v = state.second_moment[i].raw();
        double* w = p.value.raw();
        const double* g = p.grad.raw();
        for (std::size_t j = 0, n = p.value.size(); j < n; ++j) {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            w[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

}  // namespace mex::nn
