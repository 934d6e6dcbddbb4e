#include "multsl/adam.hpp"

#include <cmath>

#include "multsl/errors.hpp"

namespace multsl {

void AdamHyper::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("AdamHyper: learning_rate must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("AdamHyper: beta1 must be in (0,1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("AdamHyper: beta2 must be in (0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("AdamHyper: epsilon must be > 0");
}

AdamState AdamState::like(const std::vector<Tensor*>& params) {
    AdamState s;
    s.first_moment.reserve(params.size());
    s.second_moment.reserve(params.size());
    for (const Tensor* p : params) {
        s.first_moment.emplace_back(p->shape);
        s.second_moment.emplace_back(p->shape);
    }
    return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const AdamHyper& hyper) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw DimensionError("adam_step: block count mismatch");
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(hyper.beta2, t);

    for (std::size_t b = 0; b < params.size(); ++b) {
        Tensor& p = *params[b];
        const Tensor& g = *grads[b];
        Tensor& m = state.first_moment[b];
        Tensor& v = state.second_moment[b];
        if (!p.same_shape(g) || !p.same_shape(m)) {
            throw DimensionError("adam_step: shape mismatch in block");
        }
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            m.data[i] = hyper.beta1 * m.data[i] + (1.0 - hyper.beta1) * g.data[i];
            v.data[i] = hyper.beta2 * v.data[i] + (1.0 - hyper.beta2) * g.data[i] * g.data[i];
            const double m_hat = m.data[i] / bc1;
            const double v_hat = v.data[i] / bc2;
            p.data[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
        }
    }
}

}  // namespace multsl
