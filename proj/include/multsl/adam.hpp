#pragma once

#include <cstdint>
#include <vector>

#include "multsl/tensor.hpp"

namespace multsl {

struct AdamHyper {
    double learning_rate = 1.0e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1.0e-8;

    void validate() const;
};

// Per-parameter-block moment estimates. Block order must match the parameter
// order passed to adam_step on every call.
struct AdamState {
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step_count = 0;

    static AdamState like(const std::vector<Tensor*>& params);
};

// Bias-corrected Adam update applied in place to every block.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const AdamHyper& hyper);

}  // namespace multsl
