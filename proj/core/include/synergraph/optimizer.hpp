#pragma once

#include "synergraph/checkpoint.hpp"
#include "synergraph/common.hpp"

#include <cstdint>
#include <vector>

namespace synergraph {

struct AdamWConfig {
    double lr = 1e-3;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moments per parameter tensor and the shared step count.
struct OptimizerState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::int64_t t = 0;
};

/// Decoupled weight decay p <- p - lr*wd*p, then a bias-corrected Adam step.
/// With weight_decay = 0 this is plain Adam.
void adamw_step(const std::vector<NamedTensor>& params, const std::vector<Matrix>& grads, OptimizerState& state,
                const AdamWConfig& cfg);

}  // namespace synergraph
