#include "synergraph/optimizer.hpp"

#include <cmath>

namespace synergraph {

void adamw_step(const std::vector<NamedTensor>& params, const std::vector<Matrix>& grads, OptimizerState& state,
                const AdamWConfig& cfg) {
    if (grads.size() != params.size()) throw ShapeError("adamw_step: one gradient per parameter tensor");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
            state.v.push_back(Matrix::Zero(p.value->rows(), p.value->cols()));
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adamw_step: optimizer state does not match parameters");

    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k].value;
        const Matrix& g = grads[k];
        if (g.rows() != p.rows() || g.cols() != p.cols()) {
            throw ShapeError("adamw_step: gradient shape mismatch for '" + params[k].name + "'");
        }
        if (cfg.weight_decay != 0.0) p *= 1.0 - cfg.lr * cfg.weight_decay;
        state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
        state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g.cwiseAbs2();
        p.array() -= cfg.lr * (state.m[k].array() / bc1) / ((state.v[k].array() / bc2).sqrt() + cfg.eps);
    }
}

}  // namespace synergraph
