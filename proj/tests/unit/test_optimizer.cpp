#include "synergraph/optimizer.hpp"

#include <gtest/gtest.h>

using namespace synergraph;

namespace {

struct One {
    Matrix p;
    std::vector<NamedTensor> tensors() { return {{"p", &p}}; }
};

}  // namespace

TEST(AdamW, ZeroGradNoDecayIsNoop) {
    One x{(Matrix(1, 3) << 1, -2, 3).finished()};
    OptimizerState st;
    AdamWConfig cfg;
    cfg.weight_decay = 0;
    const Matrix before = x.p;
    adamw_step(x.tensors(), {Matrix::Zero(1, 3)}, st, cfg);
    EXPECT_TRUE(x.p == before);
    EXPECT_EQ(st.t, 1);
}

TEST(AdamW, DecoupledDecay) {
    One x{(Matrix(1, 2) << 2, -4).finished()};
    OptimizerState st;
    AdamWConfig cfg;
    cfg.lr = 1;
    cfg.weight_decay = 0.1;
    adamw_step(x.tensors(), {Matrix::Zero(1, 2)}, st, cfg);
    EXPECT_NEAR(x.p(0, 0), 1.8, 1e-15);
    EXPECT_NEAR(x.p(0, 1), -3.6, 1e-15);
}

TEST(AdamW, FirstStepIsSignTimesLr) {
    One x{Matrix::Zero(1, 3)};
    OptimizerState st;
    AdamWConfig cfg;
    cfg.weight_decay = 0;
    cfg.lr = 0.01;
    const Matrix g = (Matrix(1, 3) << 0.5, -3.0, 1e-3).finished();
    adamw_step(x.tensors(), {g}, st, cfg);
    for (Index c = 0; c < 3; ++c) {
        EXPECT_NEAR(x.p(0, c), -cfg.lr * g(0, c) / (std::abs(g(0, c)) + cfg.eps), 1e-15);
        EXPECT_NEAR(x.p(0, c), -cfg.lr * (g(0, c) > 0 ? 1 : -1), 1e-7);
    }
}

TEST(AdamW, MatchesScalarReference) {
    One x{Matrix::Constant(1, 1, 0.3)};
    OptimizerState st;
    AdamWConfig cfg;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.01;
    double p = 0.3, m = 0, v = 0;
    for (int t = 1; t <= 25; ++t) {
        const double g = std::sin(t) + 2 * p;
        adamw_step(x.tensors(), {Matrix::Constant(1, 1, g)}, st, cfg);
        p -= cfg.lr * cfg.weight_decay * p;
        m = cfg.beta1 * m + (1 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
        const double mh = m / (1 - std::pow(cfg.beta1, t)), vh = v / (1 - std::pow(cfg.beta2, t));
        p -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
        EXPECT_NEAR(x.p(0, 0), p, 1e-12) << t;
    }
}

TEST(AdamW, ShapeMismatchRejected) {
    One x{Matrix::Zero(2, 2)};
    OptimizerState st;
    EXPECT_THROW(adamw_step(x.tensors(), {Matrix::Zero(1, 2)}, st, {}), ShapeError);
    EXPECT_THROW(adamw_step(x.tensors(), {}, st, {}), ShapeError);
}
