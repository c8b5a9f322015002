#include "oracles.hpp"
#include "synergraph/model.hpp"

#include <gtest/gtest.h>

using namespace synergraph;

namespace {

struct Fixture {
    SyntheticData data;
    SplitDataset split;
    ModelInputs inputs;

    explicit Fixture(std::uint64_t seed = 1)
        : data(synth_dataset({20, 16, 5, 6, 4, seed})),
          split(user_split(data.dataset, {}, seed)),
          inputs(build_model_inputs(split,
                                    {std::make_shared<FeatureMatrix>(data.visual),
                                     std::make_shared<FeatureMatrix>(data.textual)},
                                    4)) {}
};

ModelParams params_for(const ModelConfig& cfg, const ModelInputs& in, std::uint64_t seed) {
    std::vector<Index> dims;
    for (Modality m : cfg.modalities) dims.push_back(in.modality(m).features->cols());
    return init_params(cfg, dims, in.n_users, in.n_items, seed);
}

ModalityParams scalar_modality(double pw, double pb, double gw, double gb) {
    ModalityParams p;
    p.proj_W = Matrix::Constant(1, 1, pw);
    p.proj_b = Matrix::Constant(1, 1, pb);
    p.gate_W = Matrix::Constant(1, 1, gw);
    p.gate_b = Matrix::Constant(1, 1, gb);
    return p;
}

}  // namespace

TEST(Init, DeterministicZeroBiasesXavierBound) {
    ModelConfig cfg;
    const std::vector<Index> dims{4096, 768};
    const auto a = init_params(cfg, dims, 10, 12, 3);
    const auto b = init_params(cfg, dims, 10, 12, 3);
    EXPECT_TRUE(a.user_emb == b.user_emb);
    EXPECT_TRUE(a.modal[1].proj_W == b.modal[1].proj_W);
    EXPECT_TRUE(a.attn_q == b.attn_q);
    const auto c = init_params(cfg, dims, 10, 12, 4);
    EXPECT_FALSE(a.item_emb == c.item_emb);
    for (const auto& m : a.modal) {
        EXPECT_TRUE(m.proj_b.isZero());
        EXPECT_TRUE(m.gate_b.isZero());
        EXPECT_TRUE(m.pref_b.isZero());
    }
    EXPECT_TRUE(a.attn_b.isZero());
    const double bound = std::sqrt(6.0 / (64 + 768));
    EXPECT_NEAR(bound, 0.0849, 1e-4);
    EXPECT_LE(a.modal[1].proj_W.cwiseAbs().maxCoeff(), bound);
    EXPECT_GT(a.modal[1].proj_W.cwiseAbs().maxCoeff(), 0.9 * bound);
    EXPECT_EQ(a.modal[0].proj_W.rows(), 64);
    EXPECT_EQ(a.modal[0].proj_W.cols(), 4096);
    EXPECT_NEAR(a.user_emb.mean(), 0.0, 3e-3);
}

TEST(Init, TensorNamesStable) {
    ModelConfig cfg;
    cfg.dim = 4;
    auto p = init_params(cfg, std::vector<Index>{3, 5}, 2, 2, 1);
    std::vector<std::string> names;
    for (const auto& t : p.tensors()) names.push_back(t.name);
    EXPECT_EQ(names.front(), "user_emb");
    EXPECT_EQ(names[2], "visual.proj_W");
    EXPECT_EQ(names.back(), "attn_q");
    EXPECT_EQ(names.size(), 17u);
}

TEST(Purify, ZeroGateAnnihilates) {
    const auto p = scalar_modality(0.5, 0.1, 0.0, 0.0);
    EXPECT_EQ(purify(Matrix::Constant(3, 1, 2.0), Matrix::Ones(3, 1), p, true).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Purify, ScalarHandCase) {
    const auto p = scalar_modality(0.5, 0.1, 1.0, 0.0);
    const Matrix out = purify(Matrix::Constant(1, 1, 2.0), Matrix::Ones(1, 1), p, true);
    EXPECT_NEAR(out(0, 0), 0.80050, 1e-5);
    EXPECT_NEAR(out(0, 0), std::tanh(1.1), 1e-15);
    const Matrix raw = purify(Matrix::Constant(1, 1, 2.0), Matrix::Ones(1, 1), p, false);
    EXPECT_NEAR(raw(0, 0), 1.1, 1e-15);
}

TEST(Purify, BoundedByItemEmbedding) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0, 3);
    ModalityParams p;
    p.proj_W = Matrix(4, 6);
    p.gate_W = Matrix(4, 4);
    for (Index i = 0; i < p.proj_W.size(); ++i) p.proj_W.data()[i] = g(rng);
    for (Index i = 0; i < p.gate_W.size(); ++i) p.gate_W.data()[i] = g(rng);
    p.proj_b = Matrix::Zero(1, 4);
    p.gate_b = Matrix::Ones(1, 4);
    Matrix e(5, 6), ie(5, 4);
    for (Index i = 0; i < e.size(); ++i) e.data()[i] = g(rng);
    for (Index i = 0; i < ie.size(); ++i) ie.data()[i] = g(rng);
    const Matrix out = purify(e, ie, p, true);
    EXPECT_TRUE((out.cwiseAbs().array() <= ie.cwiseAbs().array()).all());
}

TEST(PropagateUi, Examples) {
    const auto swap = csr_from_coo({{0, 1, 1.0}, {1, 0, 1.0}}, 2, 2);
    const Matrix id = Matrix::Identity(2, 2);
    EXPECT_TRUE(propagate_ui(id, swap, 0) == id);
    EXPECT_TRUE(propagate_ui(id, swap, 1) == Matrix::Constant(2, 2, 0.5));

    // node 2 has no edges: its row is its own embedding weighted 1/(L+1)
    const auto l = csr_from_coo({{0, 1, 1.0}, {1, 0, 1.0}}, 3, 3);
    const Matrix g0 = (Matrix(3, 2) << 1, 2, 3, 4, 5, 6).finished();
    const Matrix out = propagate_ui(g0, l, 2);
    EXPECT_NEAR(out(2, 0), 5.0 / 3.0, 1e-15);
    EXPECT_NEAR(out(2, 1), 2.0, 1e-15);
}

TEST(PropagateUi, MatchesDenseLayerMean) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0, 1);
    std::vector<CooEntry> coo;
    for (Index u = 0; u < 5; ++u) {
        for (Index i = 0; i < 4; ++i) {
            if (g(rng) > 0) coo.push_back({u, i, 1.0});
        }
    }
    const auto l = build_norm_adjacency(csr_from_coo(coo, 5, 4));
    Matrix g0(9, 3);
    for (Index i = 0; i < g0.size(); ++i) g0.data()[i] = g(rng);
    const Matrix d = l.to_dense();
    const Matrix ref = (g0 + d * g0 + d * d * g0 + d * d * d * g0) / 4.0;
    EXPECT_LT(oracle::max_abs_diff(propagate_ui(g0, l, 3), ref), 1e-12);
}

TEST(PropagateIi, Examples) {
    const auto swap = csr_from_coo({{0, 1, 1.0}, {1, 0, 1.0}}, 2, 2);
    const Matrix unit = (Matrix(2, 2) << 0.6, 0, 0, 0.8).finished();
    EXPECT_LT(oracle::max_abs_diff(propagate_ii(unit, swap, 0), unit), 1e-15);

    const Matrix out = propagate_ii(Matrix::Identity(2, 2), swap, 1);
    const double s = std::sqrt(std::sqrt(2.0));
    EXPECT_NEAR(s, 1.1892, 1e-4);
    EXPECT_LT(oracle::max_abs_diff(out, (Matrix(2, 2) << 0, 1, 1, 0).finished() / s), 1e-15);

    // skipping hops keeps the scaling
    const Matrix skip = propagate_ii(Matrix::Identity(2, 2), swap, 1, false);
    EXPECT_LT(oracle::max_abs_diff(skip, Matrix::Identity(2, 2) / s), 1e-15);

    const SparseMatrix empty(1, 1, {0, 0}, {}, {});
    EXPECT_THROW(propagate_ii(Matrix::Ones(1, 3), empty, 1), NumericError);
}

TEST(Lift, Examples) {
    const Matrix items = (Matrix(2, 2) << 1, 0, 0, 1).finished();
    EXPECT_TRUE(lift_to_users(csr_from_coo({{0, 1, 1.0}}, 1, 2), items) == items.row(1));
    EXPECT_TRUE(lift_to_users(csr_from_coo({{0, 0, 1.0}, {0, 1, 1.0}}, 1, 2), items) ==
                Matrix::Constant(1, 2, 0.5));
}

TEST(Lift, MatchesRowNormalizedOracle) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0, 1);
    Matrix r = Matrix::Zero(5, 4);
    std::vector<CooEntry> coo;
    for (Index u = 0; u < 5; ++u) {
        for (Index i = 0; i < 4; ++i) {
            if (i == u % 4 || g(rng) > 0.3) {
                r(u, i) = 1;
                coo.push_back({u, i, 1.0});
            }
        }
    }
    Matrix items(4, 3);
    for (Index i = 0; i < items.size(); ++i) items.data()[i] = g(rng);
    Matrix ref(5, 3);
    for (Index u = 0; u < 5; ++u) ref.row(u) = (r.row(u) / r.row(u).sum()) * items;
    EXPECT_LT(oracle::max_abs_diff(lift_to_users(csr_from_coo(coo, 5, 4), items), ref), 1e-14);
}

TEST(Fuse, SingleModalityIsGatedFeature) {
    ModelConfig cfg;
    cfg.dim = 3;
    cfg.modalities = {Modality::textual};
    auto p = init_params(cfg, std::vector<Index>{2}, 4, 4, 1);
    Matrix behavior = Matrix::Random(4, 3), modal = Matrix::Random(4, 3);
    FusionTrace trace;
    const std::vector<Matrix> mods{modal};
    const Matrix out = fuse(behavior, mods, fusion_weights(p), &trace);
    EXPECT_TRUE((trace.attn.array() == 1.0).all());
    const Matrix h = (behavior * p.modal[0].pref_W.transpose()).array().tanh().matrix().cwiseProduct(modal);
    EXPECT_LT(oracle::max_abs_diff(out, h), 1e-15);
}

TEST(Fuse, IdenticalModalitiesSplitEvenly) {
    ModelConfig cfg;
    cfg.dim = 3;
    auto p = init_params(cfg, std::vector<Index>{2, 2}, 4, 4, 1);
    p.modal[1].pref_W = p.modal[0].pref_W;
    const Matrix behavior = Matrix::Random(4, 3), modal = Matrix::Random(4, 3);
    FusionTrace trace;
    const std::vector<Matrix> mods{modal, modal};
    fuse(behavior, mods, fusion_weights(p), &trace);
    EXPECT_LT((trace.attn.array() - 0.5).abs().maxCoeff(), 1e-15);
}

TEST(Forward, AttentionRowsOnSimplex) {
    Fixture fx;
    ModelConfig cfg;
    cfg.dim = 8;
    auto p = params_for(cfg, fx.inputs, 3);
    for (Index i = 0; i < p.attn_q.size(); ++i) p.attn_q.data()[i] = 3.0 * (i % 2 ? 1 : -1);
    const auto out = forward(p, fx.inputs, cfg);
    EXPECT_EQ(out.final_user.rows(), fx.inputs.n_users);
    EXPECT_EQ(out.final_item.rows(), fx.inputs.n_items);
    for (const Matrix* a : {&out.attn_user, &out.attn_item}) {
        EXPECT_TRUE((a->array() >= 0).all());
        EXPECT_LT((a->rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    }
    EXPECT_TRUE(out.final_user.allFinite());
}

TEST(Forward, TextualOnlyIgnoresVisualFeatures) {
    Fixture fx;
    ModelConfig cfg;
    cfg.dim = 8;
    cfg.modalities = {Modality::textual};
    const auto p = params_for(cfg, fx.inputs, 5);
    const auto a = forward(p, fx.inputs, cfg);

    FeatureMatrix garbage = fx.data.visual;
    garbage.data = Matrix::Random(garbage.rows(), garbage.cols()).cwiseAbs() + Matrix::Constant(garbage.rows(), garbage.cols(), 0.1);
    const auto other = build_model_inputs(
        fx.split, {std::make_shared<FeatureMatrix>(garbage), std::make_shared<FeatureMatrix>(fx.data.textual)}, 4);
    const auto b = forward(p, other, cfg);
    EXPECT_TRUE(a.final_user == b.final_user);
    EXPECT_TRUE(a.final_item == b.final_item);
}

TEST(Forward, ZeroFeaturesHitNormGuard) {
    Fixture fx;
    ModelConfig cfg;
    cfg.dim = 4;
    cfg.modalities = {Modality::visual};
    cfg.use_purifier = false;
    auto p = params_for(cfg, fx.inputs, 1);
    p.modal[0].proj_W.setZero();
    ModelInputs in = fx.inputs;
    auto zero = std::make_shared<FeatureMatrix>(fx.data.visual);
    zero->data.setZero();
    for (auto& m : in.modalities) {
        if (m.modality == Modality::visual) m.features = zero;
    }
    EXPECT_THROW(forward(p, in, cfg), NumericError);
}

TEST(Forward, MissingModalityInputRejected) {
    Fixture fx;
    ModelInputs in = build_model_inputs(fx.split, {std::make_shared<FeatureMatrix>(fx.data.textual)}, 4);
    ModelConfig cfg;
    cfg.dim = 4;
    const auto p = init_params(cfg, std::vector<Index>{6, 4}, in.n_users, in.n_items, 1);
    EXPECT_THROW(forward(p, in, cfg), Error);
}

TEST(Score, DotProduct) {
    RowVector u(2), i(2), o(2);
    u << 1, 2;
    i << 3, 4;
    o << -2, 1;
    EXPECT_EQ(score(u, i), 11.0);
    EXPECT_EQ(score(u, o), 0.0);
    EXPECT_EQ(score(2 * u, i), 2 * score(u, i));
}

TEST(Config, Validate) {
    ModelConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.dim = 0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.modalities.clear();
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.ui_layers = -1;
    EXPECT_THROW(cfg.validate(), Error);
}
