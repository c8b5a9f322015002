#include "synergraph/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace synergraph {

const char* to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::itemknn: return "itemknn";
        case BaselineKind::bprmf: return "bprmf";
        case BaselineKind::lightgcn: return "lightgcn";
    }
    return "?";
}

std::optional<BaselineKind> parse_baseline(std::string_view name) {
    if (name == "itemknn") return BaselineKind::itemknn;
    if (name == "bprmf") return BaselineKind::bprmf;
    if (name == "lightgcn") return BaselineKind::lightgcn;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// ItemKNN

double item_cosine(const SparseMatrix& rt, Index i, Index j) {
    const auto* ci = rt.col_indices().data();
    Index a = rt.row_begin(i), b = rt.row_begin(j);
    double common = 0.0;
    while (a < rt.row_end(i) && b < rt.row_end(j)) {
        if (ci[a] == ci[b]) {
            ++common;
            ++a;
            ++b;
        } else if (ci[a] < ci[b]) {
            ++a;
        } else {
            ++b;
        }
    }
    const double denom = std::sqrt(static_cast<double>(rt.row_nnz(i)) * static_cast<double>(rt.row_nnz(j)));
    return denom > 0.0 ? common / denom : 0.0;
}

ItemKnnScorer::ItemKnnScorer(const SplitDataset& split, Index k_neighbors)
    : interactions_(build_interaction_matrix(split)) {
    if (k_neighbors < 1) throw Error("itemknn: k_neighbors must be positive");
    const SparseMatrix rt = interactions_.transpose();
    const Index ni = interactions_.cols();

    std::vector<Index> offsets{0};
    std::vector<std::int32_t> idx;
    std::vector<double> vals;
    std::vector<double> counts(static_cast<std::size_t>(ni), 0.0);
    std::vector<std::int32_t> touched;
    for (Index j = 0; j < ni; ++j) {
        touched.clear();
        for (Index k = rt.row_begin(j); k < rt.row_end(j); ++k) {
            const Index u = rt.col_indices()[static_cast<std::size_t>(k)];
            for (Index q = interactions_.row_begin(u); q < interactions_.row_end(u); ++q) {
                const auto i = interactions_.col_indices()[static_cast<std::size_t>(q)];
                if (i == j) continue;
                if (counts[static_cast<std::size_t>(i)] == 0.0) touched.push_back(i);
                counts[static_cast<std::size_t>(i)] += 1.0;
            }
        }
        std::vector<std::pair<double, std::int32_t>> cand;
        cand.reserve(touched.size());
        for (auto i : touched) {
            const double denom = std::sqrt(static_cast<double>(rt.row_nnz(i)) * static_cast<double>(rt.row_nnz(j)));
            cand.emplace_back(counts[static_cast<std::size_t>(i)] / denom, i);
            counts[static_cast<std::size_t>(i)] = 0.0;
        }
        const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k_neighbors), cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                          [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
        cand.resize(keep);
        std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
        for (const auto& [s, i] : cand) {
            idx.push_back(i);
            vals.push_back(s);
        }
        offsets.push_back(static_cast<Index>(idx.size()));
    }
    similarity_ = SparseMatrix(ni, ni, std::move(offsets), std::move(idx), std::move(vals));
}

void ItemKnnScorer::scores(std::span<const Index> users, Matrix& out) const {
    out.setZero(static_cast<Index>(users.size()), n_items());
    for (std::size_t r = 0; r < users.size(); ++r) {
        const Index u = users[r];
        for (Index k = interactions_.row_begin(u); k < interactions_.row_end(u); ++k) {
            const Index j = interactions_.col_indices()[static_cast<std::size_t>(k)];
            for (Index q = similarity_.row_begin(j); q < similarity_.row_end(j); ++q) {
                out(static_cast<Index>(r), similarity_.col_indices()[static_cast<std::size_t>(q)]) +=
                    similarity_.values()[static_cast<std::size_t>(q)];
            }
        }
    }
}

ItemKnnScorer train_itemknn(const SplitDataset& split, Index k_neighbors) { return ItemKnnScorer(split, k_neighbors); }

// ---------------------------------------------------------------------------
// Embedding baselines

namespace {

void init_embeddings(Matrix& users, Matrix& items, Index n_users, Index n_items, Index dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 0.01);
    users.resize(n_users, dim);
    items.resize(n_items, dim);
    for (Index r = 0; r < n_users; ++r) {
        for (Index c = 0; c < dim; ++c) users(r, c) = dist(rng);
    }
    for (Index r = 0; r < n_items; ++r) {
        for (Index c = 0; c < dim; ++c) items(r, c) = dist(rng);
    }
}

LossBreakdown to_breakdown(const BprTerms& t) {
    LossBreakdown lb;
    lb.bpr = t.bpr;
    lb.reg = t.reg;
    lb.total = total_loss({t.bpr, t.reg, 0.0, 0.0}, 0.0, false);
    return lb;
}

}  // namespace

BprMfModel::BprMfModel(Index n_users, Index n_items, Index dim, double reg_lambda, std::uint64_t seed)
    : reg_lambda_(reg_lambda) {
    init_embeddings(user_emb_, item_emb_, n_users, n_items, dim, seed);
}

std::vector<NamedTensor> BprMfModel::parameters() { return {{"user_emb", &user_emb_}, {"item_emb", &item_emb_}}; }

LossBreakdown BprMfModel::loss(const BatchTriples& batch) { return run(batch, nullptr); }

LossBreakdown BprMfModel::loss_and_gradients(const BatchTriples& batch, std::vector<Matrix>& grads) {
    return run(batch, &grads);
}

LossBreakdown BprMfModel::run(const BatchTriples& batch, std::vector<Matrix>* grads) {
    if (!grads) {
        return to_breakdown(accumulate_bpr_terms(user_emb_, item_emb_, user_emb_, item_emb_, batch, reg_lambda_,
                                                 nullptr, nullptr, nullptr, nullptr));
    }
    Matrix gfu = Matrix::Zero(user_emb_.rows(), user_emb_.cols());
    Matrix gfi = Matrix::Zero(item_emb_.rows(), item_emb_.cols());
    Matrix gu = gfu;
    Matrix gi = gfi;
    const BprTerms t =
        accumulate_bpr_terms(user_emb_, item_emb_, user_emb_, item_emb_, batch, reg_lambda_, &gfu, &gfi, &gu, &gi);
    gu += gfu;
    gi += gfi;
    grads->clear();
    grads->push_back(std::move(gu));
    grads->push_back(std::move(gi));
    return to_breakdown(t);
}

LightGcnModel::LightGcnModel(const SparseMatrix& norm_adjacency, Index n_users, Index n_items, Index dim,
                             int n_layers, double reg_lambda, std::uint64_t seed)
    : adjacency_(norm_adjacency), n_layers_(n_layers), reg_lambda_(reg_lambda) {
    if (n_layers < 0) throw Error("lightgcn: layer count must be non-negative");
    if (norm_adjacency.rows() != n_users + n_items) throw ShapeError("lightgcn: adjacency does not match the dataset");
    init_embeddings(user_emb_, item_emb_, n_users, n_items, dim, seed);
}

std::vector<NamedTensor> LightGcnModel::parameters() { return {{"user_emb", &user_emb_}, {"item_emb", &item_emb_}}; }

Matrix LightGcnModel::propagated() const {
    Matrix g0(user_emb_.rows() + item_emb_.rows(), user_emb_.cols());
    g0.topRows(user_emb_.rows()) = user_emb_;
    g0.bottomRows(item_emb_.rows()) = item_emb_;
    return propagate_ui(g0, adjacency_, n_layers_);
}

EmbeddingScorer LightGcnModel::scorer() {
    const Matrix g = propagated();
    return EmbeddingScorer(g.topRows(user_emb_.rows()), g.bottomRows(item_emb_.rows()));
}

LossBreakdown LightGcnModel::loss(const BatchTriples& batch) { return run(batch, nullptr); }

LossBreakdown LightGcnModel::loss_and_gradients(const BatchTriples& batch, std::vector<Matrix>& grads) {
    return run(batch, &grads);
}

LossBreakdown LightGcnModel::run(const BatchTriples& batch, std::vector<Matrix>* grads) {
    const Index nu = user_emb_.rows();
    const Index ni = item_emb_.rows();
    const Matrix g = propagated();
    const Matrix fu = g.topRows(nu);
    const Matrix fi = g.bottomRows(ni);
    if (!grads) {
        return to_breakdown(
            accumulate_bpr_terms(fu, fi, user_emb_, item_emb_, batch, reg_lambda_, nullptr, nullptr, nullptr, nullptr));
    }
    Matrix gfu = Matrix::Zero(nu, user_emb_.cols());
    Matrix gfi = Matrix::Zero(ni, item_emb_.cols());
    Matrix gu = gfu;
    Matrix gi = gfi;
    const BprTerms t = accumulate_bpr_terms(fu, fi, user_emb_, item_emb_, batch, reg_lambda_, &gfu, &gfi, &gu, &gi);
    // Symmetric adjacency: the adjoint of the layer mean is the layer mean.
    Matrix gf(nu + ni, user_emb_.cols());
    gf.topRows(nu) = gfu;
    gf.bottomRows(ni) = gfi;
    const Matrix g0 = propagate_ui(gf, adjacency_, n_layers_);
    gu += g0.topRows(nu);
    gi += g0.bottomRows(ni);
    grads->clear();
    grads->push_back(std::move(gu));
    grads->push_back(std::move(gi));
    return to_breakdown(t);
}

TrainConfig baseline_train_config(TrainConfig cfg) {
    cfg.weight_decay = 0.0;
    return cfg;
}

TrainedBaseline train_bprmf(const SplitDataset& split, const TrainConfig& cfg, Index dim) {
    BprMfModel model(split.n_users(), split.n_items(), dim, cfg.loss.reg_lambda, cfg.seed);
    FitResult fr = fit(baseline_train_config(cfg), model, split);
    return {std::move(fr), model.scorer()};
}

TrainedBaseline train_lightgcn(const SplitDataset& split, const SparseMatrix& norm_adjacency, const TrainConfig& cfg,
                               int n_layers, Index dim) {
    LightGcnModel model(norm_adjacency, split.n_users(), split.n_items(), dim, n_layers, cfg.loss.reg_lambda, cfg.seed);
    FitResult fr = fit(baseline_train_config(cfg), model, split);
    return {std::move(fr), model.scorer()};
}

}  // namespace synergraph
