#pragma once

#include "synergraph/evaluation.hpp"
#include "synergraph/sparse.hpp"
#include "synergraph/trainer.hpp"

#include <optional>
#include <string_view>

namespace synergraph {

enum class BaselineKind { itemknn, bprmf, lightgcn };

const char* to_string(BaselineKind kind);
std::optional<BaselineKind> parse_baseline(std::string_view name);

/// Item-based neighborhood scorer over binary training columns:
/// score(u, i) = sum over j in train(u) of sim(j, i), where each item j
/// keeps only its `k_neighbors` most similar items.
class ItemKnnScorer final : public ScoreProvider {
public:
    ItemKnnScorer(const SplitDataset& split, Index k_neighbors);

    Index n_users() const override { return interactions_.rows(); }
    Index n_items() const override { return interactions_.cols(); }
    void scores(std::span<const Index> users, Matrix& out) const override;

    /// Pruned similarity matrix (row j holds j's kept neighbors).
    const SparseMatrix& similarity() const { return similarity_; }

private:
    SparseMatrix interactions_;
    SparseMatrix similarity_;
};

/// Cosine similarity of two items' training user sets, |Ui & Uj| / sqrt(|Ui||Uj|).
double item_cosine(const SparseMatrix& interactions_t, Index i, Index j);

ItemKnnScorer train_itemknn(const SplitDataset& split, Index k_neighbors = 20);

/// ID embeddings scored by dot product, trained with BPR + embedding reg.
class BprMfModel final : public Trainable {
public:
    BprMfModel(Index n_users, Index n_items, Index dim, double reg_lambda, std::uint64_t seed);

    std::vector<NamedTensor> parameters() override;
    LossBreakdown loss(const BatchTriples& batch) override;
    LossBreakdown loss_and_gradients(const BatchTriples& batch, std::vector<Matrix>& grads) override;
    EmbeddingScorer scorer() override { return EmbeddingScorer(user_emb_, item_emb_); }

private:
    LossBreakdown run(const BatchTriples& batch, std::vector<Matrix>* grads);

    double reg_lambda_;
    Matrix user_emb_;
    Matrix item_emb_;
};

/// ID embeddings averaged over layers of normalized-adjacency propagation.
/// With zero layers it computes exactly what BprMfModel computes.
class LightGcnModel final : public Trainable {
public:
    LightGcnModel(const SparseMatrix& norm_adjacency, Index n_users, Index n_items, Index dim, int n_layers,
                  double reg_lambda, std::uint64_t seed);

    std::vector<NamedTensor> parameters() override;
    LossBreakdown loss(const BatchTriples& batch) override;
    LossBreakdown loss_and_gradients(const BatchTriples& batch, std::vector<Matrix>& grads) override;
    EmbeddingScorer scorer() override;

private:
    LossBreakdown run(const BatchTriples& batch, std::vector<Matrix>* grads);
    Matrix propagated() const;

    const SparseMatrix& adjacency_;
    int n_layers_;
    double reg_lambda_;
    Matrix user_emb_;
    Matrix item_emb_;
};

/// Baselines train with plain Adam: the config's weight decay is forced to 0.
TrainConfig baseline_train_config(TrainConfig cfg);

struct TrainedBaseline {
    FitResult fit;
    EmbeddingScorer scorer;
};

TrainedBaseline train_bprmf(const SplitDataset& split, const TrainConfig& cfg, Index dim = 64);
TrainedBaseline train_lightgcn(const SplitDataset& split, const SparseMatrix& norm_adjacency, const TrainConfig& cfg,
                               int n_layers = 2, Index dim = 64);

}  // namespace synergraph
