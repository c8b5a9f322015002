#pragma once

#include "synergraph/checkpoint.hpp"
#include "synergraph/common.hpp"
#include "synergraph/dataset.hpp"
#include "synergraph/modality_graph.hpp"
#include "synergraph/sparse.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace synergraph {

struct ModelConfig {
    Index dim = 64;
    int ui_layers = 2;
    int ii_layers = 1;
    std::vector<Modality> modalities{Modality::visual, Modality::textual};
    bool use_purifier = true;
    bool use_item_item = true;
    bool use_circle = true;

    void validate() const;
};

/// Weights owned by one modality: purifier projection and gate, plus the
/// behavior-to-preference transform used by fusion.
struct ModalityParams {
    Modality modality = Modality::textual;
    Matrix proj_W;  // dim x d_m
    Matrix proj_b;  // 1 x dim
    Matrix gate_W;  // dim x dim
    Matrix gate_b;  // 1 x dim
    Matrix pref_W;  // dim x dim
    Matrix pref_b;  // 1 x dim
};

struct ModelParams {
    Matrix user_emb;  // |U| x dim
    Matrix item_emb;  // |I| x dim
    std::vector<ModalityParams> modal;  // aligned with ModelConfig::modalities
    Matrix attn_W;  // dim x dim, shared across modalities
    Matrix attn_b;  // 1 x dim
    Matrix attn_q;  // 1 x dim

    /// Stable ordering used by the optimizer, checkpoints and gradient checks.
    std::vector<NamedTensor> tensors();
    ModelParams zeros_like() const;
};

/// One modality's frozen inputs: raw features, its normalized item-item graph
/// and that graph's transpose (the graph is not symmetric after top-K).
struct ModalityInput {
    Modality modality = Modality::textual;
    std::shared_ptr<const FeatureMatrix> features;
    SparseMatrix graph;
    SparseMatrix graph_t;
};

/// Everything the forward pass reads but never trains.
struct ModelInputs {
    Index n_users = 0;
    Index n_items = 0;
    SparseMatrix interactions;    // R over train edges
    SparseMatrix norm_adjacency;  // symmetric normalized bipartite adjacency
    SparseMatrix user_mean;       // row-normalized R
    SparseMatrix user_mean_t;
    std::vector<ModalityInput> modalities;

    const ModalityInput& modality(Modality m) const;
    bool has(Modality m) const;
};

/// Builds the interaction operators and one top-K graph per supplied feature
/// matrix. With `cache_dir` set, graphs go through the SGAD cache.
ModelInputs build_model_inputs(const SplitDataset& split, std::vector<std::shared_ptr<const FeatureMatrix>> features,
                               Index top_k, const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

struct ForwardOutput {
    Matrix final_user;
    Matrix final_item;
    Matrix behavior_user;
    Matrix behavior_item;
    std::vector<Matrix> item_modal;  // per modality, after item-item propagation and scaling
    std::vector<Matrix> user_modal;  // per modality, lifted to users
    Matrix side_user;                // fused side features
    Matrix side_item;
    Matrix attn_user;  // |U| x |M|, rows on the simplex
    Matrix attn_item;  // |I| x |M|
};

/// Intermediates of one fusion block kept for the backward pass.
struct FusionTrace {
    std::vector<Matrix> pref;    // tanh(B W_pref^T + b_pref)
    std::vector<Matrix> gated;   // pref .* modal
    std::vector<Matrix> hidden;  // tanh(gated W_attn^T + b_attn)
    Matrix attn;
    Matrix side;
};

struct ModalityTrace {
    Matrix projected;   // E W_proj^T + b_proj
    Matrix gate;        // tanh(projected W_gate^T + b_gate), empty without purifier
    Matrix propagated;  // before Frobenius scaling
    double norm = 0.0;  // Frobenius norm of `propagated`
};

struct ForwardTrace {
    std::vector<ModalityTrace> modal;
    FusionTrace user_fusion;
    FusionTrace item_fusion;
    double side_user_norm = 0.0;
    double side_item_norm = 0.0;
};

/// Xavier-uniform weights, zero biases, N(0, 0.01) ID embeddings.
ModelParams init_params(const ModelConfig& cfg, std::span<const Index> modality_dims, Index n_users,
                        Index n_items, std::uint64_t seed);

/// Modality purifier: item_emb .* tanh(gate(proj(E))), or proj(E) alone
/// when the purifier is disabled.
Matrix purify(const Matrix& features, const Matrix& item_emb, const ModalityParams& params, bool use_purifier,
              ModalityTrace* trace = nullptr);

/// Mean of L^l * G0 over l = 0..n_layers.
Matrix propagate_ui(const Matrix& g0, const SparseMatrix& adjacency, int n_layers);

/// n_layers linear hops over the item graph (skipped when `use_item_item` is
/// false), then division by the square root of the Frobenius norm.
Matrix propagate_ii(const Matrix& item_modal, const SparseMatrix& graph, int n_layers, bool use_item_item = true,
                    ModalityTrace* trace = nullptr);

/// Mean of each user's training items' rows.
Matrix lift_to_users(const SparseMatrix& interactions, const Matrix& item_modal);

struct FusionWeights {
    std::vector<const Matrix*> pref_W;
    std::vector<const Matrix*> pref_b;
    const Matrix* attn_W = nullptr;
    const Matrix* attn_b = nullptr;
    const Matrix* attn_q = nullptr;
};

FusionWeights fusion_weights(const ModelParams& params);

/// Behavior-gated attention fusion over modalities. Returns the fused side
/// features; `trace` receives attention weights and intermediates.
Matrix fuse(const Matrix& behavior, std::span<const Matrix> modal, const FusionWeights& weights,
            FusionTrace* trace = nullptr);

ForwardOutput forward(const ModelParams& params, const ModelInputs& inputs, const ModelConfig& cfg,
                      ForwardTrace* trace = nullptr);

/// Upstream gradients flowing into the forward outputs.
struct ForwardGrads {
    Matrix final_user;
    Matrix final_item;
    Matrix behavior_user;            // may be empty
    Matrix side_item;                // may be empty
    std::vector<Matrix> item_modal;  // may be empty or hold empty entries
};

/// Reverse pass of `forward`; accumulates into `grads` (same layout as params).
void forward_backward(const ModelParams& params, const ModelInputs& inputs, const ModelConfig& cfg,
                      const ForwardOutput& out, const ForwardTrace& trace, const ForwardGrads& upstream,
                      ModelParams& grads);

/// Predicted preference: dot product of final user and item rows.
double score(const Eigen::Ref<const RowVector>& user, const Eigen::Ref<const RowVector>& item);

}  // namespace synergraph
