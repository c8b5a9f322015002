#pragma once

#include "synergraph/checkpoint.hpp"
#include "synergraph/common.hpp"
#include "synergraph/dataset.hpp"
#include "synergraph/evaluation.hpp"
#include "synergraph/losses.hpp"
#include "synergraph/model.hpp"
#include "synergraph/optimizer.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace synergraph {

struct BatchTriples {
    std::vector<std::int32_t> users;
    std::vector<std::int32_t> pos_items;
    std::vector<std::int32_t> neg_items;

    Index size() const { return static_cast<Index>(users.size()); }
};

struct LossSettings {
    double reg_lambda = 1e-4;
    CircleParams circle;
};

struct TrainConfig {
    double lr = 1e-3;
    Index batch_size = 1024;
    int epochs = 200;
    double weight_decay = 1e-5;
    std::uint64_t seed = 123;
    LossSettings loss;
    int early_stop_patience = 20;  // evaluations without improvement
    int eval_every = 5;
    Index eval_k = 20;

    void validate() const;
};

struct LossBreakdown {
    double total = 0.0;
    double bpr = 0.0;
    double reg = 0.0;
    double circle_textual = 0.0;
    double circle_visual = 0.0;
};

/// A model the trainer can optimize: a fixed list of parameter tensors, a
/// batch loss with exact gradients, and final embeddings for ranking.
class Trainable {
public:
    virtual ~Trainable() = default;
    virtual std::vector<NamedTensor> parameters() = 0;
    virtual LossBreakdown loss(const BatchTriples& batch) = 0;
    /// `grads` is resized to align with parameters() and overwritten.
    virtual LossBreakdown loss_and_gradients(const BatchTriples& batch, std::vector<Matrix>& grads) = 0;
    virtual EmbeddingScorer scorer() = 0;
};

/// The full multimodal graph model over fixed inputs.
class SynerGraphModel final : public Trainable {
public:
    SynerGraphModel(ModelConfig cfg, const ModelInputs& inputs, LossSettings loss, std::uint64_t seed);

    std::vector<NamedTensor> parameters() override { return params_.tensors(); }
    LossBreakdown loss(const BatchTriples& batch) override;
    LossBreakdown loss_and_gradients(const BatchTriples& batch, std::vector<Matrix>& grads) override;
    EmbeddingScorer scorer() override;

    ModelParams& params() { return params_; }
    const ModelConfig& config() const { return cfg_; }
    ForwardOutput forward_pass() const { return forward(params_, inputs_, cfg_); }

private:
    LossBreakdown run(const BatchTriples& batch, std::vector<Matrix>* grads);

    ModelConfig cfg_;
    const ModelInputs& inputs_;
    LossSettings loss_;
    ModelParams params_;
};

/// Shuffles training edges and attaches one uniformly drawn non-train item
/// to each; throws SamplingError after 100 rejected draws.
class BatchSampler {
public:
    BatchSampler(const SplitDataset& split, Index batch_size);
    std::vector<BatchTriples> epoch(std::mt19937_64& rng) const;

private:
    const SplitDataset& split_;
    Index batch_size_;
    std::vector<Edge> train_;
};

std::vector<BatchTriples> sample_batches(const SplitDataset& split, Index batch_size, std::mt19937_64& rng);

/// Sums BPR and embedding regularization over a batch of dot-product
/// scores. Gradients are scattered into full-table matrices (pre-sized).
struct BprTerms {
    double bpr = 0.0;
    double reg = 0.0;
};
BprTerms accumulate_bpr_terms(const Matrix& final_user, const Matrix& final_item, const Matrix& id_user,
                              const Matrix& id_item, const BatchTriples& batch, double lambda, Matrix* g_final_user,
                              Matrix* g_final_item, Matrix* g_id_user, Matrix* g_id_item);

struct EpochRecord {
    int epoch = 0;
    LossBreakdown loss;  // per-sample means of bpr/reg over the epoch; circle averaged per batch
    std::optional<double> val_recall;
    std::optional<double> val_ndcg;
};

struct FitResult {
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_recall = -1.0;
    bool diverged = false;
    std::string message;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Epoch loop with AdamW, periodic validation Recall@K, best-checkpoint
/// tracking and early stopping. On return the model holds the
/// best-validation parameters (or the last finite ones after divergence).
FitResult fit(const TrainConfig& cfg, Trainable& model, const SplitDataset& split, const EpochCallback& on_epoch = {});

/// JSON-lines history writer.
void write_history_jsonl(const std::filesystem::path& path, const std::vector<EpochRecord>& history);
std::string history_line(const EpochRecord& record);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::vector<std::pair<std::string, double>> per_tensor;
};

using GradientMutation = std::function<void(std::vector<Matrix>&)>;

/// Compares analytic gradients with central differences of step `eps` for
/// every entry of every parameter tensor. Error per tensor is
/// |g - fd|_2 / max(|g|_2, |fd|_2); `mutate` lets tests corrupt the
/// analytic gradients.
GradCheckReport grad_check(Trainable& model, const BatchTriples& batch, double eps,
                           const GradientMutation& mutate = {});

/// Overwrites every parameter entry with N(0, stddev) draws. Gradient checks
/// run at such a point: at initialization the zero biases sit where the
/// modality softmax makes their gradient cancel almost exactly.
void randomize_parameters(Trainable& model, std::uint64_t seed, double stddev);

/// The 6-user / 8-item / d=4 fixture with both modalities and every path
/// switched on, plus a fixed batch touching every user. Models built from it
/// should be moved to `param_seed` / `param_stddev` with randomize_parameters.
struct GradCheckFixture {
    SplitDataset split;
    ModelInputs inputs;
    ModelConfig model;
    LossSettings loss;
    BatchTriples batch;
    std::uint64_t param_seed = 5;
    double param_stddev = 0.3;
};
GradCheckFixture make_grad_check_fixture(std::uint64_t seed = 7);

}  // namespace synergraph
