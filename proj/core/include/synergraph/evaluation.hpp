#pragma once

#include "synergraph/common.hpp"
#include "synergraph/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace synergraph {

/// Produces dense score rows for a set of users.
class ScoreProvider {
public:
    virtual ~ScoreProvider() = default;
    virtual Index n_users() const = 0;
    virtual Index n_items() const = 0;
    /// out(r, i) = score of item i for users[r]; out is resized by the callee.
    virtual void scores(std::span<const Index> users, Matrix& out) const = 0;
};

/// Dot-product scores from final user and item embeddings.
class EmbeddingScorer final : public ScoreProvider {
public:
    EmbeddingScorer(Matrix users, Matrix items);
    Index n_users() const override { return users_.rows(); }
    Index n_items() const override { return items_.rows(); }
    void scores(std::span<const Index> users, Matrix& out) const override;

private:
    Matrix users_;
    Matrix items_;
};

/// Uniform random scores; each user's row depends only on (seed, user).
class RandomScorer final : public ScoreProvider {
public:
    RandomScorer(Index n_users, Index n_items, std::uint64_t seed)
        : n_users_(n_users), n_items_(n_items), seed_(seed) {}
    Index n_users() const override { return n_users_; }
    Index n_items() const override { return n_items_; }
    void scores(std::span<const Index> users, Matrix& out) const override;

private:
    Index n_users_;
    Index n_items_;
    std::uint64_t seed_;
};

/// Per-user sorted item lists, e.g. exclusions or ground truth.
using ItemSets = std::vector<std::vector<std::int32_t>>;

struct RankingResult {
    Index k = 0;
    std::vector<Index> users;
    std::vector<std::vector<std::int32_t>> lists;  // aligned with `users`
};

/// Top-K non-excluded items per user, ties to the lower item index. Users
/// default to all users. Lists are shorter than K when candidates run out.
RankingResult topk_rank(const ScoreProvider& scores, const ItemSets& exclusions, Index k,
                        std::span<const Index> users = {});

/// Mean over users with non-empty ground truth of |hits| / |truth|.
double recall_at_k(const RankingResult& result, const ItemSets& ground_truth, Index k = 20);

/// Binary-relevance NDCG@K averaged over users with non-empty ground truth.
double ndcg_at_k(const RankingResult& result, const ItemSets& ground_truth, Index k = 20);

enum class Phase { val, test };

struct MetricsReport {
    double recall = 0.0;
    double ndcg = 0.0;
    Index k = 20;
    std::string split;
    std::string model;
    std::string dataset;
    std::uint64_t seed = 0;
    std::vector<Index> users;
    std::vector<double> user_recall;
    std::vector<double> user_ndcg;

    Index n_users() const { return static_cast<Index>(users.size()); }
};

/// Validation excludes train positives; test excludes train and validation
/// positives. Ground truth is the phase's edges.
MetricsReport evaluate_model(const ScoreProvider& scores, const SplitDataset& split, Phase phase, Index k = 20);

/// Mean per-user AUC of train positives against every non-train item.
double train_auc(const ScoreProvider& scores, const SplitDataset& split);

/// Two-sided paired bootstrap p-value for mean(a - b) != 0, reported as
/// (count + 1) / (n_boot + 1).
double compare_significance(std::span<const double> a, std::span<const double> b, int n_boot, std::uint64_t seed);

void write_report_json(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_report_json(const std::filesystem::path& path);

/// `user_index,recall,ndcg` with a header line.
void write_per_user_csv(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_per_user_csv(const std::filesystem::path& path);

}  // namespace synergraph
