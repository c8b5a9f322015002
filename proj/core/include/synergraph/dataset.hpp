#pragma once

#include "synergraph/common.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace synergraph {

struct InteractionRecord {
    std::string user;
    std::string item;
    std::optional<std::int64_t> timestamp;
};

/// Raw interaction rows, deduplicated on (user, item).
struct InteractionTable {
    std::vector<InteractionRecord> rows;
};

/// Bidirectional raw-id <-> dense-index map. Dense indices are contiguous from 0.
class Vocabulary {
public:
    /// Returns the dense index of `raw`, inserting it if unseen.
    Index intern(const std::string& raw);

    std::optional<Index> find(const std::string& raw) const;
    const std::string& raw_id(Index dense) const { return raw_.at(static_cast<std::size_t>(dense)); }
    Index size() const { return static_cast<Index>(raw_.size()); }
    const std::vector<std::string>& raw_ids() const { return raw_; }

private:
    std::vector<std::string> raw_;
    std::unordered_map<std::string, Index> index_;
};

struct Edge {
    std::int32_t user;
    std::int32_t item;
    friend bool operator==(const Edge&, const Edge&) = default;
};

struct InteractionDataset {
    Index n_users = 0;
    Index n_items = 0;
    std::vector<Edge> edges;
    Vocabulary users;
    Vocabulary items;

    /// 1 - |edges| / (n_users * n_items).
    double sparsity() const;
};

enum class SplitLabel : std::uint8_t { train, val, test };

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

/// Per-edge train/val/test assignment plus per-user item lists for each phase.
class SplitDataset {
public:
    SplitDataset(InteractionDataset base, std::vector<SplitLabel> assignment);

    const InteractionDataset& base() const { return base_; }
    const std::vector<SplitLabel>& assignment() const { return assignment_; }
    Index n_users() const { return base_.n_users; }
    Index n_items() const { return base_.n_items; }

    /// Edges carrying `label`, in dataset order.
    std::vector<Edge> edges(SplitLabel label) const;

    /// Sorted item indices of user `u` in the given phase.
    std::span<const std::int32_t> items(SplitLabel label, Index u) const;

    /// True iff (u, i) is a training edge.
    bool is_train(Index u, Index i) const;

    Index count(SplitLabel label) const;

private:
    InteractionDataset base_;
    std::vector<SplitLabel> assignment_;
    // offsets_[phase] has n_users+1 entries into items_[phase].
    std::vector<Index> offsets_[3];
    std::vector<std::int32_t> items_[3];
};

/// Dense per-item modality features; row r belongs to the item with dense index r.
struct FeatureMatrix {
    Modality modality = Modality::textual;
    Matrix data;

    Index rows() const { return data.rows(); }
    Index cols() const { return data.cols(); }
};

/// Parses `user<TAB>item[<TAB>timestamp]` lines. Duplicate (user, item) pairs
/// collapse to the first occurrence carrying the earliest timestamp.
InteractionTable load_interactions(const std::filesystem::path& path);
InteractionTable parse_interactions(std::string_view text);

/// Dense ids in first-appearance order.
InteractionDataset encode_ids(const InteractionTable& table);

/// Per-user seeded shuffle, then floor(n*train) / floor(n*val) / remainder.
SplitDataset user_split(const InteractionDataset& dataset, SplitRatios ratios, std::uint64_t seed);

/// Reads an SGFM file and checks it has `expected_items` rows.
FeatureMatrix load_feature_matrix(const std::filesystem::path& path, Index expected_items,
                                  Modality modality);
void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& features);

/// `raw_id<TAB>dense_index` per line, in dense order.
void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);

/// Writes the train+val+test edges back out as an interactions TSV (raw ids).
void write_interactions(const std::filesystem::path& path, const InteractionDataset& dataset);

struct SynthConfig {
    Index n_users = 50;
    Index n_items = 40;
    Index edges_per_user = 5;
    Index visual_dim = 8;
    Index textual_dim = 8;
    std::uint64_t seed = 1;
};

struct SyntheticData {
    InteractionDataset dataset;
    FeatureMatrix visual;
    FeatureMatrix textual;
    /// Latent cluster of each item (test introspection only).
    std::vector<int> item_cluster;
};

/// Clustered fixture: users prefer items of their own latent cluster with
/// probability 0.9; features are cluster centroids plus Gaussian noise, with
/// the visual modality noisier than the textual one.
SyntheticData synth_dataset(const SynthConfig& config);

/// Number of latent clusters used by synth_dataset for `n_items`.
int synth_cluster_count(Index n_items);

}  // namespace synergraph
