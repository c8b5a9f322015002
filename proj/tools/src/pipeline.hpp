#pragma once

#include "run_config.hpp"

#include "synergraph/baselines.hpp"
#include "synergraph/evaluation.hpp"
#include "synergraph/model.hpp"
#include "synergraph/trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace synergraph::cli {

/// A split dataset plus whatever feature matrices were found for it.
struct LoadedData {
    SplitDataset split;
    std::shared_ptr<const FeatureMatrix> visual;
    std::shared_ptr<const FeatureMatrix> textual;
};

/// Synthetic fixture or a directory holding interactions.tsv, visual.sgfm,
/// textual.sgfm and optionally item_vocab.tsv. When the vocabulary is present
/// feature rows follow it and are reordered to the interaction encoding.
LoadedData load_data(const RunConfig& cfg);

/// Interaction operators plus one graph per requested modality.
ModelInputs make_inputs(const RunConfig& cfg, const LoadedData& data);

/// A trained model kept alive together with the inputs it references.
struct TrainedRun {
    std::unique_ptr<ModelInputs> inputs;
    std::unique_ptr<Trainable> model;                // null for ItemKNN
    std::optional<ItemKnnScorer> knn;
    FitResult fit;
    double lr = 0.0;

    const ScoreProvider& scorer();

private:
    std::optional<EmbeddingScorer> cached_;
};

/// Builds the model described by `cfg` with fresh parameters.
std::unique_ptr<Trainable> make_model(const RunConfig& cfg, const ModelInputs& inputs);

struct LrTrial {
    double lr = 0.0;
    double best_val_recall = 0.0;
    int best_epoch = 0;
    bool diverged = false;
};

/// Trains once per learning rate and keeps the best-validation model.
TrainedRun train_run(const RunConfig& cfg, const LoadedData& data, std::vector<LrTrial>* trials, bool verbose);

/// Test-split report of a trained run, labeled with the config.
MetricsReport test_report(const RunConfig& cfg, const LoadedData& data, TrainedRun& run);

/// Full `train` pipeline: trains, writes checkpoint.sgck, history.jsonl,
/// config.resolved.json, report.json and per_user.csv under run_dir(). The
/// report is computed from the reloaded checkpoint, so `evaluate` on the
/// directory reproduces it exactly.
MetricsReport train_and_save(const RunConfig& cfg, bool verbose);

/// Rebuilds the model from `run_dir/config.resolved.json` and
/// `checkpoint` (default `run_dir/checkpoint.sgck`) and evaluates it.
MetricsReport evaluate_run(const std::filesystem::path& run_dir, const std::optional<std::filesystem::path>& checkpoint,
                           Phase phase);

/// Two-column summary table with aligned numbers.
void print_table(std::ostream& out, const std::vector<std::pair<std::string, MetricsReport>>& rows);

/// `label,recall,ndcg` CSV with the given header for the label column.
void write_metric_csv(const std::filesystem::path& path, const std::string& label,
                      const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace synergraph::cli
