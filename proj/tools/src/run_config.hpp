#pragma once

#include "synergraph/baselines.hpp"
#include "synergraph/model.hpp"
#include "synergraph/trainer.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace synergraph::cli {

/// Bad flag values or config documents. Maps to exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

enum class Ablation { none, no_mp, no_iiv, no_circle };

const char* to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

/// Everything one run needs. Defaults are the reference experiment settings.
struct RunConfig {
    std::string dataset = "baby";  // baby|sports|clothing|synthetic or a directory
    std::filesystem::path dataset_dir;  // empty: derived from `dataset`
    std::filesystem::path output_dir = "runs";
    std::string run_name;  // empty: derived
    ModelConfig model;
    TrainConfig train;
    std::vector<double> lr_grid;  // empty: train.lr only
    std::optional<Index> top_k;   // empty: per-dataset default
    Ablation ablation = Ablation::none;
    std::optional<BaselineKind> baseline;
    Index knn_neighbors = 20;
    SynthConfig synth;  // used when dataset == "synthetic"
    bool graph_cache = true;

    /// Applies the ablation switch to a copy of `model`.
    ModelConfig effective_model() const;
    Index effective_top_k() const;
    std::filesystem::path effective_dataset_dir() const;
    /// Dataset name, or the directory's base name for a path.
    std::string dataset_label() const;
    std::string effective_run_name() const;
    std::filesystem::path run_dir() const { return output_dir / effective_run_name(); }
    void validate() const;
};

/// Reference top-K per dataset; 10 for anything else.
Index default_top_k(const std::string& dataset);

/// Strict: unknown keys anywhere throw UsageError.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

std::vector<double> parse_double_list(const std::string& text);
std::vector<Index> parse_index_list(const std::string& text);
std::vector<Modality> parse_modalities(const std::string& text);

}  // namespace synergraph::cli
