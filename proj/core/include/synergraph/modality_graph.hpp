#pragma once

#include "synergraph/common.hpp"
#include "synergraph/dataset.hpp"
#include "synergraph/sparse.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>

namespace synergraph {

/// Frozen item-item affinity graph for one modality.
struct ModalityGraph {
    Modality modality = Modality::textual;
    SparseMatrix adjacency;
};

/// Keeps, per row, the K most cosine-similar other items (diagonal excluded,
/// ties to the smaller column). Values are the raw cosines.
SparseMatrix cosine_topk(const FeatureMatrix& features, Index k);

/// D^-1/2 S D^-1/2 with D = diag(row sums of S). Zero row sums give zero rows.
SparseMatrix sym_normalize(const SparseMatrix& s);

ModalityGraph build_modality_graph(const FeatureMatrix& features, Index k);

/// Stable 64-bit FNV-1a digest of the feature matrix, used as a cache key.
std::uint64_t feature_digest(const FeatureMatrix& features);

/// SGAD cache file: magic, u32 version, u32 n, u64 nnz, CSR arrays.
void save_graph(const std::filesystem::path& path, const SparseMatrix& graph);
SparseMatrix load_graph(const std::filesystem::path& path);

/// Loads `cache_dir/<digest>_<modality>_k<K>.sgad` if present, otherwise
/// builds the graph and writes it there.
ModalityGraph cached_modality_graph(const FeatureMatrix& features, Index k,
                                    const std::filesystem::path& cache_dir);

}  // namespace synergraph
