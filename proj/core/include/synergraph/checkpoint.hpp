#pragma once

#include "synergraph/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace synergraph {

/// Non-owning handle on one trainable tensor.
struct NamedTensor {
    std::string name;
    Matrix* value;
};

struct StoredTensor {
    std::string name;
    Matrix value;
};

/// SGCK: magic, u32 version, u32 tensor count, then per tensor
/// u16 name length, name, u32 rows, u32 cols, f32 row-major data.
void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<StoredTensor> load_checkpoint(const std::filesystem::path& path);

/// Copies stored tensors into `tensors` by name; every name must be present
/// with a matching shape.
void restore_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);

/// Deep copy of the current values (used for best-so-far snapshots).
std::vector<Matrix> snapshot(const std::vector<NamedTensor>& tensors);
void restore(const std::vector<NamedTensor>& tensors, const std::vector<Matrix>& values);

}  // namespace synergraph
