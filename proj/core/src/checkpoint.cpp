#include "synergraph/checkpoint.hpp"

#include "binary_io.hpp"

#include <limits>
#include <unordered_map>

namespace synergraph {
namespace {
constexpr std::string_view kCheckpointMagic = "SGCK";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
    detail::BinaryWriter out(path);
    out.bytes(kCheckpointMagic);
    out.le<std::uint32_t>(kCheckpointVersion);
    out.le<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        if (t.name.size() > std::numeric_limits<std::uint16_t>::max()) throw Error("tensor name too long");
        out.le<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
        out.bytes(t.name);
        out.le<std::uint32_t>(static_cast<std::uint32_t>(t.value->rows()));
        out.le<std::uint32_t>(static_cast<std::uint32_t>(t.value->cols()));
        for (Index r = 0; r < t.value->rows(); ++r) {
            for (Index c = 0; c < t.value->cols(); ++c) out.f32(static_cast<float>((*t.value)(r, c)));
        }
    }
    out.finish();
}

std::vector<StoredTensor> load_checkpoint(const std::filesystem::path& path) {
    detail::BinaryReader in(path);
    in.expect_magic(kCheckpointMagic);
    const auto version = in.le<std::uint32_t>();
    if (version != kCheckpointVersion) throw LoadError(path.string() + ": unsupported SGCK version");
    const auto count = in.le<std::uint32_t>();
    std::vector<StoredTensor> out;
    out.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
        StoredTensor t;
        t.name = in.bytes(in.le<std::uint16_t>());
        const auto rows = in.le<std::uint32_t>();
        const auto cols = in.le<std::uint32_t>();
        t.value.resize(rows, cols);
        for (Index r = 0; r < static_cast<Index>(rows); ++r) {
            for (Index c = 0; c < static_cast<Index>(cols); ++c) t.value(r, c) = in.f32();
        }
        out.push_back(std::move(t));
    }
    return out;
}

void restore_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
    auto stored = load_checkpoint(path);
    std::unordered_map<std::string, Matrix*> by_name;
    for (auto& s : stored) by_name[s.name] = &s.value;
    for (const auto& t : tensors) {
        const auto it = by_name.find(t.name);
        if (it == by_name.end()) throw LoadError(path.string() + ": missing tensor '" + t.name + "'");
        if (it->second->rows() != t.value->rows() || it->second->cols() != t.value->cols()) {
            throw LoadError(path.string() + ": tensor '" + t.name + "' has shape " +
                            std::to_string(it->second->rows()) + "x" + std::to_string(it->second->cols()) +
                            ", expected " + std::to_string(t.value->rows()) + "x" +
                            std::to_string(t.value->cols()));
        }
        *t.value = std::move(*it->second);
    }
}

std::vector<Matrix> snapshot(const std::vector<NamedTensor>& tensors) {
    std::vector<Matrix> out;
    out.reserve(tensors.size());
    for (const auto& t : tensors) out.push_back(*t.value);
    return out;
}

void restore(const std::vector<NamedTensor>& tensors, const std::vector<Matrix>& values) {
    if (values.size() != tensors.size()) throw ShapeError("restore: tensor count mismatch");
    for (std::size_t k = 0; k < tensors.size(); ++k) *tensors[k].value = values[k];
}

}  // namespace synergraph
