#include "synergraph/modality_graph.hpp"

#include "binary_io.hpp"
#include "synergraph/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace synergraph {
namespace {

constexpr Index kBlockRows = 1024;
constexpr std::string_view kGraphMagic = "SGAD";
constexpr std::uint32_t kGraphVersion = 1;

}  // namespace

SparseMatrix cosine_topk(const FeatureMatrix& features, Index k) {
    const Index n = features.rows();
    if (k < 1) throw Error("cosine_topk: K must be >= 1");
    if (k >= n) {
        throw Error("cosine_topk: K=" + std::to_string(k) + " must be smaller than the item count " +
                    std::to_string(n));
    }

    Matrix unit = features.data;
    for (Index r = 0; r < n; ++r) {
        const double norm = unit.row(r).norm();
        if (norm == 0.0) {
            throw NumericError("cosine_topk: item " + std::to_string(r) + " has an all-zero " +
                               to_string(features.modality) + " feature row");
        }
        unit.row(r) /= norm;
    }

    std::vector<Index> offsets(static_cast<std::size_t>(n) + 1);
    for (Index r = 0; r <= n; ++r) offsets[r] = r * k;
    std::vector<std::int32_t> idx(static_cast<std::size_t>(n * k));
    std::vector<double> vals(static_cast<std::size_t>(n * k));

    (void)worker_threads();
    for (Index start = 0; start < n; start += kBlockRows) {
        const Index len = std::min(kBlockRows, n - start);
        const Matrix sims = unit.middleRows(start, len) * unit.transpose();
#ifdef SYNERGRAPH_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 16)
#endif
        for (Index local = 0; local < len; ++local) {
            const Index row = start + local;
            std::vector<std::int32_t> cand;
            cand.reserve(static_cast<std::size_t>(n - 1));
            for (Index c = 0; c < n; ++c) {
                if (c != row) cand.push_back(static_cast<std::int32_t>(c));
            }
            auto better = [&](std::int32_t a, std::int32_t b) {
                const double sa = sims(local, a);
                const double sb = sims(local, b);
                return sa != sb ? sa > sb : a < b;
            };
            std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), better);
            std::sort(cand.begin(), cand.begin() + k);
            for (Index j = 0; j < k; ++j) {
                const auto dst = static_cast<std::size_t>(row * k + j);
                idx[dst] = cand[static_cast<std::size_t>(j)];
                vals[dst] = sims(local, cand[static_cast<std::size_t>(j)]);
            }
        }
    }
    return SparseMatrix(n, n, std::move(offsets), std::move(idx), std::move(vals));
}

SparseMatrix sym_normalize(const SparseMatrix& s) {
    if (s.rows() != s.cols()) throw ShapeError("sym_normalize: matrix must be square");
    for (double v : s.values()) {
        if (v < 0.0) throw NumericError("sym_normalize: negative edge weight " + std::to_string(v));
    }
    const auto deg = row_degrees(s).values;
    std::vector<double> vals = s.values();
    for (Index r = 0; r < s.rows(); ++r) {
        for (Index k = s.row_begin(r); k < s.row_end(r); ++k) {
            const auto c = s.col_indices()[static_cast<std::size_t>(k)];
            // explicit zeros can sit in a zero-degree row
            const double d = deg[static_cast<std::size_t>(r)] * deg[static_cast<std::size_t>(c)];
            vals[static_cast<std::size_t>(k)] = d > 0.0 ? vals[static_cast<std::size_t>(k)] / std::sqrt(d) : 0.0;
        }
    }
    return SparseMatrix(s.rows(), s.cols(), s.row_offsets(), s.col_indices(), std::move(vals));
}

ModalityGraph build_modality_graph(const FeatureMatrix& features, Index k) {
    return {features.modality, sym_normalize(cosine_topk(features, k))};
}

std::uint64_t feature_digest(const FeatureMatrix& features) {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t k = 0; k < len; ++k) {
            h ^= p[k];
            h *= 1099511628211ull;
        }
    };
    const std::int64_t shape[2] = {features.rows(), features.cols()};
    mix(shape, sizeof shape);
    for (Index r = 0; r < features.rows(); ++r) {
        for (Index c = 0; c < features.cols(); ++c) {
            const double v = features.data(r, c);
            mix(&v, sizeof v);
        }
    }
    return h;
}

void save_graph(const std::filesystem::path& path, const SparseMatrix& graph) {
    if (graph.rows() != graph.cols()) throw ShapeError("save_graph: graph must be square");
    detail::BinaryWriter out(path);
    out.bytes(kGraphMagic);
    out.le<std::uint32_t>(kGraphVersion);
    out.le<std::uint32_t>(static_cast<std::uint32_t>(graph.rows()));
    out.le<std::uint64_t>(static_cast<std::uint64_t>(graph.nnz()));
    for (auto off : graph.row_offsets()) out.le<std::uint64_t>(static_cast<std::uint64_t>(off));
    for (auto c : graph.col_indices()) out.le<std::uint32_t>(static_cast<std::uint32_t>(c));
    for (double v : graph.values()) out.f64(v);
    out.finish();
}

SparseMatrix load_graph(const std::filesystem::path& path) {
    detail::BinaryReader in(path);
    in.expect_magic(kGraphMagic);
    const auto version = in.le<std::uint32_t>();
    if (version != kGraphVersion) throw LoadError(path.string() + ": unsupported SGAD version");
    const auto n = static_cast<Index>(in.le<std::uint32_t>());
    const auto nnz = static_cast<Index>(in.le<std::uint64_t>());
    std::vector<Index> offsets(static_cast<std::size_t>(n) + 1);
    for (auto& off : offsets) off = static_cast<Index>(in.le<std::uint64_t>());
    std::vector<std::int32_t> idx(static_cast<std::size_t>(nnz));
    for (auto& c : idx) c = static_cast<std::int32_t>(in.le<std::uint32_t>());
    std::vector<double> vals(static_cast<std::size_t>(nnz));
    for (auto& v : vals) v = in.f64();
    try {
        return SparseMatrix(n, n, std::move(offsets), std::move(idx), std::move(vals));
    } catch (const Error& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

ModalityGraph cached_modality_graph(const FeatureMatrix& features, Index k,
                                    const std::filesystem::path& cache_dir) {
    char digest[17];
    std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(feature_digest(features)));
    const auto file = cache_dir / (std::string(digest) + "_" + to_string(features.modality) + "_k" +
                                   std::to_string(k) + ".sgad");
    if (std::filesystem::exists(file)) {
        return {features.modality, load_graph(file)};
    }
    ModalityGraph graph = build_modality_graph(features, k);
    std::filesystem::create_directories(cache_dir);
    save_graph(file, graph.adjacency);
    return graph;
}

}  // namespace synergraph
