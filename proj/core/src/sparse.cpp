#include "synergraph/sparse.hpp"

#include "synergraph/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace synergraph {

SparseMatrix::SparseMatrix(Index rows, Index cols, std::vector<Index> row_offsets,
                           std::vector<std::int32_t> col_indices, std::vector<double> values)
    : rows_(rows), cols_(cols), offsets_(std::move(row_offsets)), cols_idx_(std::move(col_indices)),
      values_(std::move(values)) {
    if (rows_ < 0 || cols_ < 0) throw ShapeError("negative sparse matrix shape");
    if (static_cast<Index>(offsets_.size()) != rows_ + 1 || offsets_.front() != 0) {
        throw ShapeError("row_offsets must have rows+1 entries starting at 0");
    }
    if (cols_idx_.size() != values_.size() || offsets_.back() != static_cast<Index>(values_.size())) {
        throw ShapeError("col_indices/values length must equal row_offsets[rows]");
    }
    for (Index r = 0; r < rows_; ++r) {
        if (row_end(r) < row_begin(r)) throw ShapeError("row_offsets must be non-decreasing");
        for (Index k = row_begin(r); k < row_end(r); ++k) {
            const auto c = cols_idx_[static_cast<std::size_t>(k)];
            if (c < 0 || c >= cols_) throw ShapeError("column index out of range");
            if (k > row_begin(r) && cols_idx_[static_cast<std::size_t>(k) - 1] >= c) {
                throw ShapeError("column indices must be strictly increasing within a row");
            }
            if (!std::isfinite(values_[static_cast<std::size_t>(k)])) {
                throw NumericError("sparse matrix value is not finite");
            }
        }
    }
}

double SparseMatrix::at(Index r, Index c) const {
    const auto first = cols_idx_.begin() + row_begin(r);
    const auto last = cols_idx_.begin() + row_end(r);
    const auto it = std::lower_bound(first, last, static_cast<std::int32_t>(c));
    if (it == last || *it != c) return 0.0;
    return values_[static_cast<std::size_t>(it - cols_idx_.begin())];
}

Matrix SparseMatrix::to_dense() const {
    Matrix out = Matrix::Zero(rows_, cols_);
    for (Index r = 0; r < rows_; ++r) {
        for (Index k = row_begin(r); k < row_end(r); ++k) {
            out(r, cols_idx_[static_cast<std::size_t>(k)]) = values_[static_cast<std::size_t>(k)];
        }
    }
    return out;
}

SparseMatrix SparseMatrix::transpose() const {
    std::vector<Index> offsets(static_cast<std::size_t>(cols_) + 1, 0);
    for (auto c : cols_idx_) ++offsets[static_cast<std::size_t>(c) + 1];
    for (Index c = 0; c < cols_; ++c) offsets[c + 1] += offsets[c];
    std::vector<std::int32_t> idx(values_.size());
    std::vector<double> vals(values_.size());
    std::vector<Index> cursor(offsets.begin(), offsets.end() - 1);
    // Rows are visited in ascending order, so each transposed row comes out sorted.
    for (Index r = 0; r < rows_; ++r) {
        for (Index k = row_begin(r); k < row_end(r); ++k) {
            const auto c = cols_idx_[static_cast<std::size_t>(k)];
            const auto dst = static_cast<std::size_t>(cursor[c]++);
            idx[dst] = static_cast<std::int32_t>(r);
            vals[dst] = values_[static_cast<std::size_t>(k)];
        }
    }
    return SparseMatrix(cols_, rows_, std::move(offsets), std::move(idx), std::move(vals));
}

std::vector<CooEntry> SparseMatrix::to_coo() const {
    std::vector<CooEntry> out;
    out.reserve(values_.size());
    for (Index r = 0; r < rows_; ++r) {
        for (Index k = row_begin(r); k < row_end(r); ++k) {
            out.push_back({r, cols_idx_[static_cast<std::size_t>(k)], values_[static_cast<std::size_t>(k)]});
        }
    }
    return out;
}

SparseMatrix csr_from_coo(std::vector<CooEntry> entries, Index rows, Index cols) {
    for (const auto& e : entries) {
        if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
            throw ShapeError("coordinate (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                             ") outside shape (" + std::to_string(rows) + ", " + std::to_string(cols) + ")");
        }
    }
    std::stable_sort(entries.begin(), entries.end(), [](const CooEntry& a, const CooEntry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Index> offsets(static_cast<std::size_t>(rows) + 1, 0);
    std::vector<std::int32_t> idx;
    std::vector<double> vals;
    idx.reserve(entries.size());
    vals.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& e = entries[k];
        if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col) {
            vals.back() += e.value;
            continue;
        }
        idx.push_back(static_cast<std::int32_t>(e.col));
        vals.push_back(e.value);
        ++offsets[static_cast<std::size_t>(e.row) + 1];
    }
    for (Index r = 0; r < rows; ++r) offsets[r + 1] += offsets[r];
    return SparseMatrix(rows, cols, std::move(offsets), std::move(idx), std::move(vals));
}

SparseMatrix identity_sparse(Index n) {
    std::vector<Index> offsets(static_cast<std::size_t>(n) + 1);
    std::vector<std::int32_t> idx(static_cast<std::size_t>(n));
    for (Index k = 0; k <= n; ++k) offsets[k] = k;
    for (Index k = 0; k < n; ++k) idx[k] = static_cast<std::int32_t>(k);
    return SparseMatrix(n, n, std::move(offsets), std::move(idx), std::vector<double>(n, 1.0));
}

void spmm_into(const SparseMatrix& a, const Matrix& x, Matrix& out) {
    if (a.cols() != x.rows()) {
        throw ShapeError("spmm: A has " + std::to_string(a.cols()) + " columns but X has " +
                         std::to_string(x.rows()) + " rows");
    }
    if (&out == &x) throw ShapeError("spmm: output must not alias input");
    out.setZero(a.rows(), x.cols());
    const auto& off = a.row_offsets();
    const auto& idx = a.col_indices();
    const auto& val = a.values();
    const Index n_rows = a.rows();
    (void)worker_threads();
#ifdef SYNERGRAPH_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (Index r = 0; r < n_rows; ++r) {
        auto dst = out.row(r);
        for (Index k = off[static_cast<std::size_t>(r)]; k < off[static_cast<std::size_t>(r) + 1]; ++k) {
            dst.noalias() += val[static_cast<std::size_t>(k)] * x.row(idx[static_cast<std::size_t>(k)]);
        }
    }
}

Matrix spmm(const SparseMatrix& a, const Matrix& x) {
    Matrix out;
    spmm_into(a, x, out);
    return out;
}

DegreeVector row_degrees(const SparseMatrix& a) {
    DegreeVector d;
    d.values.assign(static_cast<std::size_t>(a.rows()), 0.0);
    for (Index r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        for (Index k = a.row_begin(r); k < a.row_end(r); ++k) s += a.values()[static_cast<std::size_t>(k)];
        d.values[static_cast<std::size_t>(r)] = s;
    }
    return d;
}

SparseMatrix build_interaction_matrix(const SplitDataset& split) {
    std::vector<Index> offsets(static_cast<std::size_t>(split.n_users()) + 1, 0);
    std::vector<std::int32_t> idx;
    idx.reserve(static_cast<std::size_t>(split.count(SplitLabel::train)));
    for (Index u = 0; u < split.n_users(); ++u) {
        const auto items = split.items(SplitLabel::train, u);
        idx.insert(idx.end(), items.begin(), items.end());
        offsets[u + 1] = static_cast<Index>(idx.size());
    }
    std::vector<double> vals(idx.size(), 1.0);
    return SparseMatrix(split.n_users(), split.n_items(), std::move(offsets), std::move(idx), std::move(vals));
}

SparseMatrix build_norm_adjacency(const SparseMatrix& r) {
    const Index nu = r.rows();
    const Index ni = r.cols();
    const SparseMatrix rt = r.transpose();
    const auto du = row_degrees(r).values;
    const auto di = row_degrees(rt).values;
    auto inv_sqrt = [](double deg) { return deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0; };

    const Index n = nu + ni;
    std::vector<Index> offsets(static_cast<std::size_t>(n) + 1, 0);
    std::vector<std::int32_t> idx;
    std::vector<double> vals;
    idx.reserve(static_cast<std::size_t>(2 * r.nnz()));
    vals.reserve(static_cast<std::size_t>(2 * r.nnz()));
    for (Index u = 0; u < nu; ++u) {
        for (Index k = r.row_begin(u); k < r.row_end(u); ++k) {
            const auto i = r.col_indices()[static_cast<std::size_t>(k)];
            idx.push_back(static_cast<std::int32_t>(nu + i));
            vals.push_back(r.values()[static_cast<std::size_t>(k)] * inv_sqrt(du[u]) * inv_sqrt(di[i]));
        }
        offsets[u + 1] = static_cast<Index>(idx.size());
    }
    for (Index i = 0; i < ni; ++i) {
        for (Index k = rt.row_begin(i); k < rt.row_end(i); ++k) {
            const auto u = rt.col_indices()[static_cast<std::size_t>(k)];
            idx.push_back(u);
            vals.push_back(rt.values()[static_cast<std::size_t>(k)] * inv_sqrt(du[u]) * inv_sqrt(di[i]));
        }
        offsets[nu + i + 1] = static_cast<Index>(idx.size());
    }
    return SparseMatrix(n, n, std::move(offsets), std::move(idx), std::move(vals));
}

SparseMatrix row_normalize(const SparseMatrix& a) {
    const auto deg = row_degrees(a).values;
    std::vector<double> vals = a.values();
    for (Index r = 0; r < a.rows(); ++r) {
        const double s = deg[static_cast<std::size_t>(r)];
        for (Index k = a.row_begin(r); k < a.row_end(r); ++k) {
            vals[static_cast<std::size_t>(k)] = s != 0.0 ? vals[static_cast<std::size_t>(k)] / s : 0.0;
        }
    }
    return SparseMatrix(a.rows(), a.cols(), a.row_offsets(), a.col_indices(), std::move(vals));
}

bool is_symmetric(const SparseMatrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    for (Index r = 0; r < a.rows(); ++r) {
        for (Index k = a.row_begin(r); k < a.row_end(r); ++k) {
            const auto c = a.col_indices()[static_cast<std::size_t>(k)];
            if (std::abs(a.values()[static_cast<std::size_t>(k)] - a.at(c, r)) > tol) return false;
        }
    }
    return true;
}

}  // namespace synergraph
