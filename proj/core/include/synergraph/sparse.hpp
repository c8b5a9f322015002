#pragma once

#include "synergraph/common.hpp"
#include "synergraph/dataset.hpp"

#include <cstdint>
#include <vector>

namespace synergraph {

struct CooEntry {
    Index row;
    Index col;
    double value;
};

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row and every value is finite.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(Index rows, Index cols, std::vector<Index> row_offsets,
                 std::vector<std::int32_t> col_indices, std::vector<double> values);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Index nnz() const { return static_cast<Index>(values_.size()); }

    const std::vector<Index>& row_offsets() const { return offsets_; }
    const std::vector<std::int32_t>& col_indices() const { return cols_idx_; }
    const std::vector<double>& values() const { return values_; }

    Index row_begin(Index r) const { return offsets_[static_cast<std::size_t>(r)]; }
    Index row_end(Index r) const { return offsets_[static_cast<std::size_t>(r) + 1]; }
    Index row_nnz(Index r) const { return row_end(r) - row_begin(r); }

    /// Value at (r, c), zero when absent.
    double at(Index r, Index c) const;

    Matrix to_dense() const;
    SparseMatrix transpose() const;

    std::vector<CooEntry> to_coo() const;

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<Index> offsets_{0};
    std::vector<std::int32_t> cols_idx_;
    std::vector<double> values_;
};

/// Row sums of a sparse matrix (the diagonal of a degree matrix).
struct DegreeVector {
    std::vector<double> values;
};

/// Builds canonical CSR; duplicate coordinates are summed.
SparseMatrix csr_from_coo(std::vector<CooEntry> entries, Index rows, Index cols);

SparseMatrix identity_sparse(Index n);

/// A * X. Each output row accumulates in ascending column order, so the
/// result does not depend on the worker count.
Matrix spmm(const SparseMatrix& a, const Matrix& x);
void spmm_into(const SparseMatrix& a, const Matrix& x, Matrix& out);

DegreeVector row_degrees(const SparseMatrix& a);

/// Binary |U| x |I| matrix over training edges only.
SparseMatrix build_interaction_matrix(const SplitDataset& split);

/// Symmetric normalized bipartite adjacency D^-1/2 [[0, R], [R^T, 0]] D^-1/2.
/// Zero-degree nodes keep an empty row.
SparseMatrix build_norm_adjacency(const SparseMatrix& interactions);

/// Scales each row to sum to one (empty rows stay empty).
SparseMatrix row_normalize(const SparseMatrix& a);

bool is_symmetric(const SparseMatrix& a, double tol = 0.0);

}  // namespace synergraph
