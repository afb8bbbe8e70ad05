#pragma once

#include <string>

#include "rksylv/dense_matrix.hpp"
#include "rksylv/sparse_matrix.hpp"

namespace rksylv {

// MatrixMarket "coordinate real general" with 1-based indices. Dense matrices
// are written in the same coordinate format, one entry per stored value.
void write_matrix_market(const std::string& path, const SparseMatrix& m);
void write_matrix_market(const std::string& path, const DenseMatrix& m);

SparseMatrix read_sparse_matrix_market(const std::string& path);
DenseMatrix read_dense_matrix_market(const std::string& path);

}  // namespace rksylv
