#include "rksylv/matrix_market.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace rksylv {

namespace {

void write_header(std::ostream& os, int rows, int cols, std::size_t nnz) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << rows << ' ' << cols << ' ' << nnz << '\n';
  os << std::setprecision(17);
}

struct CoordinateFile {
  int rows = 0;
  int cols = 0;
  std::vector<Triplet> entries;
};

CoordinateFile read_coordinate(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("matrix market: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("matrix market: empty file " + path);
  {
    std::istringstream head(line);
    std::string banner, object, format, field, symmetry;
    head >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket" || object != "matrix" || format != "coordinate" ||
        field != "real" || symmetry != "general")
      throw std::runtime_error("matrix market: unsupported header in " + path);
  }
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '%') continue;
    break;
  }
  CoordinateFile out;
  std::size_t nnz = 0;
  {
    std::istringstream sizes(line);
    if (!(sizes >> out.rows >> out.cols >> nnz))
      throw std::runtime_error("matrix market: malformed size line in " + path);
  }
  out.entries.reserve(nnz);
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream entry(line);
    int i = 0, j = 0;
    double v = 0.0;
    if (!(entry >> i >> j >> v)) throw std::runtime_error("matrix market: malformed entry in " + path);
    if (i < 1 || i > out.rows || j < 1 || j > out.cols)
      throw std::runtime_error("matrix market: entry index outside matrix in " + path);
    out.entries.push_back({i - 1, j - 1, v});
  }
  if (out.entries.size() != nnz)
    throw std::runtime_error("matrix market: entry count does not match header in " + path);
  return out;
}

}  // namespace

void write_matrix_market(const std::string& path, const SparseMatrix& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("matrix market: cannot write " + path);
  write_header(os, m.rows(), m.cols(), m.nnz());
  const auto& rp = m.row_ptr();
  const auto& ci = m.col_idx();
  const auto& v = m.values();
  for (int i = 0; i < m.rows(); ++i)
    for (int k = rp[i]; k < rp[i + 1]; ++k) os << i + 1 << ' ' << ci[k] + 1 << ' ' << v[k] << '\n';
  if (!os) throw std::runtime_error("matrix market: write failed for " + path);
}

void write_matrix_market(const std::string& path, const DenseMatrix& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("matrix market: cannot write " + path);
  write_header(os, m.rows(), m.cols(), static_cast<std::size_t>(m.rows()) * m.cols());
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i) os << i + 1 << ' ' << j + 1 << ' ' << m(i, j) << '\n';
  if (!os) throw std::runtime_error("matrix market: write failed for " + path);
}

SparseMatrix read_sparse_matrix_market(const std::string& path) {
  CoordinateFile f = read_coordinate(path);
  return SparseMatrix::from_triplets(f.rows, f.cols, std::move(f.entries));
}

DenseMatrix read_dense_matrix_market(const std::string& path) {
  CoordinateFile f = read_coordinate(path);
  DenseMatrix m(f.rows, f.cols);
  for (const Triplet& t : f.entries) m(t.row, t.col) += t.value;
  return m;
}

}  // namespace rksylv
