#pragma once

/// \file
/// Matrix Market coordinate reader/writer (real, symmetric or general).
///
/// Symmetric files are expanded to full storage on read and written back as
/// the lower triangle. Duplicate entries are summed.

#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nschur/sparse_matrix.hpp"

namespace nschur {

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

inline SparseMatrix parse_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(ParseErrorKind::malformed_header, "empty input");
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || detail::lower(object) != "matrix" || symmetry.empty())
    throw ParseError(ParseErrorKind::malformed_header, "bad Matrix Market banner: " + line);
  if (detail::lower(format) != "coordinate")
    throw ParseError(ParseErrorKind::malformed_header, "only coordinate format is supported");
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (field == "pattern") throw ParseError(ParseErrorKind::pattern_only, "pattern-only matrices carry no values");
  if (field != "real" && field != "double" && field != "integer")
    throw ParseError(ParseErrorKind::unsupported_field, "unsupported field: " + field);
  bool sym = false;
  if (symmetry == "symmetric")
    sym = true;
  else if (symmetry != "general")
    throw ParseError(ParseErrorKind::unsupported_field, "unsupported symmetry: " + symmetry);

  do {
    if (!std::getline(in, line)) throw ParseError(ParseErrorKind::malformed_header, "missing size line");
  } while (line.empty() || line[0] == '%');

  long long rows = 0, cols = 0, entries = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> rows >> cols >> entries) || rows < 0 || cols < 0 || entries < 0)
      throw ParseError(ParseErrorKind::malformed_header, "bad size line: " + line);
  }
  if (sym && rows != cols) throw ParseError(ParseErrorKind::malformed_header, "symmetric matrix must be square");

  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(sym ? 2 * entries : entries));
  long long seen = 0;
  while (seen < entries && std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ss(line);
    long long i = 0, j = 0;
    double v = 0.0;
    if (!(ss >> i >> j >> v)) throw ParseError(ParseErrorKind::malformed_entry, "bad entry line: " + line);
    if (i < 1 || i > rows || j < 1 || j > cols)
      throw ParseError(ParseErrorKind::index_out_of_bounds, "entry index out of bounds: " + line);
    t.push_back({i - 1, j - 1, v});
    if (sym && i != j) t.push_back({j - 1, i - 1, v});
    ++seen;
  }
  if (seen != entries) throw ParseError(ParseErrorKind::malformed_entry, "fewer entries than declared");
  return SparseMatrix::from_triplets(rows, cols, std::move(t), sym);
}

inline SparseMatrix parse_matrix_market(const std::string& text) {
  std::istringstream in(text);
  return parse_matrix_market(in);
}

inline SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open matrix file: " + path);
  return parse_matrix_market(in);
}

inline void write_matrix_market(const SparseMatrix& A, std::ostream& out) {
  const bool sym = A.symmetric();
  Index count = 0;
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j : A.row_cols(i))
      if (!sym || j <= i) ++count;
  out << "%%MatrixMarket matrix coordinate real " << (sym ? "symmetric" : "general") << '\n';
  out << A.rows() << ' ' << A.cols() << ' ' << count << '\n';
  char buf[64];
  for (Index i = 0; i < A.rows(); ++i) {
    const auto cols = A.row_cols(i);
    const auto vals = A.row_values(i);
    for (std::size_t q = 0; q < cols.size(); ++q) {
      if (sym && cols[q] > i) continue;
      std::snprintf(buf, sizeof buf, "%.17g", vals[q]);
      out << (i + 1) << ' ' << (cols[q] + 1) << ' ' << buf << '\n';
    }
  }
}

inline std::string to_matrix_market(const SparseMatrix& A) {
  std::ostringstream out;
  write_matrix_market(A, out);
  return out.str();
}

}  // namespace nschur
