#pragma once

/// \file
/// Doubly bordered block diagonal (DBBD) reordering.
///
/// `build_partition` is a dependency-free recursive bisection: each vertex
/// set is ordered by breadth-first level sets from a pseudo-peripheral vertex
/// (one component after another), cut in two at the weighted midpoint of that
/// order, and the cut edges are turned into a vertex separator by taking the
/// boundary vertices of whichever side has fewer of them. Separator vertices
/// form the interface Gamma; what remains is labelled by block.
///
/// `assemble_dbbd` turns a partition into the permuted blocks
///
///     P^T A P = [ A_I       A_{I,G} ]
///               [ A_{G,I}   A_G     ]
///
/// with A_I block diagonal (block 0 first, interface last).

#include <algorithm>
#include <bit>
#include <fstream>
#include <istream>
#include <cstdint>
#include <memory>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "nschur/sparse_matrix.hpp"

namespace nschur {

struct PartitionSpec {
  static constexpr Index interface = -1;

  Index n_blocks = 0;
  std::vector<Index> block_of;  // block id or `interface`

  Index interface_size() const { return static_cast<Index>(std::count(block_of.begin(), block_of.end(), interface)); }

  friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

struct DBBDSystem {
  Permutation perm;                         // new position -> original row
  SparseMatrix interior;                    // A_I, assembled block diagonal (n_I x n_I)
  std::vector<SparseMatrix> interior_blocks;
  std::vector<Index> block_offsets;         // size n_blocks + 1, into [0, n_I]
  SparseMatrix A_gamma_I;                   // n_G x n_I
  SparseMatrix A_I_gamma;                   // n_I x n_G (transpose of A_gamma_I)
  SparseMatrix A_gamma;                     // n_G x n_G
  Index n_I = 0;
  Index n_gamma = 0;

  Index n() const { return n_I + n_gamma; }
  Index n_blocks() const { return static_cast<Index>(interior_blocks.size()); }
};

namespace detail {

/// Adjacency restricted to vertices with `active[v] == tag`.
class Subgraph {
 public:
  Subgraph(const SparseMatrix& A, const std::vector<Index>& tag, Index active) : A_(A), tag_(tag), active_(active) {}

  template <class F>
  void for_neighbors(Index v, F&& f) const {
    for (Index u : A_.row_cols(v))
      if (u != v && tag_[u] == active_) f(u);
  }

 private:
  const SparseMatrix& A_;
  const std::vector<Index>& tag_;
  Index active_;
};

/// BFS from `root` over unvisited vertices; appends to `order` and returns the last level's lowest vertex.
inline Index bfs_levels(const Subgraph& g, Index root, std::vector<Index>& stamp, Index mark,
                        std::vector<Index>* order, Index* eccentricity) {
  std::vector<Index> level{root};
  stamp[root] = mark;
  Index depth = 0;
  Index last = root;
  while (!level.empty()) {
    if (order) order->insert(order->end(), level.begin(), level.end());
    last = *std::min_element(level.begin(), level.end());
    std::vector<Index> next;
    for (Index v : level)
      g.for_neighbors(v, [&](Index u) {
        if (stamp[u] != mark) {
          stamp[u] = mark;
          next.push_back(u);
        }
      });
    if (next.empty()) break;
    ++depth;
    level = std::move(next);
  }
  if (eccentricity) *eccentricity = depth;
  return last;
}

/// Concatenated BFS orders of every connected component of `verts`.
inline std::vector<Index> component_bfs_order(const SparseMatrix& A, const std::vector<Index>& verts,
                                              std::vector<Index>& tag, Index active, Index start_offset) {
  const Subgraph g(A, tag, active);
  std::vector<Index> stamp_probe(A.rows(), -1);
  std::vector<Index> stamp_final(A.rows(), -1);
  std::vector<Index> order;
  order.reserve(verts.size());
  Index probe_mark = 0;
  for (std::size_t s = 0; s < verts.size(); ++s) {
    const Index seed = verts[(s + static_cast<std::size_t>(start_offset)) % verts.size()];
    if (stamp_final[seed] == 0) continue;
    // Pseudo-peripheral root: repeat BFS from the farthest vertex while eccentricity grows.
    Index root = seed;
    Index ecc = -1;
    for (int sweep = 0; sweep < 8; ++sweep) {
      Index e = 0;
      ++probe_mark;
      const Index far = bfs_levels(g, root, stamp_probe, probe_mark, nullptr, &e);
      if (e <= ecc) break;
      ecc = e;
      if (far == root) break;
      root = far;
    }
    bfs_levels(g, root, stamp_final, 0, &order, nullptr);
  }
  return order;
}

inline void bisect_recursive(const SparseMatrix& A, std::vector<Index> verts, Index nb, Index first_block,
                             std::vector<Index>& label, std::vector<Index>& tag, Index& tag_counter,
                             Index start_offset) {
  if (nb == 1) {
    for (Index v : verts) label[v] = first_block;
    return;
  }
  if (static_cast<Index>(verts.size()) < 2 * nb)
    throw PartitionError("cannot split " + std::to_string(verts.size()) + " vertices into " + std::to_string(nb) +
                         " nonempty blocks");
  const Index active = tag[verts.front()];
  std::vector<Index> order = component_bfs_order(A, verts, tag, active, start_offset);

  const Index nb_left = nb / 2;
  const auto split = static_cast<std::size_t>(
      (static_cast<double>(order.size()) * static_cast<double>(nb_left)) / static_cast<double>(nb) + 0.5);
  const Index left_tag = ++tag_counter;
  const Index right_tag = ++tag_counter;
  for (std::size_t q = 0; q < order.size(); ++q) tag[order[q]] = q < split ? left_tag : right_tag;

  auto boundary = [&](Index side, Index other) {
    std::vector<Index> b;
    for (std::size_t q = 0; q < order.size(); ++q) {
      const Index v = order[q];
      if (tag[v] != side) continue;
      for (Index u : A.row_cols(v))
        if (tag[u] == other) {
          b.push_back(v);
          break;
        }
    }
    std::sort(b.begin(), b.end());
    return b;
  };
  std::vector<Index> b_left = boundary(left_tag, right_tag);
  std::vector<Index> b_right = boundary(right_tag, left_tag);
  const auto left_size = static_cast<Index>(split);
  const auto right_size = static_cast<Index>(order.size() - split);

  const bool left_ok = static_cast<Index>(b_left.size()) < left_size;
  const bool right_ok = static_cast<Index>(b_right.size()) < right_size;
  if (!left_ok && !right_ok) throw PartitionError("separator would empty both sides of a bisection");
  const bool take_left = left_ok && (!right_ok || b_left.size() <= b_right.size());
  const std::vector<Index>& sep = take_left ? b_left : b_right;

  const Index sep_tag = ++tag_counter;
  for (Index v : sep) {
    tag[v] = sep_tag;
    label[v] = PartitionSpec::interface;
  }
  std::vector<Index> left, right;
  for (Index v : order) {
    if (tag[v] == left_tag) left.push_back(v);
    if (tag[v] == right_tag) right.push_back(v);
  }
  std::sort(left.begin(), left.end());
  std::sort(right.begin(), right.end());
  bisect_recursive(A, std::move(left), nb_left, first_block, label, tag, tag_counter, 0);
  bisect_recursive(A, std::move(right), nb - nb_left, first_block + nb_left, label, tag, tag_counter, 0);
}

}  // namespace detail

/// Recursive BFS level-set bisection into `n_blocks` (a power of two) interior blocks.
/// `seed` rotates the starting vertex of the first pseudo-peripheral search.
inline PartitionSpec build_partition(const SparseMatrix& A, Index n_blocks, std::uint64_t seed = 0) {
  const Index n = A.n();
  if (n_blocks < 2) throw PartitionError("n_blocks must be at least 2");
  if (!std::has_single_bit(static_cast<std::uint64_t>(n_blocks)))
    throw PartitionError("n_blocks must be a power of two for the built-in bisector");
  if (n_blocks > n / 2) throw PartitionError("n_blocks exceeds n/2");

  PartitionSpec spec;
  spec.n_blocks = n_blocks;
  spec.block_of.assign(static_cast<std::size_t>(n), 0);
  std::vector<Index> tag(static_cast<std::size_t>(n), 0);
  Index tag_counter = 0;
  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  detail::bisect_recursive(A, std::move(all), n_blocks, 0, spec.block_of, tag, tag_counter,
                           static_cast<Index>(seed % static_cast<std::uint64_t>(n)));

  // Decoupled blocks leave no separator; keep the Schur system nonempty by moving the
  // highest-index vertex of the largest block to the interface.
  if (spec.interface_size() == 0) {
    std::vector<Index> sizes(static_cast<std::size_t>(n_blocks), 0);
    for (Index b : spec.block_of) ++sizes[b];
    const auto largest = static_cast<Index>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (Index v = n - 1; v >= 0; --v)
      if (spec.block_of[v] == largest) {
        spec.block_of[v] = PartitionSpec::interface;
        break;
      }
  }
  return spec;
}

inline void check_partition_spec(const PartitionSpec& spec, Index n) {
  if (static_cast<Index>(spec.block_of.size()) != n)
    throw PartitionError("partition has " + std::to_string(spec.block_of.size()) + " labels for n = " +
                         std::to_string(n));
  if (spec.n_blocks < 1) throw PartitionError("partition needs at least one block");
  std::vector<Index> count(static_cast<std::size_t>(spec.n_blocks), 0);
  for (Index b : spec.block_of) {
    if (b == PartitionSpec::interface) continue;
    if (b < 0 || b >= spec.n_blocks) throw PartitionError("block label " + std::to_string(b) + " out of range");
    ++count[b];
  }
  for (Index b = 0; b < spec.n_blocks; ++b)
    if (count[b] == 0) throw PartitionError("block " + std::to_string(b) + " is empty");
}

inline DBBDSystem assemble_dbbd(const SparseMatrix& A, const PartitionSpec& spec) {
  const Index n = A.n();
  check_partition_spec(spec, n);
  for (Index i = 0; i < n; ++i) {
    const Index bi = spec.block_of[i];
    if (bi == PartitionSpec::interface) continue;
    for (Index j : A.row_cols(i)) {
      const Index bj = spec.block_of[j];
      if (bj != PartitionSpec::interface && bj != bi) throw AssemblyError(i, j, bi, bj);
    }
  }

  DBBDSystem sys;
  std::vector<Index> perm;
  perm.reserve(static_cast<std::size_t>(n));
  sys.block_offsets.push_back(0);
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(spec.n_blocks));
  std::vector<Index> gamma;
  for (Index i = 0; i < n; ++i) {
    const Index b = spec.block_of[i];
    (b == PartitionSpec::interface ? gamma : members[b]).push_back(i);
  }
  for (const auto& m : members) {
    perm.insert(perm.end(), m.begin(), m.end());
    sys.block_offsets.push_back(static_cast<Index>(perm.size()));
  }
  sys.n_I = static_cast<Index>(perm.size());
  sys.n_gamma = static_cast<Index>(gamma.size());
  perm.insert(perm.end(), gamma.begin(), gamma.end());
  sys.perm = Permutation(std::move(perm));

  const SparseMatrix B = permute_symmetric(A, sys.perm);
  const bool sym = A.symmetric();
  sys.interior = slice(B, 0, sys.n_I, 0, sys.n_I, sym);
  for (Index b = 0; b < spec.n_blocks; ++b) {
    const Index lo = sys.block_offsets[b], hi = sys.block_offsets[b + 1];
    sys.interior_blocks.push_back(slice(B, lo, hi, lo, hi, sym));
  }
  sys.A_gamma_I = slice(B, sys.n_I, n, 0, sys.n_I);
  sys.A_I_gamma = slice(B, 0, sys.n_I, sys.n_I, n);
  sys.A_gamma = slice(B, sys.n_I, n, sys.n_I, n, sym);
  return sys;
}

struct DBBDViolation {
  Index i, j;  // positions in the permuted interior numbering, i < j
  Index block_i, block_j;
};

struct ValidationReport {
  std::vector<DBBDViolation> separator_violations;
  Index asymmetric_entries = 0;
  Index nonpositive_diagonals = 0;
  bool blocks_match_interior = true;
  bool reassembly_matches = true;

  bool ok() const {
    return separator_violations.empty() && asymmetric_entries == 0 && nonpositive_diagonals == 0 &&
           blocks_match_interior && reassembly_matches;
  }
};

/// Report-only consistency check of `sys` against the original matrix.
inline ValidationReport validate_dbbd(const DBBDSystem& sys, const SparseMatrix& A) {
  ValidationReport rep;
  auto block_at = [&](Index pos) {
    auto it = std::upper_bound(sys.block_offsets.begin(), sys.block_offsets.end(), pos);
    return static_cast<Index>(it - sys.block_offsets.begin()) - 1;
  };
  for (Index i = 0; i < sys.interior.rows(); ++i) {
    for (Index j : sys.interior.row_cols(i)) {
      if (j <= i) continue;
      const Index bi = block_at(i), bj = block_at(j);
      if (bi != bj) rep.separator_violations.push_back({i, j, bi, bj});
    }
  }

  for (const SparseMatrix* m : {&sys.interior, &sys.A_gamma}) {
    for (Index i = 0; i < m->rows(); ++i) {
      const auto cols = m->row_cols(i);
      const auto vals = m->row_values(i);
      for (std::size_t q = 0; q < cols.size(); ++q)
        if (cols[q] >= m->cols() || m->coeff(cols[q], i) != vals[q]) ++rep.asymmetric_entries;
    }
  }
  if (!(sys.A_gamma_I.transpose() == sys.A_I_gamma)) ++rep.asymmetric_entries;

  for (Index i = 0; i < sys.interior.rows(); ++i)
    if (!(sys.interior.coeff(i, i) > 0.0)) ++rep.nonpositive_diagonals;
  for (Index i = 0; i < sys.A_gamma.rows(); ++i)
    if (!(sys.A_gamma.coeff(i, i) > 0.0)) ++rep.nonpositive_diagonals;

  for (Index b = 0; b < sys.n_blocks(); ++b) {
    const Index lo = sys.block_offsets[b], hi = sys.block_offsets[b + 1];
    if (!(slice(sys.interior, lo, hi, lo, hi) == slice(sys.interior_blocks[b], 0, hi - lo, 0, hi - lo)))
      rep.blocks_match_interior = false;
  }

  if (A.rows() != sys.n() || sys.perm.size() != sys.n()) {
    rep.reassembly_matches = false;
    return rep;
  }
  const SparseMatrix B = permute_symmetric(A, sys.perm);
  const Index nI = sys.n_I, n = sys.n();
  rep.reassembly_matches = slice(B, 0, nI, 0, nI) == slice(sys.interior, 0, nI, 0, nI) &&
                           slice(B, nI, n, 0, nI) == slice(sys.A_gamma_I, 0, n - nI, 0, nI) &&
                           slice(B, 0, nI, nI, n) == slice(sys.A_I_gamma, 0, nI, 0, n - nI) &&
                           slice(B, nI, n, nI, n) == slice(sys.A_gamma, 0, n - nI, 0, n - nI);
  return rep;
}

/// One label per line: block id, or `G` for the interface.
inline void write_partition(const PartitionSpec& spec, std::ostream& out) {
  for (Index b : spec.block_of) {
    if (b == PartitionSpec::interface)
      out << "G\n";
    else
      out << b << '\n';
  }
}

inline PartitionSpec read_partition(std::istream& in) {
  PartitionSpec spec;
  std::string line;
  Index max_block = -1;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string tok = line.substr(first, last - first + 1);
    if (tok == "G" || tok == "g") {
      spec.block_of.push_back(PartitionSpec::interface);
      continue;
    }
    std::size_t used = 0;
    long long b = -1;
    try {
      b = std::stoll(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || b < 0) throw ParseError(ParseErrorKind::malformed_entry, "bad partition label: " + tok);
    spec.block_of.push_back(b);
    max_block = std::max<Index>(max_block, b);
  }
  spec.n_blocks = max_block + 1;
  return spec;
}

inline PartitionSpec read_partition_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open partition file: " + path);
  return read_partition(in);
}

}  // namespace nschur
