#pragma once

// Graph types for binary latent causal models and the purely structural checks
// on them: triangular blocks, double-triangular witnesses, the subset and
// three-children conditions, CPDAG conversion and structural Hamming distances.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "blcm/bits.hpp"
#include "blcm/error.hpp"

namespace blcm {

/// J x K latent-to-observed adjacency. Entry (j, k) is 1 when H_k is a parent
/// of X_j. All-zero columns are allowed so that counterexamples stay representable.
class BipartiteGraph {
 public:
  BipartiteGraph() = default;

  explicit BipartiteGraph(BitMatrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() < 1 || entries_.cols() < 1)
      throw DimensionError("BipartiteGraph: need J >= 1 and K >= 1");
  }

  BipartiteGraph(std::initializer_list<std::initializer_list<int>> rows)
      : BipartiteGraph(BitMatrix(rows)) {}

  int items() const noexcept { return entries_.rows(); }
  int latents() const noexcept { return entries_.cols(); }
  int operator()(int j, int k) const { return entries_(j, k); }
  const BitMatrix& entries() const noexcept { return entries_; }

  /// Latent parents of item j, ascending.
  std::vector<int> parents(int j) const {
    std::vector<int> out;
    for (int k = 0; k < latents(); ++k)
      if (entries_(j, k) != 0) out.push_back(k);
    return out;
  }

  /// Observed children of latent k, ascending.
  std::vector<int> children(int k) const {
    std::vector<int> out;
    for (int j = 0; j < items(); ++j)
      if (entries_(j, k) != 0) out.push_back(j);
    return out;
  }

  BipartiteGraph permute_cols(std::span<const int> perm) const {
    return BipartiteGraph(entries_.permute_cols(perm));
  }

  friend bool operator==(const BipartiteGraph&, const BipartiteGraph&) = default;

 private:
  BitMatrix entries_;
};

/// Directed acyclic graph over the K latent variables; entry (k, l) = 1 is the
/// edge H_k -> H_l.
class LatentDag {
 public:
  LatentDag() = default;

  explicit LatentDag(BitMatrix adjacency) : adj_(std::move(adjacency)) {
    if (adj_.rows() != adj_.cols()) throw DimensionError("LatentDag: adjacency must be square");
    for (int k = 0; k < adj_.rows(); ++k)
      if (adj_(k, k) != 0) throw ParamError("LatentDag: self loop");
    if (!topological_order()) throw ParamError("LatentDag: graph has a cycle");
  }

  static LatentDag empty(int k) { return LatentDag(BitMatrix(k, k)); }

  static LatentDag from_edges(int k, const std::vector<std::pair<int, int>>& edges) {
    BitMatrix m(k, k);
    for (auto [a, b] : edges) m.set(a, b, true);
    return LatentDag(std::move(m));
  }

  int nodes() const noexcept { return adj_.rows(); }
  bool has_edge(int from, int to) const { return adj_(from, to) != 0; }
  const BitMatrix& adjacency() const noexcept { return adj_; }

  std::vector<int> parents(int k) const {
    std::vector<int> out;
    for (int i = 0; i < nodes(); ++i)
      if (adj_(i, k) != 0) out.push_back(i);
    return out;
  }

  /// Kahn's algorithm, lowest index first; empty when a cycle exists.
  std::optional<std::vector<int>> topological_order() const {
    const int n = adj_.rows();
    std::vector<int> indeg(static_cast<std::size_t>(n), 0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) indeg[static_cast<std::size_t>(b)] += adj_(a, b);
    std::vector<int> order;
    std::vector<bool> done(static_cast<std::size_t>(n), false);
    for (int step = 0; step < n; ++step) {
      int next = -1;
      for (int v = 0; v < n; ++v)
        if (!done[static_cast<std::size_t>(v)] && indeg[static_cast<std::size_t>(v)] == 0) {
          next = v;
          break;
        }
      if (next < 0) return std::nullopt;
      done[static_cast<std::size_t>(next)] = true;
      order.push_back(next);
      for (int b = 0; b < n; ++b)
        if (adj_(next, b) != 0) --indeg[static_cast<std::size_t>(b)];
    }
    return order;
  }

  friend bool operator==(const LatentDag&, const LatentDag&) = default;

 private:
  BitMatrix adj_;
};

/// Completed partially directed acyclic graph: the Markov equivalence class
/// representative of a latent DAG.
class Cpdag {
 public:
  using Edge = std::pair<int, int>;

  Cpdag() = default;

  /// `directed` holds ordered pairs (from, to); `undirected` holds unordered
  /// pairs, normalised to (min, max).
  Cpdag(int nodes, std::set<Edge> directed, std::set<Edge> undirected) : n_(nodes) {
    for (auto [a, b] : directed) {
      check_node(a);
      check_node(b);
      if (a == b) throw ParamError("Cpdag: self loop");
      directed_.insert({a, b});
    }
    for (auto [a, b] : undirected) {
      check_node(a);
      check_node(b);
      if (a == b) throw ParamError("Cpdag: self loop");
      undirected_.insert({std::min(a, b), std::max(a, b)});
    }
    for (auto [a, b] : directed_) {
      if (undirected_.count({std::min(a, b), std::max(a, b)}) != 0 || directed_.count({b, a}) != 0)
        throw ParamError("Cpdag: directed and undirected edge sets overlap");
    }
  }

  int nodes() const noexcept { return n_; }
  const std::set<Edge>& directed() const noexcept { return directed_; }
  const std::set<Edge>& undirected() const noexcept { return undirected_; }

  bool has_directed(int a, int b) const { return directed_.count({a, b}) != 0; }
  bool has_undirected(int a, int b) const {
    return undirected_.count({std::min(a, b), std::max(a, b)}) != 0;
  }
  bool adjacent(int a, int b) const {
    return has_directed(a, b) || has_directed(b, a) || has_undirected(a, b);
  }
  std::size_t edge_count() const { return directed_.size() + undirected_.size(); }

  /// Relabel nodes: node v of the result is node perm[v] of this graph.
  Cpdag permute_nodes(std::span<const int> perm) const {
    std::vector<int> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
    std::set<Edge> d, u;
    for (auto [a, b] : directed_) d.insert({inv[static_cast<std::size_t>(a)], inv[static_cast<std::size_t>(b)]});
    for (auto [a, b] : undirected_) u.insert({inv[static_cast<std::size_t>(a)], inv[static_cast<std::size_t>(b)]});
    return Cpdag(n_, std::move(d), std::move(u));
  }

  friend bool operator==(const Cpdag&, const Cpdag&) = default;

 private:
  void check_node(int v) const {
    if (v < 0 || v >= n_) throw DimensionError("Cpdag: node index out of range");
  }

  int n_ = 0;
  std::set<Edge> directed_;
  std::set<Edge> undirected_;
};

/// Row and column orders that put a square block into unit lower-triangular
/// form: block(rows[i], cols[i]) = 1 and block(rows[i], cols[l]) = 0 for l > i.
struct TriangularOrder {
  std::vector<int> rows;
  std::vector<int> cols;
};

/// Two disjoint triangular K-row blocks plus the remaining rows. Row indices
/// refer to the full J x K graph and are listed in triangular order.
struct TriangularWitness {
  std::vector<int> rows1;
  std::vector<int> cols1;
  std::vector<int> rows2;
  std::vector<int> cols2;
  std::vector<int> rows3;

  friend bool operator==(const TriangularWitness&, const TriangularWitness&) = default;
};

namespace detail {

using RowMask = std::uint64_t;
using ColMask = std::uint32_t;

inline ColMask row_bits(const BitMatrix& m, int r) {
  ColMask out = 0;
  for (int c = 0; c < m.cols(); ++c)
    if (m(r, c) != 0) out |= ColMask{1} << c;
  return out;
}

inline bool is_single_bit(ColMask v) { return v != 0 && (v & (v - 1)) == 0; }

inline int lowest_bit(ColMask v) { return std::countr_zero(v); }

/// Greedy peel restricted to `candidate_rows` (in the given order): repeatedly
/// take the first row that is a standard basis vector on the remaining columns.
inline std::optional<TriangularOrder> peel(const BitMatrix& m, const std::vector<int>& candidate_rows) {
  const int k = m.cols();
  ColMask remaining = k == 32 ? ~ColMask{0} : ((ColMask{1} << k) - 1);
  std::vector<bool> used(candidate_rows.size(), false);
  TriangularOrder out;
  for (int step = 0; step < k; ++step) {
    bool found = false;
    for (std::size_t i = 0; i < candidate_rows.size(); ++i) {
      if (used[i]) continue;
      const ColMask bits = row_bits(m, candidate_rows[i]) & remaining;
      if (is_single_bit(bits)) {
        used[i] = true;
        const int c = lowest_bit(bits);
        out.rows.push_back(candidate_rows[i]);
        out.cols.push_back(c);
        remaining &= ~(ColMask{1} << c);
        found = true;
        break;
      }
    }
    if (!found) return std::nullopt;
  }
  return out;
}

/// All K-row subsets of `m` that form a triangular block, as row bitmasks in
/// ascending lexicographic order of their sorted row lists.
inline std::vector<RowMask> triangular_subsets(const BitMatrix& m) {
  const int j_count = m.rows();
  const int k = m.cols();
  if (j_count > 64) throw DimensionError("triangular search supports at most 64 items");
  if (k > 31) throw DimensionError("triangular search supports at most 31 latents");
  std::vector<ColMask> bits(static_cast<std::size_t>(j_count));
  for (int r = 0; r < j_count; ++r) bits[static_cast<std::size_t>(r)] = row_bits(m, r);

  std::set<RowMask> complete;
  struct StateHash {
    std::size_t operator()(const std::pair<RowMask, ColMask>& s) const noexcept {
      return std::hash<RowMask>{}(s.first * 0x9E3779B97F4A7C15ull ^ s.second);
    }
  };
  std::unordered_set<std::pair<RowMask, ColMask>, StateHash> visited;
  std::vector<std::pair<RowMask, ColMask>> stack;
  const ColMask all_cols = (ColMask{1} << k) - 1;
  stack.push_back({0, all_cols});
  while (!stack.empty()) {
    auto [chosen, remaining] = stack.back();
    stack.pop_back();
    if (!visited.insert({chosen, remaining}).second) continue;
    if (remaining == 0) {
      complete.insert(chosen);
      continue;
    }
    for (int r = 0; r < j_count; ++r) {
      if ((chosen >> r) & 1u) continue;
      const ColMask b = bits[static_cast<std::size_t>(r)] & remaining;
      if (is_single_bit(b)) stack.push_back({chosen | (RowMask{1} << r), remaining & ~b});
    }
  }

  std::vector<RowMask> out(complete.begin(), complete.end());
  auto sorted_rows = [](RowMask mask) {
    std::vector<int> rows;
    for (int r = 0; r < 64; ++r)
      if ((mask >> r) & 1u) rows.push_back(r);
    return rows;
  };
  std::sort(out.begin(), out.end(),
            [&](RowMask a, RowMask b) { return sorted_rows(a) < sorted_rows(b); });
  return out;
}

inline std::vector<int> mask_rows(RowMask mask, int j_count) {
  std::vector<int> rows;
  for (int r = 0; r < j_count; ++r)
    if ((mask >> r) & 1u) rows.push_back(r);
  return rows;
}

inline TriangularWitness make_witness(const BitMatrix& m, RowMask s1, RowMask s2) {
  const int j_count = m.rows();
  auto o1 = peel(m, mask_rows(s1, j_count));
  auto o2 = peel(m, mask_rows(s2, j_count));
  TriangularWitness w;
  w.rows1 = o1->rows;
  w.cols1 = o1->cols;
  w.rows2 = o2->rows;
  w.cols2 = o2->cols;
  w.rows3 = mask_rows(~(s1 | s2), j_count);
  return w;
}

inline bool rows_cover_all_columns(const BitMatrix& m, const std::vector<int>& rows) {
  for (int c = 0; c < m.cols(); ++c) {
    bool hit = false;
    for (int r : rows) hit = hit || m(r, c) != 0;
    if (!hit) return false;
  }
  return true;
}

}  // namespace detail

/// Permutations putting a square bit block into unit lower-triangular form,
/// found by peeling standard-basis rows (lowest row index first). The peel is
/// exact for a single square block: removing any basis row and its column from
/// a triangular block leaves a triangular block.
inline std::optional<TriangularOrder> is_triangular(const BitMatrix& block) {
  if (block.rows() != block.cols()) throw DimensionError("is_triangular: block must be square");
  std::vector<int> rows(static_cast<std::size_t>(block.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  return detail::peel(block, rows);
}

/// Summary of the witness enumeration used by the identifiability report.
struct WitnessSearch {
  std::optional<TriangularWitness> preferred;  ///< first column-covering witness, else first witness
  std::optional<TriangularWitness> first;
  std::size_t witnesses_examined = 0;
  bool some_gamma3_covering = false;
  bool all_gamma3_covering = false;
  bool truncated = false;
};

/// Enumerate double-triangular witnesses (unordered pairs of disjoint
/// triangular row sets, lexicographic order) up to `max_witnesses`.
inline WitnessSearch search_double_triangular(const BipartiteGraph& g, std::size_t max_witnesses = 200000) {
  const BitMatrix& m = g.entries();
  if (g.items() < 2 * g.latents())
    throw DimensionError("double triangular search needs J >= 2K (J=" + std::to_string(g.items()) +
                         ", K=" + std::to_string(g.latents()) + ")");
  const auto subsets = detail::triangular_subsets(m);
  WitnessSearch out;
  bool all_covering = true;
  for (std::size_t a = 0; a < subsets.size() && !out.truncated; ++a) {
    for (std::size_t b = a + 1; b < subsets.size(); ++b) {
      if ((subsets[a] & subsets[b]) != 0) continue;
      if (out.witnesses_examined >= max_witnesses) {
        out.truncated = true;
        break;
      }
      ++out.witnesses_examined;
      const auto rest = detail::mask_rows(~(subsets[a] | subsets[b]), g.items());
      const bool covering = detail::rows_cover_all_columns(m, rest);
      if (!out.first) out.first = detail::make_witness(m, subsets[a], subsets[b]);
      if (covering && !out.some_gamma3_covering) {
        out.some_gamma3_covering = true;
        out.preferred = detail::make_witness(m, subsets[a], subsets[b]);
      }
      all_covering = all_covering && covering;
    }
  }
  if (!out.preferred) out.preferred = out.first;
  out.all_gamma3_covering = out.first.has_value() && all_covering;
  return out;
}

/// A double-triangular witness for g, preferring one whose remainder rows
/// cover every latent; absent when g is not double triangular.
/// Throws DimensionError when J < 2K.
inline std::optional<TriangularWitness> find_double_triangular(const BipartiteGraph& g) {
  return search_double_triangular(g).preferred;
}

struct SubsetCheck {
  bool holds = true;
  /// First ordered pair (k, l), 0-based, with column k <= column l entrywise.
  std::optional<std::pair<int, int>> violation;
};

inline SubsetCheck check_subset_condition(const BipartiteGraph& g) {
  for (int k = 0; k < g.latents(); ++k) {
    for (int l = 0; l < g.latents(); ++l) {
      if (k == l) continue;
      bool dominated = true;
      for (int j = 0; j < g.items() && dominated; ++j) dominated = g(j, k) <= g(j, l);
      if (dominated) return {false, std::make_pair(k, l)};
    }
  }
  return {};
}

struct ThreeChildrenCheck {
  bool holds = true;
  std::vector<int> deficient;  ///< 0-based columns with fewer than three children
};

inline ThreeChildrenCheck check_three_children(const BipartiteGraph& g) {
  ThreeChildrenCheck out;
  for (int k = 0; k < g.latents(); ++k)
    if (g.entries().col_sum(k) < 3) out.deficient.push_back(k);
  out.holds = out.deficient.empty();
  return out;
}

/// Structural identifiability report: the sufficient conditions (double
/// triangular, non-empty remainder columns, subset condition) and the
/// necessary ones (subset condition, three children per latent).
struct IdentifiabilityReport {
  bool double_triangular = false;
  std::optional<TriangularWitness> witness;
  /// Remainder columns all non-empty for the reported witness (i.e. for some witness).
  bool gamma3_columns_nonempty = false;
  bool gamma3_nonempty_all_witnesses = false;
  std::size_t witnesses_examined = 0;
  bool witness_enumeration_truncated = false;
  SubsetCheck subset;
  ThreeChildrenCheck three_children;
  bool sufficient = false;
  bool necessary_violated = false;
};

inline IdentifiabilityReport check_identifiability_conditions(const BipartiteGraph& g) {
  IdentifiabilityReport r;
  if (g.items() >= 2 * g.latents()) {
    const auto search = search_double_triangular(g);
    r.double_triangular = search.first.has_value();
    r.witness = search.preferred;
    r.gamma3_columns_nonempty = search.some_gamma3_covering;
    r.gamma3_nonempty_all_witnesses = search.all_gamma3_covering;
    r.witnesses_examined = search.witnesses_examined;
    r.witness_enumeration_truncated = search.truncated;
  }
  r.subset = check_subset_condition(g);
  r.three_children = check_three_children(g);
  r.sufficient = r.double_triangular && r.gamma3_columns_nonempty && r.subset.holds;
  r.necessary_violated = !r.subset.holds || !r.three_children.holds;
  return r;
}

/// Markov equivalence class representative: skeleton, v-structures, then
/// Meek's rules R1-R3 to closure.
inline Cpdag dag_to_cpdag(const LatentDag& d) {
  const int n = d.nodes();
  auto idx = [n](int a, int b) { return static_cast<std::size_t>(a * n + b); };
  std::vector<std::uint8_t> dir(static_cast<std::size_t>(n * n), 0), und(static_cast<std::size_t>(n * n), 0);
  auto adjacent = [&](int a, int b) { return dir[idx(a, b)] || dir[idx(b, a)] || und[idx(a, b)]; };

  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (d.has_edge(a, b)) und[idx(a, b)] = und[idx(b, a)] = 1;

  auto orient = [&](int a, int b) {
    und[idx(a, b)] = und[idx(b, a)] = 0;
    dir[idx(a, b)] = 1;
  };

  for (int c = 0; c < n; ++c) {
    const auto pa = d.parents(c);
    for (std::size_t i = 0; i < pa.size(); ++i)
      for (std::size_t k = i + 1; k < pa.size(); ++k)
        if (!d.has_edge(pa[i], pa[k]) && !d.has_edge(pa[k], pa[i])) {
          orient(pa[i], c);
          orient(pa[k], c);
        }
  }

  bool changed = true;
  while (changed) {
    changed = false;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (!und[idx(a, b)]) continue;
        // R1: c -> a - b, c and b non-adjacent  =>  a -> b
        bool apply = false;
        for (int c = 0; c < n && !apply; ++c)
          apply = c != b && dir[idx(c, a)] && !adjacent(c, b);
        // R2: a -> c -> b and a - b  =>  a -> b
        for (int c = 0; c < n && !apply; ++c) apply = dir[idx(a, c)] && dir[idx(c, b)];
        // R3: a - c -> b, a - e -> b, c and e non-adjacent  =>  a -> b
        for (int c = 0; c < n && !apply; ++c) {
          if (!(und[idx(a, c)] && dir[idx(c, b)])) continue;
          for (int e = c + 1; e < n && !apply; ++e)
            apply = und[idx(a, e)] && dir[idx(e, b)] && !adjacent(c, e);
        }
        if (apply) {
          orient(a, b);
          changed = true;
        }
      }
    }
  }

  std::set<Cpdag::Edge> directed, undirected;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (dir[idx(a, b)]) directed.insert({a, b});
      if (a < b && und[idx(a, b)]) undirected.insert({a, b});
    }
  return Cpdag(n, std::move(directed), std::move(undirected));
}

/// Hamming distance between two bipartite graphs of equal shape.
inline int shd_gamma(const BipartiteGraph& est, const BipartiteGraph& truth) {
  if (est.items() != truth.items() || est.latents() != truth.latents())
    throw DimensionError("shd_gamma: shape mismatch");
  int d = 0;
  for (int j = 0; j < est.items(); ++j)
    for (int k = 0; k < est.latents(); ++k) d += est(j, k) != truth(j, k) ? 1 : 0;
  return d;
}

/// Structural Hamming distance between CPDAGs. Per vertex pair: 1 if one graph
/// has an edge and the other does not; 1 if both have an edge of a different
/// kind (a -> b, b -> a, a - b); 0 otherwise.
inline int shd_cpdag(const Cpdag& est, const Cpdag& truth) {
  if (est.nodes() != truth.nodes()) throw DimensionError("shd_cpdag: node count mismatch");
  auto kind = [](const Cpdag& g, int a, int b) {
    if (g.has_undirected(a, b)) return 3;
    if (g.has_directed(a, b)) return 1;
    if (g.has_directed(b, a)) return 2;
    return 0;
  };
  int d = 0;
  for (int a = 0; a < est.nodes(); ++a)
    for (int b = a + 1; b < est.nodes(); ++b) d += kind(est, a, b) != kind(truth, a, b) ? 1 : 0;
  return d;
}

/// Column permutation of `est` minimising shd_gamma against `truth`: column k of
/// the aligned estimate is est column perm[k]. Exhaustive over K!; ties go to
/// the lexicographically smallest permutation.
inline std::vector<int> align_columns(const BipartiteGraph& est, const BipartiteGraph& truth) {
  if (est.items() != truth.items() || est.latents() != truth.latents())
    throw DimensionError("align_columns: shape mismatch");
  if (est.latents() > 10) throw DimensionError("align_columns: exhaustive search limited to K <= 10");
  std::vector<int> perm(static_cast<std::size_t>(est.latents()));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  int best_d = -1;
  do {
    int d = 0;
    for (int j = 0; j < est.items(); ++j)
      for (int k = 0; k < est.latents(); ++k)
        d += est(j, perm[static_cast<std::size_t>(k)]) != truth(j, k) ? 1 : 0;
    if (best_d < 0 || d < best_d) {
      best_d = d;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace blcm
