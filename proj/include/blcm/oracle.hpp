#pragma once

// Population-level identification machinery: rank checks on conditional
// tables, Kruskal ranks, recovery of the bipartite graph from column-scrambled
// tables, label resolution and the parameter budget.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "blcm/bits.hpp"
#include "blcm/error.hpp"
#include "blcm/graph.hpp"
#include "blcm/model.hpp"

namespace blcm {

inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  return Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues();
}

/// Number of singular values above rel * (largest singular value).
inline int numerical_rank(const Eigen::MatrixXd& m, double rel = 1e-8) {
  const auto sv = singular_values(m);
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel * sv(0)) ++r;
  return r;
}

namespace detail {

inline void require_lower_triangular(const BitMatrix& block) {
  if (block.rows() != block.cols()) throw PreconditionError("triangular block must be square");
  for (int r = 0; r < block.rows(); ++r) {
    if (block(r, r) != 1) throw PreconditionError("triangular block needs ones on the diagonal");
    for (int c = r + 1; c < block.cols(); ++c)
      if (block(r, c) != 0) throw PreconditionError("triangular block has a one above the diagonal");
  }
}

inline void require_sparsity(const BitMatrix& block, const Eigen::MatrixXd& theta) {
  const int k = block.cols();
  if (theta.rows() != k || theta.cols() != static_cast<Eigen::Index>(num_configs(k)))
    throw DimensionError("theta must be K x 2^K");
  for (int j = 0; j < k; ++j)
    for (Config h = 0; h < num_configs(k); ++h)
      for (int c = 0; c < k; ++c)
        if (block(j, c) == 0 && std::abs(theta(j, h) - theta(j, flip_bit(h, c))) > 1e-12)
          throw PreconditionError("theta row " + std::to_string(j + 1) + " depends on a non-parent latent");
}

/// Groups the columns of m whose entries agree within tol; ids follow first appearance.
inline std::vector<int> cluster_equal_columns(const Eigen::MatrixXd& m, double tol) {
  std::vector<int> id(static_cast<std::size_t>(m.cols()), -1);
  std::vector<Eigen::Index> reps;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (std::size_t r = 0; r < reps.size(); ++r)
      if ((m.col(c) - m.col(reps[r])).cwiseAbs().maxCoeff() <= tol) {
        id[static_cast<std::size_t>(c)] = static_cast<int>(r);
        break;
      }
    if (id[static_cast<std::size_t>(c)] < 0) {
      id[static_cast<std::size_t>(c)] = static_cast<int>(reps.size());
      reps.push_back(c);
    }
  }
  return id;
}

inline int count_distinct_columns(const Eigen::MatrixXd& m, const std::vector<int>& cols, double tol) {
  Eigen::MatrixXd sub(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
  const auto id = cluster_equal_columns(sub, tol);
  return id.empty() ? 0 : *std::max_element(id.begin(), id.end()) + 1;
}

inline int exact_log2(int n) {
  if (n <= 0 || (n & (n - 1)) != 0) return -1;
  return std::countr_zero(static_cast<unsigned>(n));
}

}  // namespace detail

/// T(x, h) = P(X_{1:K} >= x | H = h) = prod over k with x_k = 1 of theta(k, h),
/// rows and columns in configuration order. `block` must be unit lower
/// triangular as given and theta (K x 2^K) must respect its sparsity.
inline Eigen::MatrixXd survival_table(const BitMatrix& block, const Eigen::MatrixXd& theta) {
  detail::require_lower_triangular(block);
  detail::require_sparsity(block, theta);
  const int k = block.cols();
  const auto n = static_cast<Eigen::Index>(num_configs(k));
  Eigen::MatrixXd t = Eigen::MatrixXd::Ones(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index h = 0; h < n; ++h)
      for (int i = 0; i < k; ++i)
        if (config_bit(static_cast<Config>(x), i)) t(x, h) *= theta(i, h);
  return t;
}

/// P(X_S = x | H = h) for binary items S, rows x in configuration order over S.
inline Eigen::MatrixXd item_set_matrix(const Eigen::MatrixXd& theta, std::span<const int> items) {
  const auto n_rows = static_cast<Eigen::Index>(std::size_t{1} << items.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Ones(n_rows, theta.cols());
  for (Eigen::Index x = 0; x < n_rows; ++x)
    for (Eigen::Index h = 0; h < theta.cols(); ++h)
      for (std::size_t i = 0; i < items.size(); ++i) {
        const double th = theta(items[i], h);
        p(x, h) *= config_bit(static_cast<Config>(x), static_cast<int>(i)) ? th : 1.0 - th;
      }
  return p;
}

struct TriangularRankReport {
  int rank = 0;
  bool full = false;
  double min_sv = 0.0;
  double max_sv = 0.0;
  double det_survival = 0.0;
  /// det(T00)^2 * prod of eta over configurations of the first K-1 latents.
  double det_factorized = 0.0;
  bool det_identity_holds = false;
};

/// Numerical rank of P(X_{1:K} | H) for a triangular block, plus the check of
/// the block determinant factorization of the survival table.
inline TriangularRankReport triangular_rank_check(const BitMatrix& block, const Eigen::MatrixXd& theta) {
  const auto t = survival_table(block, theta);
  const int k = block.cols();
  std::vector<int> all(static_cast<std::size_t>(k));
  std::iota(all.begin(), all.end(), 0);
  const auto p = item_set_matrix(theta, all);
  const auto sv = singular_values(p);

  TriangularRankReport r;
  r.max_sv = sv(0);
  r.min_sv = sv(sv.size() - 1);
  r.rank = numerical_rank(p, 1e-8);
  r.full = r.rank == static_cast<int>(num_configs(k));

  r.det_survival = t.determinant();
  double det00 = 1.0;
  if (k > 1) {
    BitMatrix sub(k - 1, k - 1);
    for (int a = 0; a < k - 1; ++a)
      for (int b = 0; b < k - 1; ++b) sub.set(a, b, block(a, b));
    const auto half = static_cast<Eigen::Index>(num_configs(k - 1));
    det00 = survival_table(sub, theta.topLeftCorner(k - 1, half)).determinant();
  }
  double eta = 1.0;
  for (Config h = 0; h < num_configs(k - 1); ++h) {
    const Config h1 = h | (Config{1} << (k - 1));
    eta *= theta(k - 1, h1) - theta(k - 1, h);
  }
  r.det_factorized = det00 * det00 * eta;
  double hadamard = 1.0;
  for (Eigen::Index c = 0; c < t.cols(); ++c) hadamard *= t.col(c).norm();
  const double diff = std::abs(r.det_survival - r.det_factorized);
  r.det_identity_holds =
      diff <= 1e-8 * std::max(std::abs(r.det_survival), std::abs(r.det_factorized)) + 1e-12 * hadamard;
  return r;
}

/// Largest R such that every R columns of m are linearly independent.
/// Independence uses singular values above rel * (top singular value of m).
inline int kruskal_rank(const Eigen::MatrixXd& m, double rel = 1e-10) {
  const auto n = static_cast<int>(m.cols());
  if (n == 0 || m.rows() == 0) return 0;
  const auto sv = singular_values(m);
  if (sv(0) == 0.0) return 0;
  const double thr = rel * sv(0);
  int full_rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thr) ++full_rank;
  if (full_rank == n) return n;

  auto independent = [&](const std::vector<int>& cols) {
    Eigen::MatrixXd sub(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
    const auto s = singular_values(sub);
    return s(s.size() - 1) > thr;
  };

  for (int size = 1; size <= full_rank; ++size) {
    std::vector<int> cols(static_cast<std::size_t>(size));
    std::iota(cols.begin(), cols.end(), 0);
    while (true) {
      if (!independent(cols)) return size - 1;
      int i = size - 1;
      while (i >= 0 && cols[static_cast<std::size_t>(i)] == n - size + i) --i;
      if (i < 0) break;
      ++cols[static_cast<std::size_t>(i)];
      for (int t = i + 1; t < size; ++t) cols[static_cast<std::size_t>(t)] = cols[static_cast<std::size_t>(t - 1)] + 1;
    }
  }
  return full_rank;
}

struct KruskalReport {
  int ranks[3] = {0, 0, 0};
  int sum = 0;
  int required = 0;
  int slack = 0;
  bool holds = false;
};

/// rk(T1) + rk(T2) + rk(T3) >= 2r + 2 for three matrices with r columns.
inline KruskalReport kruskal_condition(const Eigen::MatrixXd& t1, const Eigen::MatrixXd& t2, const Eigen::MatrixXd& t3, int r) {
  if (t1.cols() != r || t2.cols() != r || t3.cols() != r)
    throw DimensionError("kruskal_condition: every matrix needs r = " + std::to_string(r) + " columns");
  KruskalReport out;
  out.ranks[0] = kruskal_rank(t1);
  out.ranks[1] = kruskal_rank(t2);
  out.ranks[2] = kruskal_rank(t3);
  out.sum = out.ranks[0] + out.ranks[1] + out.ranks[2];
  out.required = 2 * r + 2;
  out.slack = out.sum - out.required;
  out.holds = out.slack >= 0;
  return out;
}

/// Per-item discretization thresholds; item j contributes the events
/// {X_j > t} for each listed t.
using Thresholds = std::vector<std::vector<double>>;

inline Thresholds default_thresholds(int j) { return Thresholds(static_cast<std::size_t>(j), std::vector<double>{0.0}); }

inline Cuts first_cuts(const Thresholds& t) {
  Cuts c;
  for (const auto& row : t) {
    if (row.empty()) throw ParamError("every item needs at least one threshold");
    c.push_back(row.front());
  }
  return c;
}

/// Numerical rank of the joint pmf matrix of the discretized items S1 and S2.
inline int rank_of_observed_margin(const Blcm& m, std::span<const int> s1, std::span<const int> s2, const Cuts& cuts) {
  for (int a : s1)
    if (std::find(s2.begin(), s2.end(), a) != s2.end()) throw ParamError("rank_of_observed_margin: item sets overlap");
  const auto theta = conditional_table(m, cuts).matrix();
  const auto a = item_set_matrix(theta, s1);
  const auto b = item_set_matrix(theta, s2);
  Eigen::VectorXd pi(static_cast<Eigen::Index>(m.proportions().size()));
  for (Config h = 0; h < m.proportions().size(); ++h) pi(h) = m.proportions()[h];
  const Eigen::MatrixXd joint = a * pi.asDiagonal() * b.transpose();
  return numerical_rank(joint, 1e-8);
}

inline int rank_of_observed_margin(const Blcm& m, std::span<const int> s1, std::span<const int> s2) {
  return rank_of_observed_margin(m, s1, s2, default_cuts(m.items()));
}

struct KIdentification {
  int k = 0;
  int rank = 0;
  TriangularWitness witness;
};

/// Number of latents read off the rank of the joint pmf over the witness split.
inline KIdentification estimate_k_population(const Blcm& m, int max_k = 8) {
  const auto w = find_double_triangular(m.gamma());
  if (!w) throw SearchError("estimate_k_population: no double triangular witness");
  KIdentification out;
  out.witness = *w;
  out.rank = rank_of_observed_margin(m, w->rows1, w->rows2);
  const int k = detail::exact_log2(out.rank);
  if (k < 0 || k > max_k) throw SearchError("estimate_k_population: margin rank " + std::to_string(out.rank) + " is not 2^k with k <= max_k");
  out.k = k;
  return out;
}

/// Discretized conditional tables M_j (kappa_j x 2^K, last row all ones) whose
/// columns share one unknown permutation.
struct ScrambledTables {
  std::vector<Eigen::MatrixXd> tables;
  int latents = 0;

  int items() const noexcept { return static_cast<int>(tables.size()); }
};

/// Scrambled tables plus the permutation that produced them. Column c of every
/// scrambled table is column hidden[c] of the true table. Recovery functions
/// take only ScrambledTables.
struct ScrambleResult {
  ScrambledTables tables;
  std::vector<Config> hidden;
};

inline ScrambleResult scramble_with(const Blcm& m, std::vector<Config> perm, const Thresholds& thresholds) {
  const std::size_t n = num_configs(m.latents());
  if (perm.size() != n) throw DimensionError("scramble: permutation length must be 2^K");
  if (static_cast<int>(thresholds.size()) != m.items()) throw DimensionError("scramble: one threshold list per item");
  ScrambleResult out;
  out.tables.latents = m.latents();
  for (int j = 0; j < m.items(); ++j) {
    const auto& ts = thresholds[static_cast<std::size_t>(j)];
    Eigen::MatrixXd t(static_cast<Eigen::Index>(ts.size() + 1), static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < n; ++c) {
      const auto u = m.parent_config(j, perm[c]);
      for (std::size_t r = 0; r < ts.size(); ++r) t(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m.item(j).exceed(u, ts[r]);
      t(static_cast<Eigen::Index>(ts.size()), static_cast<Eigen::Index>(c)) = 1.0;
    }
    out.tables.tables.push_back(std::move(t));
  }
  out.hidden = std::move(perm);
  return out;
}

inline ScrambleResult scramble(const Blcm& m, std::uint64_t seed, const Thresholds& thresholds) {
  std::vector<Config> perm(num_configs(m.latents()));
  std::iota(perm.begin(), perm.end(), Config{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  return scramble_with(m, std::move(perm), thresholds);
}

inline ScrambleResult scramble(const Blcm& m, std::uint64_t seed) { return scramble(m, seed, default_thresholds(m.items())); }

/// Partitions of the scrambled column set built from the second triangular
/// block: level[k] is the partition by equal columns of the k-th block item
/// and running[k] the intersection of levels 0..k. Blocks are lists of columns.
struct PartitionFamily {
  std::vector<std::vector<std::vector<int>>> level;
  std::vector<std::vector<std::vector<int>>> running;
};

struct GammaRecovery {
  /// Recovered graph; column k is the latent whose first pure-in-order child
  /// is witness.rows2[k].
  BipartiteGraph gamma;
  /// tau[k]: column of the witness's graph matched to recovered column k.
  std::vector<int> tau;
  PartitionFamily partitions;
};

namespace detail {

inline std::vector<std::vector<int>> blocks_from_ids(const std::vector<int>& ids) {
  std::vector<std::vector<int>> out;
  for (std::size_t c = 0; c < ids.size(); ++c) {
    const auto id = static_cast<std::size_t>(ids[c]);
    if (out.size() <= id) out.resize(id + 1);
    out[id].push_back(static_cast<int>(c));
  }
  return out;
}

inline PartitionFamily build_partitions(const ScrambledTables& st, const TriangularWitness& w, int k, double tol) {
  if (static_cast<int>(w.rows2.size()) != k) throw DimensionError("witness block size differs from K");
  const int n = static_cast<int>(num_configs(k));
  PartitionFamily pf;
  std::vector<std::vector<int>> key(static_cast<std::size_t>(n));
  for (int lvl = 0; lvl < k; ++lvl) {
    const auto ids = cluster_equal_columns(st.tables.at(static_cast<std::size_t>(w.rows2[static_cast<std::size_t>(lvl)])), tol);
    pf.level.push_back(blocks_from_ids(ids));
    for (int c = 0; c < n; ++c) key[static_cast<std::size_t>(c)].push_back(ids[static_cast<std::size_t>(c)]);
    std::vector<std::vector<int>> blocks;
    std::vector<std::vector<int>> seen;
    for (int c = 0; c < n; ++c) {
      const auto it = std::find(seen.begin(), seen.end(), key[static_cast<std::size_t>(c)]);
      if (it == seen.end()) {
        seen.push_back(key[static_cast<std::size_t>(c)]);
        blocks.push_back({c});
      } else {
        blocks[static_cast<std::size_t>(it - seen.begin())].push_back(c);
      }
    }
    const std::size_t expect = std::size_t{1} << (lvl + 1);
    if (blocks.size() != expect)
      throw StructureError("partition intersection at level " + std::to_string(lvl + 1) + " has " +
                           std::to_string(blocks.size()) + " blocks, expected " + std::to_string(expect));
    for (const auto& b : blocks)
      if (b.size() != static_cast<std::size_t>(n) / expect)
        throw StructureError("partition intersection at level " + std::to_string(lvl + 1) + " has unequal blocks");
    pf.running.push_back(std::move(blocks));
  }
  return pf;
}

}  // namespace detail

/// Recovers the bipartite graph, up to label permutation, from scrambled
/// population tables: the partitions from the second triangular block fix the
/// latent order, then each row is read off the counts of distinct columns
/// inside the blocks of successive partitions.
inline GammaRecovery recover_gamma_population(const ScrambledTables& st, const TriangularWitness& w, int k, double tol = 1e-9) {
  if (st.latents != k) throw DimensionError("recover_gamma_population: K mismatch");
  GammaRecovery out;
  out.partitions = detail::build_partitions(st, w, k, tol);
  const int n = static_cast<int>(num_configs(k));
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);

  BitMatrix g(st.items(), k);
  for (int j = 0; j < st.items(); ++j) {
    const auto& mj = st.tables[static_cast<std::size_t>(j)];
    std::vector<int> d(static_cast<std::size_t>(k + 1), 0);
    for (int lvl = k - 1; lvl >= 0; --lvl) {
      const auto& blocks = lvl == 0 ? std::vector<std::vector<int>>{all} : out.partitions.running[static_cast<std::size_t>(lvl - 1)];
      int count = -1;
      for (const auto& b : blocks) {
        const int c = detail::count_distinct_columns(mj, b, tol);
        if (count >= 0 && c != count)
          throw StructureError("item " + std::to_string(j + 1) + ": distinct-column counts differ across blocks");
        count = c;
      }
      const int e = detail::exact_log2(count);
      if (e < 0) throw StructureError("item " + std::to_string(j + 1) + ": distinct-column count is not a power of two");
      d[static_cast<std::size_t>(lvl)] = e;
      const int gamma_bit = d[static_cast<std::size_t>(lvl)] - d[static_cast<std::size_t>(lvl + 1)];
      if (gamma_bit != 0 && gamma_bit != 1)
        throw StructureError("item " + std::to_string(j + 1) + ": inconsistent distinct-column counts");
      g.set(j, lvl, gamma_bit == 1);
    }
  }
  out.gamma = BipartiteGraph(std::move(g));
  out.tau = w.cols2;
  return out;
}

/// Configuration labels for scrambled columns. sides[k][c] is the recovered
/// value of latent k at column c; labels[c] packs them in configuration order.
struct LabelResolution {
  std::vector<std::vector<int>> sides;
  std::vector<Config> labels;
};

namespace detail {

inline LabelResolution pack_sides(std::vector<std::vector<int>> sides, int n) {
  LabelResolution out;
  out.labels.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t k = 0; k < sides.size(); ++k)
    for (int c = 0; c < n; ++c)
      if (sides[k][static_cast<std::size_t>(c)]) out.labels[static_cast<std::size_t>(c)] |= Config{1} << k;
  out.sides = std::move(sides);
  return out;
}

}  // namespace detail

/// Splits the scrambled columns into {h_k = 0} / {h_k = 1} for every latent by
/// merging equal-column clusters over the children of each latent. The side
/// holding column 0 is labelled 0, so the result is exact up to sign flips.
inline LabelResolution resolve_signs_subset(const ScrambledTables& st, const BipartiteGraph& gamma, double tol = 1e-9) {
  const int k = gamma.latents();
  if (st.latents != k || st.items() != gamma.items()) throw DimensionError("resolve_signs_subset: shape mismatch");
  const int n = static_cast<int>(num_configs(k));
  std::vector<std::vector<int>> sides;
  for (int lat = 0; lat < k; ++lat) {
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      return x;
    };
    const auto children = gamma.children(lat);
    if (children.empty()) throw SubsetViolation("latent " + std::to_string(lat + 1) + " has no children");
    for (int j : children) {
      const auto ids = detail::cluster_equal_columns(st.tables[static_cast<std::size_t>(j)], tol);
      std::vector<int> first(static_cast<std::size_t>(n), -1);
      for (int c = 0; c < n; ++c) {
        auto& f = first[static_cast<std::size_t>(ids[static_cast<std::size_t>(c)])];
        if (f < 0)
          f = c;
        else
          parent[static_cast<std::size_t>(find(c))] = find(f);
      }
    }
    std::vector<int> roots;
    for (int c = 0; c < n; ++c)
      if (std::find(roots.begin(), roots.end(), find(c)) == roots.end()) roots.push_back(find(c));
    if (roots.size() != 2)
      throw SubsetViolation("merging the children of latent " + std::to_string(lat + 1) + " gives " +
                            std::to_string(roots.size()) + " clusters, expected 2");
    std::vector<int> side(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) side[static_cast<std::size_t>(c)] = find(c) == roots[0] ? 0 : 1;
    sides.push_back(std::move(side));
  }
  return detail::pack_sides(std::move(sides), n);
}

/// Exact configuration labels under monotonicity: level by level, every block
/// of the running partition is split by the baseline row of the next
/// triangular item and the side with the larger value gets bit 1. Latent k of
/// the result is the latent introduced by witness.rows2[k].
inline LabelResolution resolve_signs_monotone(const ScrambledTables& st, const TriangularWitness& w, int baseline_row = 0,
                                              double tol = 1e-9) {
  const int k = st.latents;
  const int n = static_cast<int>(num_configs(k));
  if (static_cast<int>(w.rows2.size()) != k) throw DimensionError("resolve_signs_monotone: witness block size differs from K");
  std::vector<Config> prefix(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> sides;
  for (int lvl = 0; lvl < k; ++lvl) {
    const auto& m = st.tables.at(static_cast<std::size_t>(w.rows2[static_cast<std::size_t>(lvl)]));
    if (baseline_row < 0 || baseline_row >= m.rows()) throw DimensionError("resolve_signs_monotone: baseline row out of range");
    std::vector<int> side(static_cast<std::size_t>(n), 0);
    for (Config p = 0; p < (Config{1} << lvl); ++p) {
      std::vector<int> block;
      for (int c = 0; c < n; ++c)
        if (prefix[static_cast<std::size_t>(c)] == p) block.push_back(c);
      if (block.empty()) throw StructureError("resolve_signs_monotone: empty block at level " + std::to_string(lvl + 1));
      double lo = m(baseline_row, block[0]), hi = lo;
      for (int c : block) {
        lo = std::min(lo, m(baseline_row, c));
        hi = std::max(hi, m(baseline_row, c));
      }
      if (hi - lo <= tol)
        throw MonotoneViolation("baseline values tie within a block at level " + std::to_string(lvl + 1));
      std::size_t ones = 0;
      for (int c : block) {
        const double v = m(baseline_row, c);
        if (std::abs(v - hi) <= tol) {
          side[static_cast<std::size_t>(c)] = 1;
          ++ones;
        } else if (std::abs(v - lo) > tol) {
          throw StructureError("more than two baseline values within a block at level " + std::to_string(lvl + 1));
        }
      }
      if (2 * ones != block.size()) throw StructureError("unbalanced split at level " + std::to_string(lvl + 1));
    }
    for (int c = 0; c < n; ++c)
      if (side[static_cast<std::size_t>(c)]) prefix[static_cast<std::size_t>(c)] |= Config{1} << lvl;
    sides.push_back(std::move(side));
  }
  return detail::pack_sides(std::move(sides), n);
}

struct Budget {
  /// Free proportions plus one conditional parameter per item and configuration.
  std::int64_t n_params = 0;
  /// Free proportions plus one parameter per item and parent configuration.
  std::int64_t n_params_sparse = 0;
  std::int64_t n_equations = 0;
  std::int64_t deficit = 0;
};

/// Parameter count against the number of free cells of the binary pmf table.
inline Budget identifiability_budget(int k, std::span<const int> parent_counts) {
  const auto j = static_cast<int>(parent_counts.size());
  if (k < 0 || k > 30 || j > 62) throw DimensionError("identifiability_budget: size too large");
  Budget b;
  const std::int64_t free_pi = (std::int64_t{1} << k) - 1;
  b.n_params = free_pi + static_cast<std::int64_t>(j) * (std::int64_t{1} << k);
  b.n_params_sparse = free_pi;
  for (int p : parent_counts) b.n_params_sparse += std::int64_t{1} << p;
  b.n_equations = (std::int64_t{1} << j) - 1;
  b.deficit = b.n_params - b.n_equations;
  return b;
}

inline Budget identifiability_budget(const BipartiteGraph& g) {
  std::vector<int> counts;
  for (int j = 0; j < g.items(); ++j) counts.push_back(g.entries().row_sum(j));
  return identifiability_budget(g.latents(), counts);
}

}  // namespace blcm
