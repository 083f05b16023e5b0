#pragma once

// Independent reference computations used by the test suite.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <numbers>
#include <set>
#include <tuple>
#include <vector>

#include "blcm/blcm.hpp"

namespace fixtures {

using blcm::BitMatrix;
using blcm::Config;

inline BitMatrix random_bits(int rows, int cols, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  BitMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m.set(r, c, coin(rng));
  return m;
}

/// Exact determinant of an integer matrix by fraction-free elimination.
inline __int128 bareiss_det(std::vector<std::vector<__int128>> a) {
  const std::size_t n = a.size();
  if (n == 0) return 1;
  __int128 sign = 1, prev = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (a[k][k] == 0) {
      std::size_t p = k + 1;
      while (p < n && a[p][k] == 0) ++p;
      if (p == n) return 0;
      std::swap(a[k], a[p]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j) a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
    prev = a[k][k];
  }
  return sign * a[n - 1][n - 1];
}

inline void for_each_subset(int n, int r, const std::function<bool(const std::vector<int>&)>& f) {
  if (r > n) return;
  std::vector<int> idx(static_cast<std::size_t>(r));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    if (!f(idx)) return;
    int i = r - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - r + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int t = i + 1; t < r; ++t) idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
  }
}

/// Columns `cols` of an integer matrix are independent iff some maximal minor
/// over those columns is nonzero.
inline bool columns_independent(const std::vector<std::vector<long long>>& m, const std::vector<int>& cols) {
  const int rows = static_cast<int>(m.size());
  const int r = static_cast<int>(cols.size());
  bool found = false;
  for_each_subset(rows, r, [&](const std::vector<int>& rs) {
    std::vector<std::vector<__int128>> sub(static_cast<std::size_t>(r), std::vector<__int128>(static_cast<std::size_t>(r)));
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) sub[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m[static_cast<std::size_t>(rs[static_cast<std::size_t>(i)])][static_cast<std::size_t>(cols[static_cast<std::size_t>(j)])];
    found = bareiss_det(sub) != 0;
    return !found;
  });
  return found;
}

/// Kruskal rank by checking every column subset with exact minors.
inline int kruskal_rank_bruteforce(const std::vector<std::vector<long long>>& m) {
  const int cols = m.empty() ? 0 : static_cast<int>(m[0].size());
  int k = 0;
  for (int r = 1; r <= cols; ++r) {
    bool all = true;
    for_each_subset(cols, r, [&](const std::vector<int>& cs) {
      all = columns_independent(m, cs);
      return all;
    });
    if (!all) break;
    k = r;
  }
  return k;
}

/// Small integer matrix, 2-6 rows and 1-8 columns, with planted column
/// copies and combinations.
inline std::vector<std::vector<long long>> random_int_matrix(std::mt19937_64& rng) {
  const int rows = 2 + static_cast<int>(rng() % 5), cols = 1 + static_cast<int>(rng() % 8);
  std::uniform_int_distribution<int> entry(-2, 2);
  std::vector<std::vector<long long>> m(static_cast<std::size_t>(rows), std::vector<long long>(static_cast<std::size_t>(cols)));
  for (auto& r : m)
    for (auto& v : r) v = entry(rng);
  // Plant dependencies: copy or combine earlier columns.
  for (int c = 1; c < cols; ++c) {
    const auto kind = rng() % 4;
    const int a = static_cast<int>(rng() % static_cast<std::uint64_t>(c)), b = static_cast<int>(rng() % static_cast<std::uint64_t>(c));
    for (auto& r : m) {
      if (kind == 0) r[static_cast<std::size_t>(c)] = r[static_cast<std::size_t>(a)];
      if (kind == 1) r[static_cast<std::size_t>(c)] = r[static_cast<std::size_t>(a)] - 2 * r[static_cast<std::size_t>(b)];
    }
  }
  return m;
}

inline Eigen::MatrixXd to_eigen(const std::vector<std::vector<long long>>& m) {
  Eigen::MatrixXd e(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m[0].size()));
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < m[0].size(); ++c) e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<double>(m[r][c]);
  return e;
}

/// Triangularity by trying every row order and column order.
inline bool triangular_bruteforce(const BitMatrix& block) {
  const int k = block.rows();
  std::vector<int> rows(static_cast<std::size_t>(k)), cols(static_cast<std::size_t>(k));
  std::iota(rows.begin(), rows.end(), 0);
  do {
    std::iota(cols.begin(), cols.end(), 0);
    do {
      bool ok = true;
      for (int i = 0; i < k && ok; ++i) {
        ok = block(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(i)]) == 1;
        for (int l = i + 1; l < k && ok; ++l) ok = block(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(l)]) == 0;
      }
      if (ok) return true;
    } while (std::next_permutation(cols.begin(), cols.end()));
  } while (std::next_permutation(rows.begin(), rows.end()));
  return false;
}

struct DoubleTriangularBrute {
  bool exists = false;
  bool some_covering = false;
  std::size_t pairs = 0;
};

/// Every unordered pair of disjoint K-row subsets, each tested by brute force.
inline DoubleTriangularBrute double_triangular_bruteforce(const BitMatrix& g) {
  const int j = g.rows(), k = g.cols();
  std::vector<std::vector<int>> tri;
  for_each_subset(j, k, [&](const std::vector<int>& rs) {
    if (triangular_bruteforce(g.select_rows(rs))) tri.push_back(rs);
    return true;
  });
  DoubleTriangularBrute out;
  for (std::size_t a = 0; a < tri.size(); ++a)
    for (std::size_t b = a + 1; b < tri.size(); ++b) {
      std::set<int> used(tri[a].begin(), tri[a].end());
      bool disjoint = true;
      for (int r : tri[b]) disjoint = disjoint && used.insert(r).second;
      if (!disjoint) continue;
      ++out.pairs;
      out.exists = true;
      bool covering = true;
      for (int c = 0; c < k; ++c) {
        bool hit = false;
        for (int r = 0; r < j; ++r) hit = hit || (!used.count(r) && g(r, c) == 1);
        covering = covering && hit;
      }
      out.some_covering = out.some_covering || covering;
    }
  return out;
}

/// All DAGs on n nodes as adjacency matrices.
inline std::vector<blcm::LatentDag> all_dags(int n) {
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  std::vector<blcm::LatentDag> out;
  std::size_t total = 1;
  for (std::size_t i = 0; i < pairs.size(); ++i) total *= 3;
  for (std::size_t code = 0; code < total; ++code) {
    BitMatrix m(n, n);
    std::size_t c = code;
    for (auto [a, b] : pairs) {
      const auto t = c % 3;
      c /= 3;
      if (t == 1) m.set(a, b, true);
      if (t == 2) m.set(b, a, true);
    }
    try {
      out.emplace_back(m);
    } catch (const blcm::ParamError&) {
    }
  }
  return out;
}

inline std::set<std::pair<int, int>> skeleton(const blcm::LatentDag& d) {
  std::set<std::pair<int, int>> s;
  for (int a = 0; a < d.nodes(); ++a)
    for (int b = 0; b < d.nodes(); ++b)
      if (d.has_edge(a, b)) s.insert({std::min(a, b), std::max(a, b)});
  return s;
}

inline std::set<std::tuple<int, int, int>> v_structures(const blcm::LatentDag& d) {
  std::set<std::tuple<int, int, int>> s;
  for (int c = 0; c < d.nodes(); ++c)
    for (int a = 0; a < d.nodes(); ++a)
      for (int b = a + 1; b < d.nodes(); ++b)
        if (d.has_edge(a, c) && d.has_edge(b, c) && !d.has_edge(a, b) && !d.has_edge(b, a)) s.insert({a, c, b});
  return s;
}

/// CPDAG from the full equivalence class: an edge is directed when every
/// member with the same skeleton and v-structures orients it the same way.
inline blcm::Cpdag cpdag_by_enumeration(const blcm::LatentDag& d) {
  const int n = d.nodes();
  const auto sk = skeleton(d);
  const auto vs = v_structures(d);
  std::vector<blcm::LatentDag> cls;
  for (auto& o : all_dags(n))
    if (skeleton(o) == sk && v_structures(o) == vs) cls.push_back(o);
  std::set<std::pair<int, int>> dir, und;
  for (auto [a, b] : sk) {
    bool ab = true, ba = true;
    for (const auto& o : cls) {
      ab = ab && o.has_edge(a, b);
      ba = ba && o.has_edge(b, a);
    }
    if (ab) dir.insert({a, b});
    else if (ba) dir.insert({b, a});
    else und.insert({a, b});
  }
  return blcm::Cpdag(n, dir, und);
}

/// Composite Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// P(X > 0) for Normal(mu, 1) by quadrature of the density over [0, mu + 40].
inline double normal_exceed_quadrature(double mu) {
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return simpson([&](double x) { return c * std::exp(-0.5 * (x - mu) * (x - mu)); }, 0.0, std::max(mu, 0.0) + 40.0, 200000);
}

/// P(X > 0) for Cauchy(mu, 1): quadrature on [0, mu + L] plus the analytic tail
/// 1/pi * atan(1/L) beyond it.
inline double cauchy_exceed_quadrature(double mu) {
  const double l = 1000.0;
  const double body = simpson([&](double x) { return 1.0 / (std::numbers::pi * (1.0 + (x - mu) * (x - mu))); }, 0.0, mu + l, 2000000);
  return body + std::atan(1.0 / l) / std::numbers::pi;
}

/// Unpenalized latent class EM on raw 0/1 rows, no pattern compression.
inline blcm::EmParams plain_em(const blcm::BinaryMatrix& y, int k, blcm::EmParams p, int iters) {
  const auto n = y.rows();
  const auto j = y.cols();
  const auto c = static_cast<Eigen::Index>(blcm::num_configs(k));
  for (int it = 0; it < iters; ++it) {
    Eigen::MatrixXd post(n, c);
    for (Eigen::Index i = 0; i < n; ++i) {
      double tot = 0.0;
      for (Eigen::Index h = 0; h < c; ++h) {
        double v = p.pi[static_cast<std::size_t>(h)];
        for (Eigen::Index q = 0; q < j; ++q) v *= y(i, q) ? p.theta(q, h) : 1.0 - p.theta(q, h);
        post(i, h) = v;
        tot += v;
      }
      post.row(i) /= tot;
    }
    for (Eigen::Index h = 0; h < c; ++h) {
      const double mass = post.col(h).sum();
      p.pi[static_cast<std::size_t>(h)] = mass / static_cast<double>(n);
      for (Eigen::Index q = 0; q < j; ++q) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += y(i, q) * post(i, h);
        p.theta(q, h) = std::clamp(s / mass, blcm::kThetaMin, blcm::kThetaMax);
      }
    }
  }
  return p;
}

inline double plain_loglik(const blcm::BinaryMatrix& y, const blcm::EmParams& p) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    double tot = 0.0;
    for (std::size_t h = 0; h < p.pi.size(); ++h) {
      double v = p.pi[h];
      for (Eigen::Index q = 0; q < y.cols(); ++q) v *= y(i, q) ? p.theta(q, static_cast<Eigen::Index>(h)) : 1.0 - p.theta(q, static_cast<Eigen::Index>(h));
      tot += v;
    }
    ll += std::log(tot);
  }
  return ll;
}

/// Bernoulli BIC of a DAG from configuration counts, computed directly.
inline double dag_bic(const blcm::LatentDag& d, const std::vector<double>& counts) {
  const int k = d.nodes();
  double n = 0.0;
  for (double c : counts) n += c;
  double s = 0.0;
  for (int v = 0; v < k; ++v) {
    const auto pa = d.parents(v);
    const std::size_t m = std::size_t{1} << pa.size();
    std::vector<double> n1(m, 0.0), nt(m, 0.0);
    for (Config h = 0; h < counts.size(); ++h) {
      std::size_t u = 0;
      for (std::size_t i = 0; i < pa.size(); ++i) u |= static_cast<std::size_t>((h >> pa[i]) & 1u) << i;
      nt[u] += counts[h];
      if ((h >> v) & 1u) n1[u] += counts[h];
    }
    for (std::size_t u = 0; u < m; ++u) {
      if (n1[u] > 0) s += n1[u] * std::log(n1[u] / nt[u]);
      if (nt[u] - n1[u] > 0) s += (nt[u] - n1[u]) * std::log((nt[u] - n1[u]) / nt[u]);
    }
    s -= 0.5 * std::log(n) * static_cast<double>(m);
  }
  return s;
}

}  // namespace fixtures
