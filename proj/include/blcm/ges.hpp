#pragma once

// Greedy equivalence search over binary variables with a BIC score, working on
// data summarized as counts over the 2^K joint configurations.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "blcm/bits.hpp"
#include "blcm/error.hpp"
#include "blcm/graph.hpp"

namespace blcm {

/// BIC local score for binary nodes: maximized log-likelihood of a node given
/// its parents minus (log N / 2) per free parameter.
class BinaryBicScore {
 public:
  /// counts[h] = number of samples with joint configuration h.
  BinaryBicScore(int k, std::vector<double> counts) : k_(k), counts_(std::move(counts)) {
    if (counts_.size() != num_configs(k)) throw DimensionError("BinaryBicScore: counts must have length 2^K");
    for (double c : counts_) n_ += c;
  }

  int nodes() const noexcept { return k_; }
  double samples() const noexcept { return n_; }

  double local(int v, std::uint32_t parents) const {
    const auto key = std::make_pair(v, parents);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    std::vector<int> pa;
    for (int i = 0; i < k_; ++i)
      if ((parents >> i) & 1u) pa.push_back(i);
    const std::size_t m = num_configs(static_cast<int>(pa.size()));
    std::vector<double> n1(m, 0.0), nt(m, 0.0);
    for (Config h = 0; h < counts_.size(); ++h) {
      const auto u = project_config(h, pa);
      nt[u] += counts_[h];
      if (config_bit(h, v)) n1[u] += counts_[h];
    }
    double ll = 0.0;
    for (std::size_t u = 0; u < m; ++u) {
      const double n0 = nt[u] - n1[u];
      if (n1[u] > 0) ll += n1[u] * std::log(n1[u] / nt[u]);
      if (n0 > 0) ll += n0 * std::log(n0 / nt[u]);
    }
    const double s = ll - 0.5 * std::log(std::max(n_, 1.0)) * static_cast<double>(m);
    cache_.emplace(key, s);
    return s;
  }

  double dag_score(const LatentDag& d) const {
    double s = 0.0;
    for (int v = 0; v < k_; ++v) {
      std::uint32_t pa = 0;
      for (int p : d.parents(v)) pa |= 1u << p;
      s += local(v, pa);
    }
    return s;
  }

 private:
  int k_;
  std::vector<double> counts_;
  double n_ = 0.0;
  mutable std::map<std::pair<int, std::uint32_t>, double> cache_;
};

namespace detail {

/// Partially directed graph on at most 31 nodes as adjacency bitmasks.
struct Pdag {
  int n = 0;
  std::vector<std::uint32_t> out;  // out[a] has b: a -> b
  std::vector<std::uint32_t> und;  // und[a] has b: a - b (symmetric)

  explicit Pdag(int nodes) : n(nodes), out(static_cast<std::size_t>(nodes), 0), und(static_cast<std::size_t>(nodes), 0) {}

  std::uint32_t in(int a) const {
    std::uint32_t m = 0;
    for (int b = 0; b < n; ++b)
      if ((out[static_cast<std::size_t>(b)] >> a) & 1u) m |= 1u << b;
    return m;
  }
  std::uint32_t adj(int a) const { return out[static_cast<std::size_t>(a)] | und[static_cast<std::size_t>(a)] | in(a); }
  bool adjacent(int a, int b) const { return (adj(a) >> b) & 1u; }

  void add_directed(int a, int b) { out[static_cast<std::size_t>(a)] |= 1u << b; }
  void remove_edge(int a, int b) {
    out[static_cast<std::size_t>(a)] &= ~(1u << b);
    out[static_cast<std::size_t>(b)] &= ~(1u << a);
    und[static_cast<std::size_t>(a)] &= ~(1u << b);
    und[static_cast<std::size_t>(b)] &= ~(1u << a);
  }
  void orient(int a, int b) {
    remove_edge(a, b);
    add_directed(a, b);
  }

  static Pdag from_cpdag(const Cpdag& c) {
    Pdag p(c.nodes());
    for (auto [a, b] : c.directed()) p.add_directed(a, b);
    for (auto [a, b] : c.undirected()) {
      p.und[static_cast<std::size_t>(a)] |= 1u << b;
      p.und[static_cast<std::size_t>(b)] |= 1u << a;
    }
    return p;
  }
};

inline bool is_clique(const Pdag& g, std::uint32_t set) {
  for (int a = 0; a < g.n; ++a) {
    if (!((set >> a) & 1u)) continue;
    for (int b = a + 1; b < g.n; ++b)
      if (((set >> b) & 1u) && !g.adjacent(a, b)) return false;
  }
  return true;
}

/// Whether a path from `from` to `to` exists using undirected edges and
/// edges directed away from the start, avoiding the nodes in `blocked`.
inline bool semi_directed_path(const Pdag& g, int from, int to, std::uint32_t blocked) {
  std::uint32_t seen = 1u << from;
  std::vector<int> stack{from};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    const std::uint32_t next = g.out[static_cast<std::size_t>(v)] | g.und[static_cast<std::size_t>(v)];
    for (int w = 0; w < g.n; ++w) {
      if (!((next >> w) & 1u) || ((seen >> w) & 1u)) continue;
      if (w == to) return true;
      if ((blocked >> w) & 1u) continue;
      seen |= 1u << w;
      stack.push_back(w);
    }
  }
  return false;
}

/// A DAG in the class of the PDAG (Dor and Tarsi), or nullopt when none exists.
inline std::optional<LatentDag> consistent_extension(const Pdag& input) {
  Pdag g = input;
  BitMatrix result(g.n, g.n);
  for (int a = 0; a < g.n; ++a)
    for (int b = 0; b < g.n; ++b)
      if ((g.out[static_cast<std::size_t>(a)] >> b) & 1u) result.set(a, b, true);
  std::uint32_t alive = g.n == 32 ? ~0u : ((1u << g.n) - 1);
  while (alive != 0) {
    int pick = -1;
    for (int x = 0; x < g.n && pick < 0; ++x) {
      if (!((alive >> x) & 1u)) continue;
      if ((g.out[static_cast<std::size_t>(x)] & alive) != 0) continue;
      const std::uint32_t adj_x = g.adj(x) & alive;
      const std::uint32_t nb = g.und[static_cast<std::size_t>(x)] & alive;
      bool ok = true;
      for (int y = 0; y < g.n && ok; ++y) {
        if (!((nb >> y) & 1u)) continue;
        const std::uint32_t others = adj_x & ~(1u << y);
        ok = (g.adj(y) & others) == others;
      }
      if (ok) pick = x;
    }
    if (pick < 0) return std::nullopt;
    for (int y = 0; y < g.n; ++y)
      if (((g.und[static_cast<std::size_t>(pick)] & alive) >> y) & 1u) result.set(y, pick, true);
    alive &= ~(1u << pick);
    for (int y = 0; y < g.n; ++y) g.remove_edge(pick, y);
  }
  return LatentDag(std::move(result));
}

inline Cpdag to_cpdag(const Pdag& g) {
  auto dag = consistent_extension(g);
  if (!dag) throw SearchError("GES produced a PDAG without a consistent extension");
  return dag_to_cpdag(*dag);
}

inline std::uint32_t parents_mask(const Pdag& g, int y) { return g.in(y); }

}  // namespace detail

/// Greedy equivalence search: forward insertions then backward deletions, each
/// phase applying the best strictly improving operator until none remains.
inline Cpdag ges(const BinaryBicScore& score) {
  using detail::Pdag;
  const int n = score.nodes();
  if (n > 16) throw DimensionError("ges: at most 16 nodes supported");
  Cpdag current(n, {}, {});

  // Forward phase.
  while (true) {
    const Pdag g = Pdag::from_cpdag(current);
    double best = 0.0;
    int bx = -1, by = -1;
    std::uint32_t bt = 0;
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) {
        if (x == y || g.adjacent(x, y)) continue;
        const std::uint32_t nb_y = g.und[static_cast<std::size_t>(y)];
        const std::uint32_t adj_x = g.adj(x);
        const std::uint32_t na = nb_y & adj_x;
        const std::uint32_t t0 = nb_y & ~adj_x;
        const std::uint32_t pa = detail::parents_mask(g, y);
        for (std::uint32_t t = t0;; t = (t - 1) & t0) {
          const std::uint32_t na_t = na | t;
          if (detail::is_clique(g, na_t) && !detail::semi_directed_path(g, y, x, na_t)) {
            const double delta = score.local(y, na_t | pa | (1u << x)) - score.local(y, na_t | pa);
            if (delta > best + 1e-12) {
              best = delta;
              bx = x;
              by = y;
              bt = t;
            }
          }
          if (t == 0) break;
        }
      }
    }
    if (bx < 0) break;
    Pdag next = g;
    next.add_directed(bx, by);
    for (int t = 0; t < n; ++t)
      if ((bt >> t) & 1u) next.orient(t, by);
    current = detail::to_cpdag(next);
  }

  // Backward phase.
  while (true) {
    const Pdag g = Pdag::from_cpdag(current);
    double best = 0.0;
    int bx = -1, by = -1;
    std::uint32_t bh = 0;
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) {
        if (x == y) continue;
        const bool x_to_y = (g.out[static_cast<std::size_t>(x)] >> y) & 1u;
        const bool x_dash_y = (g.und[static_cast<std::size_t>(x)] >> y) & 1u;
        if (!x_to_y && !x_dash_y) continue;
        const std::uint32_t na = g.und[static_cast<std::size_t>(y)] & g.adj(x);
        const std::uint32_t pa = detail::parents_mask(g, y);
        for (std::uint32_t h = na;; h = (h - 1) & na) {
          const std::uint32_t rest = na & ~h;
          if (detail::is_clique(g, rest)) {
            const std::uint32_t base = (rest | pa) & ~(1u << x);
            const double delta = score.local(y, base) - score.local(y, base | (1u << x));
            if (delta > best + 1e-12) {
              best = delta;
              bx = x;
              by = y;
              bh = h;
            }
          }
          if (h == 0) break;
        }
      }
    }
    if (bx < 0) break;
    Pdag next = g;
    next.remove_edge(bx, by);
    for (int h = 0; h < n; ++h)
      if ((bh >> h) & 1u) {
        next.orient(by, h);
        if (next.adjacent(bx, h) && ((next.und[static_cast<std::size_t>(bx)] >> h) & 1u)) next.orient(bx, h);
      }
    current = detail::to_cpdag(next);
  }
  return current;
}

}  // namespace blcm
