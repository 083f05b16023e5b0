#pragma once

// Model containers for binary latent causal models: latent proportions, item
// conditionals, the discretized conditional table, datasets, exact marginal pmf
// computation and the non-identifiability constructions.

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "blcm/bits.hpp"
#include "blcm/error.hpp"
#include "blcm/graph.hpp"

namespace blcm {

inline int log2_exact(std::size_t n) {
  if (n == 0 || (n & (n - 1)) != 0) throw DimensionError("length " + std::to_string(n) + " is not a power of two");
  return std::countr_zero(n);
}

/// Distribution of H over {0,1}^K in configuration order.
class LatentProportions {
 public:
  LatentProportions() = default;

  explicit LatentProportions(std::vector<double> values) : values_(std::move(values)) {
    k_ = log2_exact(values_.size());
    double sum = 0.0;
    for (double v : values_) {
      if (!std::isfinite(v) || v < 0.0) throw ParamError("LatentProportions: entries must be finite and nonnegative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12 * static_cast<double>(values_.size()) + 1e-12)
      throw ParamError("LatentProportions: entries must sum to 1 (got " + std::to_string(sum) + ")");
  }

  /// Rescales nonnegative weights onto the simplex.
  static LatentProportions normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    if (!(sum > 0.0)) throw ParamError("LatentProportions: weights sum to zero");
    for (double& w : weights) w /= sum;
    return LatentProportions(std::move(weights));
  }

  static LatentProportions uniform(int k) {
    return LatentProportions(std::vector<double>(num_configs(k), 1.0 / static_cast<double>(num_configs(k))));
  }

  /// Product of independent Bernoulli(p[k]) coordinates.
  static LatentProportions independent(const std::vector<double>& p) {
    const int k = static_cast<int>(p.size());
    std::vector<double> v(num_configs(k), 1.0);
    for (Config h = 0; h < v.size(); ++h)
      for (int i = 0; i < k; ++i) v[h] *= config_bit(h, i) ? p[static_cast<std::size_t>(i)] : 1.0 - p[static_cast<std::size_t>(i)];
    return normalized(std::move(v));
  }

  int latents() const noexcept { return k_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](Config h) const { return values_.at(h); }
  const std::vector<double>& values() const noexcept { return values_; }

  double min_value() const { return *std::min_element(values_.begin(), values_.end()); }

  /// P(H_k = 1).
  double marginal(int k) const {
    double s = 0.0;
    for (Config h = 0; h < values_.size(); ++h)
      if (config_bit(h, k)) s += values_[h];
    return s;
  }

 private:
  std::vector<double> values_{1.0};
  int k_ = 0;
};

enum class ItemKind { Bernoulli, Normal, Cauchy };

inline std::string_view to_string(ItemKind kind) {
  switch (kind) {
    case ItemKind::Bernoulli: return "bernoulli";
    case ItemKind::Normal: return "normal";
    case ItemKind::Cauchy: return "cauchy";
  }
  return "?";
}

inline ItemKind item_kind_from_string(std::string_view s) {
  if (s == "bernoulli") return ItemKind::Bernoulli;
  if (s == "normal") return ItemKind::Normal;
  if (s == "cauchy") return ItemKind::Cauchy;
  throw ParamError("unknown item kind '" + std::string(s) + "'");
}

/// Conditional law of one item. `mu` holds the location (Bernoulli: success
/// probability) for every configuration of the item's latent parents, indexed
/// by project_config(h, parents). Scale is fixed to 1 for Normal and Cauchy.
struct ItemDistribution {
  ItemKind kind = ItemKind::Bernoulli;
  std::vector<double> mu;

  /// P(X > t | parents = u).
  double exceed(std::size_t u, double t) const {
    const double m = mu.at(u);
    switch (kind) {
      case ItemKind::Bernoulli: return t < 0.0 ? 1.0 : (t < 1.0 ? m : 0.0);
      case ItemKind::Normal: return 0.5 * std::erfc((t - m) / std::numbers::sqrt2);
      case ItemKind::Cauchy: return 0.5 + std::atan(m - t) / std::numbers::pi;
    }
    return 0.0;
  }
};

/// A full binary latent causal model.
class Blcm {
 public:
  Blcm() = default;

  Blcm(BipartiteGraph gamma, LatentDag lambda, LatentProportions proportions, std::vector<ItemDistribution> items)
      : gamma_(std::move(gamma)), lambda_(std::move(lambda)), pi_(std::move(proportions)), items_(std::move(items)) {
    const int k = gamma_.latents();
    if (lambda_.nodes() != k) throw DimensionError("Blcm: Lambda has " + std::to_string(lambda_.nodes()) + " nodes, expected " + std::to_string(k));
    if (pi_.latents() != k) throw DimensionError("Blcm: proportions have wrong length");
    if (static_cast<int>(items_.size()) != gamma_.items()) throw DimensionError("Blcm: item count differs from Gamma rows");
    parents_.resize(items_.size());
    for (int j = 0; j < gamma_.items(); ++j) {
      parents_[static_cast<std::size_t>(j)] = gamma_.parents(j);
      const auto& it = items_[static_cast<std::size_t>(j)];
      const std::size_t expect = num_configs(static_cast<int>(parents_[static_cast<std::size_t>(j)].size()));
      if (it.mu.size() != expect)
        throw DimensionError("Blcm: item " + std::to_string(j + 1) + " needs " + std::to_string(expect) + " parameters");
      for (double m : it.mu) {
        if (!std::isfinite(m)) throw ParamError("Blcm: non-finite item parameter");
        if (it.kind == ItemKind::Bernoulli && !(m > 0.0 && m < 1.0))
          throw ParamError("Blcm: Bernoulli parameter of item " + std::to_string(j + 1) + " outside (0,1)");
      }
    }
  }

  int items() const noexcept { return gamma_.items(); }
  int latents() const noexcept { return gamma_.latents(); }
  const BipartiteGraph& gamma() const noexcept { return gamma_; }
  const LatentDag& lambda() const noexcept { return lambda_; }
  const LatentProportions& proportions() const noexcept { return pi_; }
  const std::vector<ItemDistribution>& item_list() const noexcept { return items_; }
  const ItemDistribution& item(int j) const { return items_.at(static_cast<std::size_t>(j)); }
  const std::vector<int>& parents(int j) const { return parents_.at(static_cast<std::size_t>(j)); }

  std::size_t parent_config(int j, Config h) const { return project_config(h, parents(j)); }

  /// Location of item j under full configuration h.
  double mu(int j, Config h) const { return item(j).mu[parent_config(j, h)]; }

  bool all_bernoulli() const {
    return std::all_of(items_.begin(), items_.end(), [](const auto& it) { return it.kind == ItemKind::Bernoulli; });
  }

 private:
  BipartiteGraph gamma_;
  LatentDag lambda_;
  LatentProportions pi_;
  std::vector<ItemDistribution> items_;
  std::vector<std::vector<int>> parents_;
};

/// Builds an item from a location table over all 2^K configurations, checking
/// that it depends on h only through `parents`.
inline ItemDistribution item_from_full_table(ItemKind kind, const std::vector<double>& full, const std::vector<int>& parents,
                                             double tol = 1e-12) {
  const std::size_t n_parent = num_configs(static_cast<int>(parents.size()));
  std::vector<double> mu(n_parent, std::numeric_limits<double>::quiet_NaN());
  for (Config h = 0; h < full.size(); ++h) {
    const auto u = project_config(h, parents);
    if (std::isnan(mu[u]))
      mu[u] = full[h];
    else if (std::abs(mu[u] - full[h]) > tol)
      throw ParamError("item table varies outside its parent coordinates");
  }
  return {kind, std::move(mu)};
}

/// J x 2^K table of success probabilities theta(j, h).
class CondTable {
 public:
  CondTable() = default;

  explicit CondTable(Eigen::MatrixXd theta) : theta_(std::move(theta)) {
    k_ = log2_exact(static_cast<std::size_t>(theta_.cols()));
    for (Eigen::Index i = 0; i < theta_.size(); ++i) {
      const double v = theta_.data()[i];
      if (!(v >= 0.0 && v <= 1.0)) throw ParamError("CondTable: entries must lie in [0,1]");
    }
  }

  int items() const noexcept { return static_cast<int>(theta_.rows()); }
  int latents() const noexcept { return k_; }
  double operator()(int j, Config h) const { return theta_(j, static_cast<Eigen::Index>(h)); }
  const Eigen::MatrixXd& matrix() const noexcept { return theta_; }

  /// Largest deviation of a row from constancy across configurations that
  /// agree on the row's parents in g.
  double sparsity_violation(const BipartiteGraph& g) const {
    if (g.items() != items() || g.latents() != k_) throw DimensionError("CondTable: graph shape mismatch");
    double worst = 0.0;
    for (int j = 0; j < items(); ++j) {
      const auto pa = g.parents(j);
      std::vector<double> ref(num_configs(static_cast<int>(pa.size())), std::numeric_limits<double>::quiet_NaN());
      for (Config h = 0; h < num_configs(k_); ++h) {
        auto& r = ref[project_config(h, pa)];
        if (std::isnan(r)) r = (*this)(j, h);
        worst = std::max(worst, std::abs(r - (*this)(j, h)));
      }
    }
    return worst;
  }

 private:
  Eigen::MatrixXd theta_ = Eigen::MatrixXd::Constant(0, 1, 0.0);
  int k_ = 0;
};

/// Per-item discretization cut: the item is mapped to 1{X > threshold}.
/// Binary items use any threshold in [0,1), giving the event {X = 1}.
using Cuts = std::vector<double>;

inline Cuts default_cuts(int j) { return Cuts(static_cast<std::size_t>(j), 0.0); }

/// theta(j, h) = P(X_j > cut_j | H = h).
inline CondTable conditional_table(const Blcm& m, const Cuts& cuts) {
  if (static_cast<int>(cuts.size()) != m.items()) throw DimensionError("conditional_table: one cut per item required");
  Eigen::MatrixXd t(m.items(), static_cast<Eigen::Index>(num_configs(m.latents())));
  for (int j = 0; j < m.items(); ++j)
    for (Config h = 0; h < num_configs(m.latents()); ++h)
      t(j, h) = m.item(j).exceed(m.parent_config(j, h), cuts[static_cast<std::size_t>(j)]);
  return CondTable(std::move(t));
}

inline CondTable conditional_table(const Blcm& m) { return conditional_table(m, default_cuts(m.items())); }

/// N records of J observations. Binary columns hold 0/1 values.
struct Dataset {
  enum class Column { Binary, Real };

  std::vector<Column> columns;
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // N x J

  int items() const noexcept { return static_cast<int>(columns.size()); }
  Eigen::Index size() const noexcept { return values.rows(); }
};

inline Dataset::Column column_for(ItemKind kind) {
  return kind == ItemKind::Bernoulli ? Dataset::Column::Binary : Dataset::Column::Real;
}

struct NondegeneracyReport {
  bool proportions_positive = true;
  std::vector<Config> zero_configs;
  bool conditionals_distinct = true;
  /// Items with two parent configurations whose conditionals coincide.
  std::vector<int> items_with_ties;
  bool columns_nonempty = true;
  std::vector<int> empty_columns;

  bool ok() const { return proportions_positive && conditionals_distinct && columns_nonempty; }
};

inline NondegeneracyReport validate_nondegeneracy(const Blcm& m, double tol = 1e-9) {
  NondegeneracyReport r;
  for (Config h = 0; h < m.proportions().size(); ++h)
    if (!(m.proportions()[h] > 0.0)) r.zero_configs.push_back(h);
  r.proportions_positive = r.zero_configs.empty();
  for (int j = 0; j < m.items(); ++j) {
    const auto& mu = m.item(j).mu;
    bool tie = false;
    for (std::size_t a = 0; a < mu.size() && !tie; ++a)
      for (std::size_t b = a + 1; b < mu.size() && !tie; ++b) tie = std::abs(mu[a] - mu[b]) <= tol;
    if (tie) r.items_with_ties.push_back(j);
  }
  r.conditionals_distinct = r.items_with_ties.empty();
  for (int k = 0; k < m.latents(); ++k)
    if (m.gamma().entries().col_sum(k) == 0) r.empty_columns.push_back(k);
  r.columns_nonempty = r.empty_columns.empty();
  return r;
}

/// Exact pmf of X over {0,1}^J, outcome x indexed by sum_j x_j 2^(j-1).
inline std::vector<double> marginal_pmf(const Blcm& m) {
  if (!m.all_bernoulli()) throw UnsupportedItemKind("marginal_pmf: all items must be Bernoulli; discretize first");
  if (m.items() > 24) throw DimensionError("marginal_pmf: J > 24");
  const std::size_t n_out = std::size_t{1} << m.items();
  std::vector<double> out(n_out, 0.0), cond(n_out);
  for (Config h = 0; h < num_configs(m.latents()); ++h) {
    cond[0] = m.proportions()[h];
    std::size_t filled = 1;
    for (int j = 0; j < m.items(); ++j) {
      const double p = m.mu(j, h);
      for (std::size_t x = 0; x < filled; ++x) {
        cond[x + filled] = cond[x] * p;
        cond[x] *= 1.0 - p;
      }
      filled *= 2;
    }
    for (std::size_t x = 0; x < n_out; ++x) out[x] += cond[x];
  }
  return out;
}

/// Complete DAG on k nodes in index order; an I-map of every distribution.
inline LatentDag complete_dag(int k) {
  BitMatrix adj(k, k);
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b) adj.set(a, b, true);
  return LatentDag(std::move(adj));
}

/// Observationally equivalent alternative model for a graph whose column k
/// dominates column l: within the slice h_k = 1 the l-coordinate is swapped,
/// in both the proportions and the item conditionals. The alternative's latent
/// graph is reported as the complete DAG.
inline Blcm subset_counterexample(const Blcm& m, int k, int l) {
  const auto& g = m.gamma();
  if (k < 0 || l < 0 || k >= g.latents() || l >= g.latents() || k == l)
    throw PreconditionError("subset_counterexample: invalid latent indices");
  for (int j = 0; j < g.items(); ++j)
    if (g(j, l) > g(j, k))
      throw PreconditionError("subset_counterexample: column " + std::to_string(k + 1) + " does not dominate column " +
                              std::to_string(l + 1));
  auto swap = [k, l](Config h) { return config_bit(h, k) ? flip_bit(h, l) : h; };
  const std::size_t n = num_configs(g.latents());
  std::vector<double> pi(n);
  for (Config h = 0; h < n; ++h) pi[h] = m.proportions()[swap(h)];
  std::vector<ItemDistribution> items;
  for (int j = 0; j < g.items(); ++j) {
    std::vector<double> full(n);
    for (Config h = 0; h < n; ++h) full[h] = m.mu(j, swap(h));
    items.push_back(item_from_full_table(m.item(j).kind, full, m.parents(j)));
  }
  return Blcm(g, complete_dag(g.latents()), LatentProportions(std::move(pi)), std::move(items));
}

/// The parity-pattern model and its relabeled twin with identity graph.
struct DegenerateExample {
  Blcm model;
  Blcm relabeled;
  /// relabel[h] = h~ with h~_k = parity of (h_1, ..., h_k).
  std::vector<Config> relabel;
};

/// K items over K latents with lower-triangular all-ones graph; item k has
/// success probability a when h_1 + ... + h_k is even and b otherwise.
/// Latents are independent Bernoulli(p).
inline DegenerateExample degenerate_example(int k, double a, double b, double p = 0.4) {
  if (k < 2) throw ParamError("degenerate_example: K >= 2 required");
  if (!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0)) throw ParamError("degenerate_example: a, b must lie in (0,1)");
  if (a == b) throw ParamError("degenerate_example: a and b must differ");
  const std::size_t n = num_configs(k);
  BitMatrix lower(k, k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c <= r; ++c) lower.set(r, c, true);
  const BipartiteGraph g(lower);
  const BipartiteGraph eye(BitMatrix::identity(k));

  std::vector<Config> relabel(n);
  for (Config h = 0; h < n; ++h) {
    Config t = 0;
    int parity = 0;
    for (int i = 0; i < k; ++i) {
      parity ^= config_bit(h, i);
      if (parity) t |= Config{1} << i;
    }
    relabel[h] = t;
  }

  const auto pi = LatentProportions::independent(std::vector<double>(static_cast<std::size_t>(k), p));
  std::vector<double> pi_tilde(n);
  for (Config h = 0; h < n; ++h) pi_tilde[relabel[h]] = pi[h];

  std::vector<ItemDistribution> items, items_tilde;
  for (int j = 0; j < k; ++j) {
    std::vector<double> full(n), full_tilde(n);
    for (Config h = 0; h < n; ++h) {
      full[h] = config_bit(relabel[h], j) ? b : a;
      full_tilde[h] = config_bit(h, j) ? b : a;
    }
    items.push_back(item_from_full_table(ItemKind::Bernoulli, full, g.parents(j)));
    items_tilde.push_back(item_from_full_table(ItemKind::Bernoulli, full_tilde, eye.parents(j)));
  }
  return {Blcm(g, LatentDag::empty(k), pi, std::move(items)),
          Blcm(eye, complete_dag(k), LatentProportions(std::move(pi_tilde)), std::move(items_tilde)), std::move(relabel)};
}

/// True when every item's exceedance probability strictly increases along the
/// partial order of its parent configurations.
inline bool check_monotonicity(const Blcm& m, const Cuts& cuts) {
  if (static_cast<int>(cuts.size()) != m.items()) throw DimensionError("check_monotonicity: one cut per item required");
  for (int j = 0; j < m.items(); ++j) {
    const auto& it = m.item(j);
    const double t = cuts[static_cast<std::size_t>(j)];
    for (std::size_t u = 0; u < it.mu.size(); ++u)
      for (std::size_t v = 0; v < it.mu.size(); ++v)
        if (u != v && (u & v) == v && !(it.exceed(u, t) > it.exceed(v, t))) return false;
  }
  return true;
}

inline bool check_monotonicity(const Blcm& m) { return check_monotonicity(m, default_cuts(m.items())); }

}  // namespace blcm
