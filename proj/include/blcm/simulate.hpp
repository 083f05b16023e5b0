#pragma once

// Simulation scenarios with three latent structures and three bipartite graphs
// over K = 3 latents and J = 8 mixed-type items, and seeded dataset sampling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "blcm/bits.hpp"
#include "blcm/error.hpp"
#include "blcm/graph.hpp"
#include "blcm/model.hpp"

namespace blcm {

enum class LambdaKind { Chain, Collider, Dependent };
enum class GammaKind { DT, Dense, Sparse };

inline std::string_view to_string(LambdaKind k) {
  switch (k) {
    case LambdaKind::Chain: return "chain";
    case LambdaKind::Collider: return "collider";
    case LambdaKind::Dependent: return "dependent";
  }
  return "?";
}

inline std::string_view to_string(GammaKind k) {
  switch (k) {
    case GammaKind::DT: return "DT";
    case GammaKind::Dense: return "dense";
    case GammaKind::Sparse: return "sparse";
  }
  return "?";
}

struct ScenarioSpec {
  LambdaKind lambda_kind = LambdaKind::Chain;
  GammaKind gamma_kind = GammaKind::DT;
  std::int64_t n = 1000;
  std::uint64_t seed = 0;

  std::string name() const { return std::string(to_string(lambda_kind)) + "/" + std::string(to_string(gamma_kind)); }
};

/// Parses "chain|collider|dependent" optionally followed by "/DT|dense|sparse".
inline ScenarioSpec parse_scenario(std::string_view s) {
  ScenarioSpec spec;
  const auto slash = s.find('/');
  const auto lam = s.substr(0, slash);
  if (lam == "chain") spec.lambda_kind = LambdaKind::Chain;
  else if (lam == "collider") spec.lambda_kind = LambdaKind::Collider;
  else if (lam == "dependent") spec.lambda_kind = LambdaKind::Dependent;
  else throw ParamError("unknown latent structure '" + std::string(lam) + "'");
  if (slash != std::string_view::npos) {
    const auto gam = s.substr(slash + 1);
    if (gam == "DT" || gam == "dt") spec.gamma_kind = GammaKind::DT;
    else if (gam == "dense") spec.gamma_kind = GammaKind::Dense;
    else if (gam == "sparse") spec.gamma_kind = GammaKind::Sparse;
    else throw ParamError("unknown graph variant '" + std::string(gam) + "'");
  }
  return spec;
}

inline BipartiteGraph scenario_gamma(GammaKind kind) {
  switch (kind) {
    case GammaKind::DT:
      return {{1, 0, 0}, {1, 1, 0}, {1, 0, 1}, {1, 1, 1}, {1, 0, 1}, {0, 1, 0}, {0, 1, 1}, {0, 0, 0}};
    case GammaKind::Dense:
      return {{1, 0, 0}, {1, 1, 1}, {1, 0, 1}, {1, 1, 1}, {1, 0, 1}, {0, 1, 1}, {0, 1, 1}, {0, 0, 0}};
    case GammaKind::Sparse:
      return {{1, 0, 0}, {1, 1, 0}, {1, 0, 0}, {1, 1, 1}, {1, 0, 0}, {0, 1, 0}, {0, 1, 1}, {0, 0, 0}};
  }
  throw ParamError("unknown graph variant");
}

inline LatentDag scenario_lambda(LambdaKind kind) {
  switch (kind) {
    case LambdaKind::Chain: return LatentDag::from_edges(3, {{0, 1}, {1, 2}});
    case LambdaKind::Collider: return LatentDag::from_edges(3, {{0, 1}, {2, 1}});
    case LambdaKind::Dependent: return LatentDag::from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
  }
  throw ParamError("unknown latent structure");
}

inline LatentProportions scenario_proportions(LambdaKind kind) {
  constexpr double q = 2.0 / 3.0;
  std::vector<double> pi(8, 0.0);
  auto same = [q](int a, int b) { return a == b ? q : 1.0 - q; };
  auto bern = [](double p, int v) { return v ? p : 1.0 - p; };
  for (Config h = 0; h < 8; ++h) {
    const int h1 = config_bit(h, 0), h2 = config_bit(h, 1), h3 = config_bit(h, 2);
    switch (kind) {
      case LambdaKind::Chain: pi[h] = bern(q, h1) * same(h2, h1) * same(h3, h2); break;
      case LambdaKind::Collider: {
        static constexpr double p2[2][2] = {{0.8, 0.6}, {0.4, 0.2}};  // [h1][h3]
        pi[h] = bern(q, h1) * bern(q, h3) * bern(p2[h1][h3], h2);
        break;
      }
      case LambdaKind::Dependent:
        for (int h0 = 0; h0 < 2; ++h0) pi[h] += bern(q, h0) * same(h1, h0) * same(h2, h0) * same(h3, h0);
        break;
    }
  }
  return LatentProportions::normalized(std::move(pi));
}

/// Location table of the eight items over (h1,h2,h3), columns listed with h1
/// as the most significant digit: (000), (001), (010), ..., (111).
inline constexpr std::array<std::array<double, 8>, 8> kScenarioMu = {{
    {0.1, 0.1, 0.1, 0.1, 0.9, 0.9, 0.9, 0.9},
    {0.05, 0.05, 0.4, 0.4, 0.7, 0.7, 0.95, 0.95},
    {0.05, 0.7, 0.05, 0.7, 0.4, 0.95, 0.4, 0.95},
    {0.985, 0.857, 0.714, 0.571, 0.429, 0.285, 0.143, 0.014},
    {-2, -0.5, -2, -0.5, 2, 0.5, 2, 0.5},
    {-1.5, -1.5, 1.5, 1.5, -1.5, -1.5, 1.5, 1.5},
    {0.5, -0.5, 2, -2, 0.5, -0.5, 2, -2},
    {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5},
}};

inline constexpr std::array<ItemKind, 8> kScenarioKinds = {ItemKind::Bernoulli, ItemKind::Bernoulli, ItemKind::Bernoulli,
                                                           ItemKind::Bernoulli, ItemKind::Normal,    ItemKind::Normal,
                                                           ItemKind::Cauchy,    ItemKind::Cauchy};

/// Row j of the location table in configuration order.
inline std::vector<double> scenario_mu_row(int j) {
  std::vector<double> full(8);
  for (int c = 0; c < 8; ++c) {
    const Config h = static_cast<Config>(((c >> 2) & 1) | (((c >> 1) & 1) << 1) | ((c & 1) << 2));
    full[h] = kScenarioMu[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
  }
  return full;
}

namespace detail {

/// Adds latent `added` as a parent: each old level splits into two adjacent
/// levels, evenly spaced over the old range and ordered by the old level.
inline std::vector<double> add_parent(const std::vector<double>& full, const std::vector<int>& old_parents, int added) {
  const std::size_t m = num_configs(static_cast<int>(old_parents.size()));
  std::vector<double> old_levels(m);
  for (Config h = 0; h < full.size(); ++h) old_levels[project_config(h, old_parents)] = full[h];
  std::vector<double> sorted = old_levels;
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front(), hi = sorted.back();
  const double step = (hi - lo) / static_cast<double>(2 * m - 1);
  std::vector<double> out(full.size());
  for (Config h = 0; h < full.size(); ++h) {
    const double v = old_levels[project_config(h, old_parents)];
    const auto rank = static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
    out[h] = lo + (2.0 * rank + config_bit(h, added)) * step;
  }
  return out;
}

/// Collapses a table onto `new_parents` by averaging the dropped coordinates
/// under pi given the remaining parents.
inline std::vector<double> drop_parent(const std::vector<double>& full, const std::vector<int>& new_parents,
                                       const LatentProportions& pi) {
  const std::size_t m = num_configs(static_cast<int>(new_parents.size()));
  std::vector<double> num(m, 0.0), den(m, 0.0);
  for (Config h = 0; h < full.size(); ++h) {
    const auto u = project_config(h, new_parents);
    num[u] += pi[h] * full[h];
    den[u] += pi[h];
  }
  std::vector<double> out(full.size());
  for (Config h = 0; h < full.size(); ++h) {
    const auto u = project_config(h, new_parents);
    out[h] = num[u] / den[u];
  }
  return out;
}

}  // namespace detail

/// Location tables (configuration order) for every item of a scenario.
inline std::vector<std::vector<double>> scenario_mu_tables(const ScenarioSpec& spec) {
  const auto dt = scenario_gamma(GammaKind::DT);
  const auto g = scenario_gamma(spec.gamma_kind);
  const auto pi = scenario_proportions(spec.lambda_kind);
  std::vector<std::vector<double>> tables;
  for (int j = 0; j < 8; ++j) {
    auto full = scenario_mu_row(j);
    for (int k = 0; k < 3; ++k) {
      if (g(j, k) == dt(j, k)) continue;
      if (g(j, k) == 1)
        full = detail::add_parent(full, dt.parents(j), k);
      else
        full = detail::drop_parent(full, g.parents(j), pi);
    }
    tables.push_back(std::move(full));
  }
  return tables;
}

inline Blcm build_scenario(const ScenarioSpec& spec) {
  const auto g = scenario_gamma(spec.gamma_kind);
  const auto tables = scenario_mu_tables(spec);
  std::vector<ItemDistribution> items;
  for (int j = 0; j < 8; ++j)
    items.push_back(item_from_full_table(kScenarioKinds[static_cast<std::size_t>(j)], tables[static_cast<std::size_t>(j)], g.parents(j), 1e-12));
  return Blcm(g, scenario_lambda(spec.lambda_kind), scenario_proportions(spec.lambda_kind), std::move(items));
}

/// Mersenne Twister (mt19937_64) stream keyed by (seed, stream id) through
/// std::seed_seq. Stream 0 drives the latent draws, stream j + 1 drives item j.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  /// Box-Muller, one normal per two uniforms.
  double normal() {
    const double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double cauchy() { return std::tan(std::numbers::pi * (uniform() - 0.5)); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Seed for replication `rep` derived from a base seed (splitmix64 finalizer).
inline std::uint64_t replication_seed(std::uint64_t base, std::uint64_t rep) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (rep + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct SampleResult {
  Dataset data;
  std::vector<Config> latent;
};

inline SampleResult sample_with_latents(const Blcm& m, std::int64_t n, std::uint64_t seed) {
  if (n < 0) throw ParamError("sample_dataset: n must be nonnegative");
  SampleResult out;
  auto& d = out.data;
  for (int j = 0; j < m.items(); ++j) {
    d.columns.push_back(column_for(m.item(j).kind));
    d.names.push_back("x" + std::to_string(j + 1));
  }
  d.values.resize(n, m.items());
  out.latent.resize(static_cast<std::size_t>(n));

  const auto& pi = m.proportions().values();
  std::vector<double> cdf(pi.size());
  std::partial_sum(pi.begin(), pi.end(), cdf.begin());
  RandomStream latent_rng(seed, 0);
  for (std::int64_t i = 0; i < n; ++i) {
    const double u = latent_rng.uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    out.latent[static_cast<std::size_t>(i)] = static_cast<Config>(it - cdf.begin());
  }
  for (int j = 0; j < m.items(); ++j) {
    RandomStream rng(seed, static_cast<std::uint64_t>(j) + 1);
    const auto& it = m.item(j);
    for (std::int64_t i = 0; i < n; ++i) {
      const double mu = m.mu(j, out.latent[static_cast<std::size_t>(i)]);
      double x = 0.0;
      switch (it.kind) {
        case ItemKind::Bernoulli: x = rng.uniform() < mu ? 1.0 : 0.0; break;
        case ItemKind::Normal: x = mu + rng.normal(); break;
        case ItemKind::Cauchy: x = mu + rng.cauchy(); break;
      }
      d.values(i, j) = x;
    }
  }
  return out;
}

inline Dataset sample_dataset(const Blcm& m, std::int64_t n, std::uint64_t seed) {
  return sample_with_latents(m, n, seed).data;
}

}  // namespace blcm
