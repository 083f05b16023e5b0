#pragma once

// Small fixed models used by the oracle commands, the demos and the tests.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "blcm/graph.hpp"
#include "blcm/model.hpp"
#include "blcm/simulate.hpp"

namespace blcm {

/// The 8 x 3 double triangular graph with the chain latent DAG and the
/// scenario parameters.
inline Blcm reference_model(LambdaKind lambda = LambdaKind::Chain) {
  ScenarioSpec s;
  s.lambda_kind = lambda;
  return build_scenario(s);
}

/// K = 2, J = 6: three copies of the block [[1,0],[1,1]], independent
/// latents with P(H_k = 1) = p. Column 1 dominates column 2.
inline Blcm subset_example_model(double p = 0.4) {
  const BipartiteGraph g{{1, 0}, {1, 1}, {1, 0}, {1, 1}, {1, 0}, {1, 1}};
  std::vector<ItemDistribution> items{
      {ItemKind::Bernoulli, {0.2, 0.8}},           {ItemKind::Bernoulli, {0.1, 0.6, 0.3, 0.9}},
      {ItemKind::Bernoulli, {0.3, 0.7}},           {ItemKind::Bernoulli, {0.15, 0.5, 0.35, 0.85}},
      {ItemKind::Bernoulli, {0.25, 0.9}},          {ItemKind::Bernoulli, {0.05, 0.45, 0.55, 0.95}},
  };
  return Blcm(g, LatentDag::empty(2), LatentProportions::independent({p, p}), std::move(items));
}

/// The 8 x 3 double triangular graph with Bernoulli items whose success probability increases in
/// every parent: mu = 0.1 + 0.8 * (sum of parent weights switched on) / total,
/// with weights 1, 2, 4 for H1, H2, H3.
inline Blcm monotone_reference_model(LambdaKind lambda = LambdaKind::Chain) {
  const auto g = scenario_gamma(GammaKind::DT);
  std::vector<ItemDistribution> items;
  for (int j = 0; j < g.items(); ++j) {
    const auto pa = g.parents(j);
    double total = 0.0;
    for (int k : pa) total += static_cast<double>(1 << k);
    ItemDistribution it{ItemKind::Bernoulli, std::vector<double>(num_configs(static_cast<int>(pa.size())), 0.5)};
    for (Config u = 0; u < it.mu.size(); ++u) {
      double on = 0.0;
      for (std::size_t i = 0; i < pa.size(); ++i)
        if (config_bit(u, static_cast<int>(i))) on += static_cast<double>(1 << pa[i]);
      if (total > 0.0) it.mu[u] = 0.1 + 0.8 * on / total;
    }
    items.push_back(std::move(it));
  }
  return Blcm(g, scenario_lambda(lambda), scenario_proportions(lambda), std::move(items));
}

struct TriangularDraw {
  BitMatrix block;        // K x K unit lower triangular
  Eigen::MatrixXd theta;  // K x 2^K, row j constant over non-parents
};

/// Random unit lower-triangular block (entries below the diagonal are fair
/// coins) with success probabilities drawn from U(0.05, 0.95). Levels of one
/// item over its parent configurations are at least 0.02 apart.
inline TriangularDraw random_triangular_draw(int k, RandomStream& rng) {
  if (k < 1 || k > 10) throw ParamError("random_triangular_draw: K must lie in [1, 10]");
  TriangularDraw d{BitMatrix(k, k), Eigen::MatrixXd(k, static_cast<Eigen::Index>(num_configs(k)))};
  for (int r = 0; r < k; ++r) {
    d.block.set(r, r, true);
    for (int c = 0; c < r; ++c) d.block.set(r, c, rng.uniform() < 0.5);
  }
  for (int r = 0; r < k; ++r) {
    std::vector<int> pa;
    for (int c = 0; c < k; ++c)
      if (d.block(r, c)) pa.push_back(c);
    std::vector<double> levels;
    while (levels.size() < num_configs(static_cast<int>(pa.size()))) {
      const double v = 0.05 + 0.9 * rng.uniform();
      if (std::all_of(levels.begin(), levels.end(), [v](double x) { return std::abs(x - v) >= 0.02; })) levels.push_back(v);
    }
    for (Config h = 0; h < num_configs(k); ++h) d.theta(r, h) = levels[project_config(h, pa)];
  }
  return d;
}

/// Makes the last item blind to its own latent on one configuration of its
/// other parents, so one factor of the block determinant vanishes.
inline void zero_eta_slice(TriangularDraw& d, Config slice) {
  const int k = d.block.cols();
  const Config top = Config{1} << (k - 1);
  std::vector<int> others;
  for (int c = 0; c < k - 1; ++c)
    if (d.block(k - 1, c)) others.push_back(c);
  const auto target = project_config(slice, others);
  for (Config h = 0; h < top; ++h)
    if (project_config(h, others) == target) d.theta(k - 1, h | top) = d.theta(k - 1, h);
}

/// 4 x 3 graph that meets both necessary conditions yet has more parameters
/// than its observed pmf has equations.
inline BipartiteGraph budget_example_gamma() { return {{1, 1, 0}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}}; }

}  // namespace blcm
