#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace blcm;

namespace {

bool same_cpdag(const Cpdag& a, const Cpdag& b) { return a.directed() == b.directed() && a.undirected() == b.undirected(); }

BinaryMatrix chain_binary(std::int64_t n, std::uint64_t seed) { return discretize(sample_dataset(reference_model(), n, seed)); }

EmTuning plain_tuning(int iters) {
  EmTuning t;
  t.lambda = 0.0;
  t.max_iters = iters;
  t.tol_pi = 1e-300;
  return t;
}

/// K = 1 model on six Bernoulli items with levels 0.1 / 0.9.
Blcm planted_single_latent(double p1) {
  BitMatrix g(6, 1);
  std::vector<ItemDistribution> items;
  for (int j = 0; j < 6; ++j) {
    g.set(j, 0, true);
    items.push_back({ItemKind::Bernoulli, {0.1, 0.9}});
  }
  return Blcm(BipartiteGraph(g), LatentDag::empty(1), LatentProportions({1.0 - p1, p1}), items);
}

EmConfig quick_config() {
  EmConfig c;
  c.lambda2_grid = {1.0, 100.0};
  c.tau_grid = {0.1};
  c.restarts = 4;
  c.refine_iters = 200;
  return c;
}

}  // namespace

TEST(Discretize, StrictThresholdAndBinaryPassThrough) {
  Dataset d;
  d.columns = {Dataset::Column::Real, Dataset::Column::Binary};
  d.names = {"x1", "x2"};
  d.values.resize(3, 2);
  d.values << 0.0, 1, -0.1, 0, 2.5, 1;
  const auto y = discretize(d);
  EXPECT_EQ(y(0, 0), 0);
  EXPECT_EQ(y(1, 0), 0);
  EXPECT_EQ(y(2, 0), 1);
  EXPECT_EQ(y(0, 1), 1);
  EXPECT_EQ(y(1, 1), 0);
  d.values(0, 1) = 2.0;
  EXPECT_THROW(discretize(d), SchemaError);
  EXPECT_THROW(discretize(d, Cuts{0.0}), DimensionError);
}

TEST(Discretize, MeanCutsMatchRecomputation) {
  const auto d = sample_dataset(reference_model(), 500, 4);
  const auto cuts = mean_cuts(d);
  const auto y = discretize(d, cuts);
  for (int j = 4; j < 8; ++j) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) m += d.values(i, j);
    m /= static_cast<double>(d.size());
    EXPECT_NEAR(cuts[static_cast<std::size_t>(j)], m, 1e-12);
    for (Eigen::Index i = 0; i < d.size(); ++i) EXPECT_EQ(y(i, j), d.values(i, j) > m ? 1 : 0);
  }
  EXPECT_EQ(cuts[0], 0.0);
}

TEST(Patterns, CompressionPreservesCounts) {
  const auto y = chain_binary(2000, 1);
  const auto pc = compress_patterns(y);
  EXPECT_DOUBLE_EQ(pc.total, 2000.0);
  EXPECT_DOUBLE_EQ(pc.weight.sum(), 2000.0);
  EXPECT_LE(pc.y.rows(), 256);
  Eigen::VectorXd col_sums = Eigen::VectorXd::Zero(8);
  for (Eigen::Index p = 0; p < pc.y.rows(); ++p) col_sums += pc.weight(p) * pc.y.row(p).transpose();
  for (int j = 0; j < 8; ++j) EXPECT_DOUBLE_EQ(col_sums(j), y.col(j).cast<double>().sum());
}

TEST(EStep, MatchesDirectLikelihood) {
  const auto y = chain_binary(300, 2);
  RandomStream rng(3, 0);
  for (int k = 1; k <= 3; ++k) {
    const auto p = random_init(8, k, rng);
    const auto es = e_step(compress_patterns(y), p);
    EXPECT_NEAR(es.loglik, fixtures::plain_loglik(y, p), 1e-8);
    EXPECT_NEAR(es.mass.sum(), 300.0, 1e-9);
  }
}

TEST(EStep, StableForExtremeParameters) {
  BinaryMatrix y(2, 40);
  y.setOnes();
  y.row(1).setZero();
  EmParams p{{0.5, 0.5}, Eigen::MatrixXd(40, 2)};
  p.theta.col(0).setConstant(kThetaMin);
  p.theta.col(1).setConstant(kThetaMax);
  const auto es = e_step(compress_patterns(y), p);
  EXPECT_TRUE(std::isfinite(es.loglik));
  EXPECT_NEAR(es.mass(0), 1.0, 1e-12);
  EXPECT_NEAR(es.mass(1), 1.0, 1e-12);
}

TEST(FusedCoordinate, MaximizesOverFineGrid) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const double n = 1.0 + 50.0 * u(rng), s = n * u(rng);
    const int m = 1 + static_cast<int>(rng() % 5);
    std::vector<double> b(static_cast<std::size_t>(m)), c(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      b[static_cast<std::size_t>(i)] = u(rng);
      c[static_cast<std::size_t>(i)] = rng() % 3 == 0 ? 0.0 : 20.0 * u(rng);
    }
    auto f = [&](double t) {
      double v = s * std::log(t) + (n - s) * std::log(1.0 - t);
      for (int i = 0; i < m; ++i) v -= c[static_cast<std::size_t>(i)] * std::abs(t - b[static_cast<std::size_t>(i)]);
      return v;
    };
    double grid_best = -1e300;
    for (int g = 1; g < 100000; ++g) grid_best = std::max(grid_best, f(g / 100000.0));
    for (double bi : b) grid_best = std::max(grid_best, f(std::clamp(bi, kThetaMin, kThetaMax)));
    const double t = detail::fused_coordinate(s, n, b, c, u(rng));
    EXPECT_GE(t, kThetaMin);
    EXPECT_LE(t, kThetaMax);
    EXPECT_GE(f(t), grid_best - 1e-9 * std::max(1.0, std::abs(grid_best))) << "trial " << trial;
  }
}

TEST(PenalizedEm, ZeroPenaltyFollowsPlainEm) {
  const auto y = chain_binary(1000, 6);
  RandomStream rng(7, 0);
  const auto init = random_init(8, 3, rng);
  for (int iters : {1, 2, 5, 10}) {
    const auto r = penalized_em(y, 3, plain_tuning(iters), init);
    const auto ref = fixtures::plain_em(y, 3, init, iters);
    for (std::size_t h = 0; h < 8; ++h) EXPECT_NEAR(r.params.pi[h], ref.pi[h], 1e-6);
    EXPECT_LT((r.params.theta - ref.theta).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(r.loglik, fixtures::plain_loglik(y, ref), 1e-6 * std::abs(r.loglik));
  }
}

TEST(PenalizedEm, ObjectiveNonDecreasing) {
  const auto y = chain_binary(2000, 8);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    RandomStream rng(seed, 1);
    const auto init = random_init(8, 3, rng);
    for (double lambda : {1.0, 10.0, 100.0, 1000.0})
      for (double tau : {0.05, 0.1}) {
        EmTuning t;
        t.lambda = lambda;
        t.tau = tau;
        t.max_iters = 30;
        t.tol_pi = 1e-12;
        const auto r = penalized_em(y, 3, t, init);
        for (std::size_t i = 1; i < r.trace.size(); ++i)
          EXPECT_GE(r.trace[i], r.trace[i - 1] - 1e-8 * std::max(1.0, std::abs(r.trace[i - 1]))) << "lambda " << lambda << " tau " << tau << " step " << i;
      }
  }
}

TEST(PenalizedEm, FixedPointConvergesInOneIteration) {
  const auto y = chain_binary(1000, 9);
  RandomStream rng(10, 0);
  auto t = plain_tuning(2000);
  t.tol_pi = 1e-12;
  const auto stationary = penalized_em(y, 2, t, random_init(8, 2, rng));
  EmTuning again;
  again.lambda = 0.0;
  const auto r = penalized_em(y, 2, again, stationary.params);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iters, 1);
}

TEST(PenalizedEm, SingleLatentRecoversClusters) {
  const auto m = planted_single_latent(0.3);
  const auto y = discretize(sample_dataset(m, 5000, 11));
  RandomStream rng(12, 0);
  auto t = plain_tuning(500);
  t.tol_pi = 1e-9;
  const auto r = penalized_em(y, 1, t, random_init(6, 1, rng));
  const int hi = r.params.theta(0, 1) > r.params.theta(0, 0) ? 1 : 0;
  EXPECT_NEAR(r.params.pi[static_cast<std::size_t>(hi)], 0.3, 0.03);
  for (int j = 0; j < 6; ++j) {
    EXPECT_NEAR(r.params.theta(j, hi), 0.9, 0.03);
    EXPECT_NEAR(r.params.theta(j, 1 - hi), 0.1, 0.03);
  }
}

TEST(PenalizedEm, ConstantColumnPinnedAndBadInputRejected) {
  auto y = chain_binary(200, 13);
  y.col(2).setOnes();
  RandomStream rng(1, 0);
  const auto r = penalized_em(y, 2, EmTuning{}, random_init(8, 2, rng));
  EXPECT_TRUE((r.params.theta.row(2).array() == kThetaMax).all());
  EXPECT_THROW(penalized_em(y, 0, EmTuning{}, random_init(8, 2, rng)), DegenerateInput);
  EXPECT_THROW(penalized_em(y, 3, EmTuning{}, random_init(8, 2, rng)), DimensionError);
  EXPECT_THROW(penalized_em(BinaryMatrix(0, 8), 2, EmTuning{}, random_init(8, 2, rng)), DegenerateInput);
}

TEST(PenalizedEm, LargePenaltyFusesLevels) {
  const auto y = chain_binary(2000, 14);
  RandomStream rng(15, 0);
  EmTuning t;
  t.lambda = 1e5;
  t.tau = 0.5;
  t.max_iters = 20;
  const auto r = penalized_em(y, 3, t, random_init(8, 3, rng));
  for (Eigen::Index j = 0; j < 8; ++j) EXPECT_EQ(fused_levels(r.params.theta.row(j), 1e-6), 1);
}

TEST(Penalty, TruncatedLassoValue) {
  Eigen::MatrixXd th(1, 4);
  th << 0.1, 0.12, 0.5, 0.9;
  // Pairs: 0.02, 0.4->0.1, 0.8->0.1, 0.38->0.1, 0.78->0.1, 0.4->0.1
  EXPECT_NEAR(truncated_lasso_penalty(th, 2.0, 0.1), 2.0 * 2.0 * (0.02 + 0.5), 1e-12);
  EXPECT_EQ(truncated_lasso_penalty(th, 0.0, 0.1), 0.0);
}

TEST(Init, OracleBlend) {
  const auto m = reference_model();
  const auto theta = conditional_table(m);
  EmConfig c;
  c.w_ref = 1.0;
  c.w_noise = 0.0;
  const auto exact = oracle_blend_init(m.proportions(), theta, c);
  EXPECT_TRUE(exact.theta.isApprox(theta.matrix()));
  for (Config h = 0; h < 8; ++h) EXPECT_NEAR(exact.pi[h], m.proportions()[h], 1e-15);
  EmConfig d;
  d.seed = 3;
  const auto a = oracle_blend_init(m.proportions(), theta, d), b = oracle_blend_init(m.proportions(), theta, d);
  EXPECT_EQ(a.pi, b.pi);
  EXPECT_TRUE(a.theta == b.theta);
  EXPECT_NEAR(std::accumulate(a.pi.begin(), a.pi.end(), 0.0), 1.0, 1e-12);
  EXPECT_TRUE((a.theta.array() > 0.0 && a.theta.array() < 1.0).all());
  EXPECT_TRUE(((a.theta - 0.7 * theta.matrix()).array() >= 0.0 && (a.theta - 0.7 * theta.matrix()).array() <= 0.3).all());
}

TEST(ExtractGamma, ExactTablesGiveTrueGraph) {
  for (auto l : {LambdaKind::Chain, LambdaKind::Collider, LambdaKind::Dependent}) {
    const auto m = reference_model(l);
    EXPECT_EQ(extract_gamma(conditional_table(m), 0.125), m.gamma());
  }
  EXPECT_EQ(extract_gamma(Eigen::MatrixXd::Constant(4, 8, 0.3), 0.125), BipartiteGraph(BitMatrix(4, 3)));
}

TEST(ExtractGamma, LowerMiddleMedian) {
  // K = 3: four differences per (item, latent). Two large and two small:
  // the lower-middle element is small, so no edge.
  Eigen::MatrixXd th = Eigen::MatrixXd::Constant(1, 8, 0.5);
  th(0, 0b001) = 0.9;
  th(0, 0b011) = 0.9;
  EXPECT_EQ(extract_gamma(th, 0.125)(0, 0), 0);
  th(0, 0b101) = 0.9;
  EXPECT_EQ(extract_gamma(th, 0.125)(0, 0), 1);
}

TEST(ExtractGamma, MonotoneInThresholdAndFullAtZero) {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd th(6, 8);
    for (Eigen::Index i = 0; i < th.size(); ++i) th.data()[i] = u(rng);
    EXPECT_EQ(extract_gamma(th, 0.0).entries().col_sum(0) + extract_gamma(th, 0.0).entries().col_sum(1) + extract_gamma(th, 0.0).entries().col_sum(2), 18);
    auto prev = extract_gamma(th, 0.0);
    for (double eps : {0.01, 0.05, 0.1, 0.2, 0.4}) {
      const auto cur = extract_gamma(th, eps);
      for (int j = 0; j < 6; ++j)
        for (int k = 0; k < 3; ++k) EXPECT_LE(cur(j, k), prev(j, k));
      prev = cur;
    }
  }
}

TEST(Ges, ScoreMatchesIndependentBic) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(1.0, 100.0);
  std::vector<double> counts(8);
  for (auto& c : counts) c = std::floor(u(rng));
  const BinaryBicScore score(3, counts);
  for (const auto& d : fixtures::all_dags(3)) EXPECT_NEAR(score.dag_score(d), fixtures::dag_bic(d, counts), 1e-9);
}

TEST(Ges, ReachesBestEquivalenceClassOnLargeSamples) {
  const auto dags = fixtures::all_dags(3);
  for (auto l : {LambdaKind::Chain, LambdaKind::Collider, LambdaKind::Dependent}) {
    std::vector<double> counts;
    const auto pi = scenario_proportions(l);
    for (double p : pi.values()) counts.push_back(std::round(1e5 * p));
    const BinaryBicScore score(3, counts);
    double best = -1e300;
    for (const auto& d : dags) best = std::max(best, fixtures::dag_bic(d, counts));
    const auto found = ges(score);
    EXPECT_TRUE(same_cpdag(found, dag_to_cpdag(scenario_lambda(l)))) << to_string(l);
    double found_score = -1e300;
    for (const auto& d : dags)
      if (same_cpdag(dag_to_cpdag(d), found)) found_score = std::max(found_score, fixtures::dag_bic(d, counts));
    EXPECT_NEAR(found_score, best, 1e-6);
  }
}

TEST(Ges, RandomCountsMatchExhaustiveSearchOnFourNodes) {
  const auto dags = fixtures::all_dags(4);
  std::mt19937_64 rng(18);
  int hits = 0;
  for (int trial = 0; trial < 20; ++trial) {
    // Draw a random DAG-factorized distribution and take large-sample counts.
    const auto& truth = dags[rng() % dags.size()];
    std::uniform_real_distribution<double> u(0.1, 0.9);
    std::vector<std::vector<double>> cpt(4);
    for (int v = 0; v < 4; ++v) {
      cpt[static_cast<std::size_t>(v)].resize(num_configs(static_cast<int>(truth.parents(v).size())));
      for (auto& p : cpt[static_cast<std::size_t>(v)]) p = u(rng);
    }
    std::vector<double> counts(16);
    for (Config h = 0; h < 16; ++h) {
      double p = 1.0;
      for (int v = 0; v < 4; ++v) {
        const double q = cpt[static_cast<std::size_t>(v)][project_config(h, truth.parents(v))];
        p *= config_bit(h, v) ? q : 1.0 - q;
      }
      counts[h] = std::round(1e6 * p);
    }
    double best = -1e300;
    for (const auto& d : dags) best = std::max(best, fixtures::dag_bic(d, counts));
    const auto found = ges(BinaryBicScore(4, counts));
    double found_score = -1e300;
    for (const auto& d : dags)
      if (same_cpdag(dag_to_cpdag(d), found)) found_score = std::max(found_score, fixtures::dag_bic(d, counts));
    if (std::abs(found_score - best) < 1e-6) ++hits;
  }
  EXPECT_GE(hits, 19);
}

TEST(Ges, PseudoSamples) {
  EXPECT_EQ(fit_lambda_ges(LatentProportions::independent({0.3, 0.6, 0.5}), 100000, 1).edge_count(), 0u);
  EXPECT_TRUE(same_cpdag(fit_lambda_ges(scenario_proportions(LambdaKind::Chain), 100000, 2), dag_to_cpdag(scenario_lambda(LambdaKind::Chain))));
  EXPECT_TRUE(
      same_cpdag(fit_lambda_ges(scenario_proportions(LambdaKind::Collider), 100000, 3), dag_to_cpdag(scenario_lambda(LambdaKind::Collider))));
  const auto a = fit_lambda_ges(scenario_proportions(LambdaKind::Chain), 2000, 4), b = fit_lambda_ges(scenario_proportions(LambdaKind::Chain), 2000, 4);
  EXPECT_TRUE(same_cpdag(a, b));
}

TEST(Fit, ConfigValidation) {
  EmConfig c;
  c.w_ref = 0.5;
  EXPECT_THROW(c.validate(), ParamError);
  c = EmConfig{};
  c.tau_grid.clear();
  EXPECT_THROW(c.validate(), ParamError);
  c = EmConfig{};
  c.max_iters = 0;
  EXPECT_THROW(c.validate(), ParamError);
  EXPECT_NO_THROW(EmConfig{}.validate());
}

TEST(Fit, DeterministicAndShaped) {
  const auto d = sample_dataset(reference_model(), 1500, 19);
  auto c = quick_config();
  c.seed = 5;
  const auto a = fit(d, 3, c), b = fit(d, 3, c);
  EXPECT_EQ(a.pi_hat.values(), b.pi_hat.values());
  EXPECT_TRUE(a.theta_hat.matrix() == b.theta_hat.matrix());
  EXPECT_EQ(a.gamma_hat, b.gamma_hat);
  EXPECT_EQ(a.bic, b.bic);
  EXPECT_EQ(a.grid.size(), 2u);
  EXPECT_EQ(a.gamma_hat.items(), 8);
  EXPECT_TRUE((a.theta_hat.matrix().array() >= kThetaMin && a.theta_hat.matrix().array() <= kThetaMax).all());
  double s = 0.0;
  for (double v : a.pi_hat.values()) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
  for (const auto& g : a.grid) EXPECT_NEAR(g.bic, -2.0 * g.loglik + g.df * std::log(1500.0), 1e-6);
  c.parallelism = 2;
  EXPECT_EQ(fit(d, 3, c).bic, a.bic);
}

TEST(Fit, SingleRecordNeverCrashes) {
  const auto d = sample_dataset(reference_model(), 1, 20);
  try {
    const auto r = fit(d, 2, quick_config());
    EXPECT_EQ(r.warnings.size(), 8u);
  } catch (const DegenerateInput&) {
  }
  EXPECT_THROW(fit(sample_dataset(reference_model(), 0, 1), 2, quick_config()), DegenerateInput);
}

TEST(Fit, OracleInitRequiresTruth) {
  const auto d = sample_dataset(reference_model(), 100, 21);
  FitOptions opt;
  opt.mode = InitMode::OracleBlend;
  EXPECT_THROW(fit(d, 3, quick_config(), opt), ParamError);
}

TEST(Fit, ChainScenarioWithOracleInit) {
  const auto m = reference_model();
  const auto d = sample_dataset(m, 10000, 22);
  FitOptions opt;
  opt.mode = InitMode::OracleBlend;
  opt.truth_pi = m.proportions();
  opt.truth_theta = conditional_table(m);
  EmConfig c;
  c.seed = 22;
  const auto r = fit(d, 3, c, opt);
  EXPECT_LE(shd_gamma(r.gamma_hat, m.gamma()), 3);
  EXPECT_LE(shd_cpdag(r.lambda_hat, dag_to_cpdag(m.lambda())), 2);
}

TEST(Fit, EquivariantToItemOrder) {
  const auto m = reference_model();
  const auto d = sample_dataset(m, 3000, 23);
  const std::vector<int> perm{3, 0, 7, 5, 1, 6, 2, 4};
  Dataset p = d;
  const auto truth = conditional_table(m).matrix();
  Eigen::MatrixXd ptruth(8, 8);
  for (int j = 0; j < 8; ++j) {
    const int src = perm[static_cast<std::size_t>(j)];
    p.values.col(j) = d.values.col(src);
    p.columns[static_cast<std::size_t>(j)] = d.columns[static_cast<std::size_t>(src)];
    p.names[static_cast<std::size_t>(j)] = d.names[static_cast<std::size_t>(src)];
    ptruth.row(j) = truth.row(src);
  }
  EmConfig c = quick_config();
  c.w_ref = 1.0;
  c.w_noise = 0.0;
  FitOptions a, b;
  a.mode = b.mode = InitMode::OracleBlend;
  a.truth_pi = b.truth_pi = m.proportions();
  a.truth_theta = conditional_table(m);
  b.truth_theta = CondTable(ptruth);
  const auto fa = fit(d, 3, c, a), fb = fit(p, 3, c, b);
  for (int j = 0; j < 8; ++j)
    for (int k = 0; k < 3; ++k) EXPECT_EQ(fb.gamma_hat(j, k), fa.gamma_hat(perm[static_cast<std::size_t>(j)], k));
  EXPECT_NEAR(fa.loglik, fb.loglik, 1e-6 * std::abs(fa.loglik));
}

TEST(SelectK, PlantedSingleLatent) {
  const auto d = sample_dataset(planted_single_latent(0.4), 3000, 24);
  const auto s = select_k(d, {2, 1}, quick_config());
  EXPECT_EQ(s.k_best, 1);
  EXPECT_EQ(s.bic.size(), 2u);
  EXPECT_EQ(s.bic[0].first, 1);
  EXPECT_EQ(select_k(d, {2}, quick_config()).k_best, 2);
  EXPECT_THROW(select_k(d, {}, quick_config()), ParamError);
}

TEST(SelectK, ChainScenarioPicksThree) {
  const auto d = sample_dataset(reference_model(), 10000, 25);
  EmConfig c;
  c.seed = 25;
  EXPECT_EQ(select_k(d, {2, 3, 4}, c).k_best, 3);
}
