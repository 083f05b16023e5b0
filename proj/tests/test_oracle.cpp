#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace blcm;

TEST(SurvivalTable, SingleLatent) {
  const BitMatrix block{{1}};
  Eigen::MatrixXd theta(1, 2);
  theta << 0.2, 0.7;
  Eigen::MatrixXd expect(2, 2);
  expect << 1, 1, 0.2, 0.7;
  EXPECT_TRUE(survival_table(block, theta).isApprox(expect));
}

TEST(SurvivalTable, EqualsUpperSumsOfThePmfMatrix) {
  RandomStream rng(21, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + trial % 4;
    const auto d = random_triangular_draw(k, rng);
    const auto t = survival_table(d.block, d.theta);
    std::vector<int> all(static_cast<std::size_t>(k));
    std::iota(all.begin(), all.end(), 0);
    const auto p = item_set_matrix(d.theta, all);
    for (Eigen::Index x = 0; x < t.rows(); ++x)
      for (Eigen::Index h = 0; h < t.cols(); ++h) {
        double s = 0.0;
        for (Eigen::Index y = 0; y < p.rows(); ++y)
          if ((y & x) == x) s += p(y, h);
        EXPECT_NEAR(t(x, h), s, 1e-12);
      }
  }
}

TEST(SurvivalTable, RejectsNonTriangularOrDenseTheta) {
  Eigen::MatrixXd theta = Eigen::MatrixXd::Constant(2, 4, 0.5);
  EXPECT_THROW(survival_table(BitMatrix{{1, 1}, {0, 1}}, theta), PreconditionError);
  theta(0, 2) = 0.9;  // depends on latent 2, which is not a parent of item 1
  EXPECT_THROW(survival_table(BitMatrix{{1, 0}, {1, 1}}, theta), PreconditionError);
}

TEST(TriangularRank, FullForNondegenerateDrawsAndDeficientWhenSliceVanishes) {
  RandomStream rng(22, 0);
  for (int k = 1; k <= 4; ++k)
    for (int trial = 0; trial < 200; ++trial) {
      auto d = random_triangular_draw(k, rng);
      const auto r = triangular_rank_check(d.block, d.theta);
      EXPECT_TRUE(r.full);
      EXPECT_TRUE(r.det_identity_holds);
      zero_eta_slice(d, static_cast<Config>(trial) % num_configs(k - 1));
      const auto z = triangular_rank_check(d.block, d.theta);
      EXPECT_FALSE(z.full);
      EXPECT_LT(z.rank, static_cast<int>(num_configs(k)));
    }
}

TEST(TriangularRank, SingleLatentEqualLevels) {
  Eigen::MatrixXd theta(1, 2);
  theta << 0.4, 0.4;
  EXPECT_EQ(triangular_rank_check(BitMatrix{{1}}, theta).rank, 1);
}

TEST(KruskalRank, SimpleCases) {
  EXPECT_EQ(kruskal_rank(Eigen::MatrixXd::Identity(5, 5)), 5);
  Eigen::MatrixXd two(3, 3);
  two << 1, 1, 0, 2, 2, 1, 3, 3, 5;
  EXPECT_EQ(kruskal_rank(two), 1);
  EXPECT_EQ(kruskal_rank(Eigen::MatrixXd::Zero(3, 3)), 0);
}

TEST(KruskalRank, MatchesExactSubsetDeterminants) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = fixtures::random_int_matrix(rng);
    EXPECT_EQ(kruskal_rank(fixtures::to_eigen(m)), fixtures::kruskal_rank_bruteforce(m)) << "trial " << trial;
  }
}

TEST(KruskalRank, GaussianTallMatrixIsFull) {
  std::mt19937_64 rng(24);
  std::normal_distribution<double> z;
  Eigen::MatrixXd m(8, 4);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
  EXPECT_EQ(kruskal_rank(m), 4);
}

TEST(KruskalCondition, ReferenceSplitHolds) {
  const auto m = reference_model();
  const auto w = find_double_triangular(m.gamma());
  ASSERT_TRUE(w.has_value());
  const auto theta = conditional_table(m).matrix();
  const auto rep = kruskal_condition(item_set_matrix(theta, w->rows1), item_set_matrix(theta, w->rows2), item_set_matrix(theta, w->rows3), 8);
  EXPECT_TRUE(rep.holds);
  EXPECT_EQ(rep.ranks[0], 8);
  EXPECT_EQ(rep.ranks[1], 8);
  EXPECT_GE(rep.ranks[2], 2);
  EXPECT_GE(rep.sum, 18);
}

TEST(KruskalCondition, ArithmeticOfTheVerdict) {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
  const Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(2, 4);
  const auto r = kruskal_condition(eye, eye, flat, 4);
  EXPECT_EQ(r.ranks[2], 1);
  EXPECT_FALSE(r.holds);
  EXPECT_EQ(r.slack, -1);
  const Eigen::MatrixXd col = Eigen::MatrixXd::Ones(3, 1);
  EXPECT_FALSE(kruskal_condition(col, col, col, 1).holds);
  const Eigen::MatrixXd eye2 = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_TRUE(kruskal_condition(eye2, eye2, eye2, 2).holds);
  EXPECT_THROW(kruskal_condition(eye, eye, flat, 3), DimensionError);
}

TEST(ObservedMargin, RankOfWitnessSplit) {
  const auto m = reference_model();
  const std::vector<int> s1{0, 1, 2}, s2{4, 5, 6}, s8{7};
  EXPECT_EQ(rank_of_observed_margin(m, s1, s2), 8);
  EXPECT_EQ(rank_of_observed_margin(m, s1, s8), 1);
  EXPECT_THROW(rank_of_observed_margin(m, s1, s1), ParamError);
  const Blcm one(BipartiteGraph{{1}, {1}}, LatentDag::empty(1), LatentProportions({0.3, 0.7}),
                 {{ItemKind::Bernoulli, {0.2, 0.8}}, {ItemKind::Bernoulli, {0.3, 0.6}}});
  const std::vector<int> a{0}, b{1};
  EXPECT_EQ(rank_of_observed_margin(one, a, b), 2);
}

TEST(ObservedMargin, NumberOfLatents) {
  for (auto lam : {LambdaKind::Chain, LambdaKind::Collider, LambdaKind::Dependent}) EXPECT_EQ(estimate_k_population(reference_model(lam)).k, 3);
  const Blcm one(BipartiteGraph{{1}, {1}}, LatentDag::empty(1), LatentProportions({0.3, 0.7}),
                 {{ItemKind::Bernoulli, {0.2, 0.8}}, {ItemKind::Bernoulli, {0.3, 0.6}}});
  EXPECT_EQ(estimate_k_population(one).k, 1);
}

TEST(Scramble, IdentityPermutationLeavesTablesInPlace) {
  const auto m = reference_model();
  std::vector<Config> id(8);
  std::iota(id.begin(), id.end(), Config{0});
  const auto s = scramble_with(m, id, default_thresholds(8));
  const auto theta = conditional_table(m).matrix();
  for (int j = 0; j < 8; ++j) {
    EXPECT_TRUE(s.tables.tables[static_cast<std::size_t>(j)].row(0).isApprox(theta.row(j)));
    EXPECT_TRUE(s.tables.tables[static_cast<std::size_t>(j)].row(1).isOnes());
  }
  const auto w = find_double_triangular(m.gamma());
  const auto rec = recover_gamma_population(s.tables, *w, 3);
  EXPECT_EQ(rec.gamma, m.gamma().permute_cols(rec.tau));
}

TEST(RecoverGamma, ExactUpToColumnPermutationForEverySeed) {
  const auto m = reference_model();
  const auto w = find_double_triangular(m.gamma());
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = scramble(m, seed);
    const auto rec = recover_gamma_population(s.tables, *w, 3);
    EXPECT_EQ(rec.gamma, m.gamma().permute_cols(rec.tau));
    // Partition blocks at level k are {h_tau(0..k) fixed}.
    for (std::size_t lvl = 0; lvl < rec.partitions.running.size(); ++lvl)
      for (const auto& block : rec.partitions.running[lvl]) {
        const Config key = project_config(s.hidden[static_cast<std::size_t>(block[0])], std::span<const int>(rec.tau.data(), lvl + 1));
        for (int c : block) EXPECT_EQ(project_config(s.hidden[static_cast<std::size_t>(c)], std::span<const int>(rec.tau.data(), lvl + 1)), key);
      }
  }
}

TEST(RecoverGamma, DegenerateTablesDoNotYieldTheirGraph) {
  const auto d = degenerate_example(3, 0.3, 0.7);
  // Three items cannot host two triangular blocks; pair the model with itself.
  BitMatrix g(6, 3);
  std::vector<ItemDistribution> items;
  for (int j = 0; j < 6; ++j) {
    for (int k = 0; k < 3; ++k) g.set(j, k, d.model.gamma()(j % 3, k));
    items.push_back(d.model.item(j % 3));
  }
  const Blcm twin(BipartiteGraph(g), LatentDag::empty(3), d.model.proportions(), items);
  const auto w = find_double_triangular(twin.gamma());
  ASSERT_TRUE(w.has_value());
  const auto s = scramble(twin, 5);
  bool recovered = false;
  try {
    const auto rec = recover_gamma_population(s.tables, *w, 3);
    recovered = rec.gamma == twin.gamma().permute_cols(rec.tau);
  } catch (const StructureError&) {
  }
  EXPECT_FALSE(recovered);
}

TEST(ResolveSubset, LabelsAgreeWithHiddenPermutationUpToFlips) {
  const auto m = reference_model();
  const auto w = find_double_triangular(m.gamma());
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = scramble(m, seed);
    const auto rec = recover_gamma_population(s.tables, *w, 3);
    const auto lr = resolve_signs_subset(s.tables, rec.gamma);
    for (int lat = 0; lat < 3; ++lat) {
      const int flip = config_bit(lr.labels[0], lat) ^ config_bit(s.hidden[0], rec.tau[static_cast<std::size_t>(lat)]);
      for (std::size_t c = 0; c < 8; ++c)
        EXPECT_EQ(config_bit(lr.labels[c], lat) ^ config_bit(s.hidden[c], rec.tau[static_cast<std::size_t>(lat)]), flip);
    }
  }
}

TEST(ResolveSubset, ViolationRaises) {
  const auto m = subset_example_model();
  const auto s = scramble(m, 3);
  EXPECT_THROW(resolve_signs_subset(s.tables, m.gamma()), SubsetViolation);
}

TEST(ResolveMonotone, ExactLabelsForEverySeed) {
  const auto m = monotone_reference_model();
  const auto w = find_double_triangular(m.gamma());
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = scramble(m, seed);
    const auto lr = resolve_signs_monotone(s.tables, *w);
    for (std::size_t c = 0; c < 8; ++c)
      for (int lat = 0; lat < 3; ++lat) EXPECT_EQ(config_bit(lr.labels[c], lat), config_bit(s.hidden[c], w->cols2[static_cast<std::size_t>(lat)]));
  }
}

TEST(ResolveMonotone, SingleLatent) {
  const Blcm m(BipartiteGraph{{1}, {1}}, LatentDag::empty(1), LatentProportions({0.5, 0.5}),
               {{ItemKind::Bernoulli, {0.2, 0.8}}, {ItemKind::Bernoulli, {0.3, 0.6}}});
  const auto w = find_double_triangular(m.gamma());
  const std::vector<Config> swap{1, 0};
  const auto s = scramble_with(m, swap, default_thresholds(2));
  EXPECT_EQ(resolve_signs_monotone(s.tables, *w).labels, (std::vector<Config>{1, 0}));
}

TEST(ResolveMonotone, DecreasingItemsGiveWrongSignsOrRaise) {
  const auto m = reference_model();
  const auto w = find_double_triangular(m.gamma());
  int wrong = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = scramble(m, seed);
    try {
      const auto lr = resolve_signs_monotone(s.tables, *w);
      for (std::size_t c = 0; c < 8; ++c)
        for (int lat = 0; lat < 3; ++lat)
          if (config_bit(lr.labels[c], lat) != config_bit(s.hidden[c], w->cols2[static_cast<std::size_t>(lat)])) {
            ++wrong;
            c = 8;
            break;
          }
    } catch (const MonotoneViolation&) {
      ++wrong;
    } catch (const StructureError&) {
      ++wrong;
    }
  }
  EXPECT_EQ(wrong, 20);
}

TEST(Budget, Examples) {
  const auto b = identifiability_budget(budget_example_gamma());
  EXPECT_EQ(b.n_params, 39);
  EXPECT_EQ(b.n_equations, 15);
  EXPECT_EQ(b.deficit, 24);
  const auto one = identifiability_budget(BipartiteGraph{{1}, {1}, {1}});
  EXPECT_EQ(one.n_params, 7);
  EXPECT_EQ(one.n_equations, 7);
  EXPECT_EQ(one.deficit, 0);
  const auto none = identifiability_budget(3, std::vector<int>{});
  EXPECT_EQ(none.n_params, 7);
  EXPECT_EQ(none.n_equations, 0);
  EXPECT_EQ(none.deficit, 7);
}
