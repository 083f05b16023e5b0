#pragma once

// Estimation pipeline: discretize, penalized EM over 2^K Bernoulli classes with
// a grouped truncated lasso penalty, median-threshold graph extraction,
// pseudo-sample GES for the latent graph and BIC selection of K.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blcm/bits.hpp"
#include "blcm/error.hpp"
#include "blcm/ges.hpp"
#include "blcm/graph.hpp"
#include "blcm/model.hpp"
#include "blcm/parallel.hpp"
#include "blcm/simulate.hpp"

namespace blcm {

using BinaryMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kThetaMin = 1e-6;
inline constexpr double kThetaMax = 1.0 - 1e-6;

struct EmConfig {
  std::vector<double> lambda2_grid{1.0, 10.0, 100.0, 1000.0};
  std::vector<double> tau_grid{0.05, 0.1};
  double eps_gamma = 0.125;
  int n_pseudo = 2000;
  int max_iters = 10;
  double tol_pi = 0.005;
  double w_ref = 0.7;
  double w_noise = 0.3;
  int restarts = 20;
  /// Random restarts only: the best screened start per grid point is run on
  /// to this many further iterations with the tighter tolerance.
  int refine_iters = 500;
  double refine_tol_pi = 1e-6;
  int cd_max_iters = 50;
  double cd_tol = 1e-7;
  std::uint64_t seed = 0;
  int parallelism = 1;

  void validate() const {
    if (lambda2_grid.empty() || tau_grid.empty()) throw ParamError("EmConfig: tuning grids must be nonempty");
    for (double v : lambda2_grid)
      if (!(v >= 0.0)) throw ParamError("EmConfig: lambda2 values must be nonnegative");
    for (double v : tau_grid)
      if (!(v > 0.0)) throw ParamError("EmConfig: tau values must be positive");
    if (!(eps_gamma >= 0.0)) throw ParamError("EmConfig: eps_gamma must be nonnegative");
    if (n_pseudo < 1 || max_iters < 1 || restarts < 1 || cd_max_iters < 1 || refine_iters < 0)
      throw ParamError("EmConfig: iteration and sample counts must be positive");
    if (!(tol_pi > 0.0) || !(cd_tol > 0.0) || !(refine_tol_pi > 0.0)) throw ParamError("EmConfig: tolerances must be positive");
    if (!(w_ref >= 0.0 && w_noise >= 0.0) || std::abs(w_ref + w_noise - 1.0) > 1e-12)
      throw ParamError("EmConfig: blend weights must be nonnegative and sum to 1");
  }
};

/// Y = 1{X > cut}; binary columns pass through (validated to be 0/1).
inline BinaryMatrix discretize(const Dataset& data, const Cuts& cuts) {
  if (static_cast<int>(cuts.size()) != data.items()) throw DimensionError("discretize: one cut per item required");
  BinaryMatrix y(data.size(), data.items());
  for (Eigen::Index i = 0; i < data.size(); ++i)
    for (int j = 0; j < data.items(); ++j) {
      const double x = data.values(i, j);
      if (data.columns[static_cast<std::size_t>(j)] == Dataset::Column::Binary) {
        if (x != 0.0 && x != 1.0) throw SchemaError("discretize: binary column " + std::to_string(j + 1) + " holds " + std::to_string(x));
        y(i, j) = static_cast<std::uint8_t>(x);
      } else {
        y(i, j) = x > cuts[static_cast<std::size_t>(j)] ? 1 : 0;
      }
    }
  return y;
}

inline BinaryMatrix discretize(const Dataset& data) { return discretize(data, default_cuts(data.items())); }

/// Column means as cuts (binary columns get 0, which leaves them unchanged).
inline Cuts mean_cuts(const Dataset& data) {
  Cuts c(static_cast<std::size_t>(data.items()), 0.0);
  if (data.size() == 0) return c;
  for (int j = 0; j < data.items(); ++j)
    if (data.columns[static_cast<std::size_t>(j)] == Dataset::Column::Real) c[static_cast<std::size_t>(j)] = data.values.col(j).mean();
  return c;
}

/// Distinct response patterns with multiplicities.
struct PatternCounts {
  Eigen::MatrixXd y;        // P x J, entries 0/1
  Eigen::VectorXd weight;   // P
  double total = 0.0;
};

inline PatternCounts compress_patterns(const BinaryMatrix& y) {
  std::map<std::vector<std::uint8_t>, double> counts;
  std::vector<std::uint8_t> row(static_cast<std::size_t>(y.cols()));
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) row[static_cast<std::size_t>(j)] = y(i, j);
    counts[row] += 1.0;
  }
  PatternCounts out;
  out.y.resize(static_cast<Eigen::Index>(counts.size()), y.cols());
  out.weight.resize(static_cast<Eigen::Index>(counts.size()));
  Eigen::Index p = 0;
  for (const auto& [pattern, w] : counts) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) out.y(p, j) = pattern[static_cast<std::size_t>(j)];
    out.weight(p) = w;
    out.total += w;
    ++p;
  }
  return out;
}

struct EmParams {
  std::vector<double> pi;   // length 2^K
  Eigen::MatrixXd theta;    // J x 2^K
};

/// lambda * sum_j sum_{h != h'} min(|theta_jh - theta_jh'|, tau), ordered pairs.
inline double truncated_lasso_penalty(const Eigen::MatrixXd& theta, double lambda, double tau) {
  if (lambda == 0.0) return 0.0;
  double s = 0.0;
  for (Eigen::Index j = 0; j < theta.rows(); ++j)
    for (Eigen::Index a = 0; a < theta.cols(); ++a)
      for (Eigen::Index b = a + 1; b < theta.cols(); ++b) s += std::min(std::abs(theta(j, a) - theta(j, b)), tau);
  return 2.0 * lambda * s;
}

struct EStep {
  double loglik = 0.0;
  Eigen::VectorXd mass;     // expected class counts, length 2^K
  Eigen::MatrixXd success;  // J x 2^K expected success counts
};

inline EStep e_step(const PatternCounts& pc, const EmParams& p) {
  const Eigen::MatrixXd lt = p.theta.array().log().matrix();
  const Eigen::MatrixXd lf = (1.0 - p.theta.array()).log().matrix();
  Eigen::MatrixXd lp = pc.y * lt + (1.0 - pc.y.array()).matrix() * lf;  // P x 2^K
  for (Eigen::Index h = 0; h < lp.cols(); ++h) {
    const double w = p.pi[static_cast<std::size_t>(h)];
    lp.col(h).array() += w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
  }
  EStep out;
  for (Eigen::Index r = 0; r < lp.rows(); ++r) {
    const double mx = lp.row(r).maxCoeff();
    lp.row(r) = (lp.row(r).array() - mx).exp().matrix();
    const double s = lp.row(r).sum();
    lp.row(r) /= s;
    out.loglik += pc.weight(r) * (mx + std::log(s));
  }
  const Eigen::MatrixXd weighted = pc.weight.asDiagonal() * lp;  // P x 2^K
  out.mass = weighted.colwise().sum().transpose();
  out.success = pc.y.transpose() * weighted;
  return out;
}

namespace detail {

/// argmax over [kThetaMin, kThetaMax] of
///   s log t + (n - s) log(1 - t) - sum_i c_i |t - b_i|
/// (concave): stationary points on each linear piece plus the breakpoints.
inline double fused_coordinate(double s, double n, const std::vector<double>& b, const std::vector<double>& c, double current) {
  auto objective = [&](double t) {
    double v = 0.0;
    if (s > 0.0) v += s * std::log(t);
    if (n - s > 0.0) v += (n - s) * std::log(1.0 - t);
    for (std::size_t i = 0; i < b.size(); ++i) v -= c[i] * std::abs(t - b[i]);
    return v;
  };
  std::vector<double> knots{kThetaMin, kThetaMax};
  for (std::size_t i = 0; i < b.size(); ++i)
    if (c[i] > 0.0) knots.push_back(std::clamp(b[i], kThetaMin, kThetaMax));
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  double best_t = std::clamp(current, kThetaMin, kThetaMax);
  double best_v = objective(best_t);
  auto consider = [&](double t) {
    const double v = objective(t);
    if (v > best_v + 1e-15 * std::max(1.0, std::abs(best_v))) {
      best_v = v;
      best_t = t;
    }
  };
  for (double k : knots) consider(k);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double lo = knots[i], hi = knots[i + 1];
    const double mid = 0.5 * (lo + hi);
    double slope = 0.0;  // derivative of the penalty term is -slope on this piece
    for (std::size_t q = 0; q < b.size(); ++q)
      if (c[q] > 0.0) slope += mid > b[q] ? c[q] : -c[q];
    // s(1 - t) - (n - s) t - slope t (1 - t) = 0  <=>  slope t^2 - (n + slope) t + s = 0
    const double a = n + slope;
    const double disc = a * a - 4.0 * slope * s;
    double t;
    if (slope == 0.0) {
      if (n <= 0.0) continue;
      t = s / n;
    } else {
      const double den = a + std::sqrt(std::max(disc, 0.0));
      if (den <= 0.0) continue;
      t = 2.0 * s / den;
    }
    if (t > lo && t < hi) consider(t);
  }
  return best_t;
}

/// One penalized M-step for row j: difference-of-convex reweighting of the
/// truncated lasso, then coordinate descent on the fused surrogate.
inline void m_step_row(Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> theta, const Eigen::RowVectorXd& success, const Eigen::VectorXd& mass,
                       double lambda, double tau, int cd_max_iters, double cd_tol) {
  const Eigen::Index m = theta.size();
  if (lambda == 0.0) {
    for (Eigen::Index h = 0; h < m; ++h)
      if (mass(h) > 0.0) theta(h) = std::clamp(success(h) / mass(h), kThetaMin, kThetaMax);
    return;
  }
  std::vector<double> others(static_cast<std::size_t>(m - 1)), weights(static_cast<std::size_t>(m - 1));
  for (int pass = 0; pass < 5; ++pass) {
    Eigen::MatrixXd w(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b)
        w(a, b) = (a != b && std::abs(theta(a) - theta(b)) < tau) ? 2.0 * lambda : 0.0;
    for (int it = 0; it < cd_max_iters; ++it) {
      double change = 0.0;
      for (Eigen::Index h = 0; h < m; ++h) {
        std::size_t q = 0;
        for (Eigen::Index g = 0; g < m; ++g) {
          if (g == h) continue;
          others[q] = theta(g);
          weights[q] = w(h, g);
          ++q;
        }
        const double t = fused_coordinate(success(h), mass(h), others, weights, theta(h));
        change = std::max(change, std::abs(t - theta(h)));
        theta(h) = t;
      }
      if (change < cd_tol) break;
    }
    bool same = true;
    for (Eigen::Index a = 0; a < m && same; ++a)
      for (Eigen::Index b = 0; b < m && same; ++b)
        same = (a == b) || ((std::abs(theta(a) - theta(b)) < tau) == (w(a, b) > 0.0));
    if (same) break;
  }
}

}  // namespace detail

struct EmResult {
  EmParams params;
  double loglik = 0.0;
  double penalty = 0.0;
  double objective = 0.0;
  int iters = 0;
  bool converged = false;
  /// Penalized objective at the start of each iteration, then at the end.
  std::vector<double> trace;
};

struct EmTuning {
  double lambda = 0.0;
  double tau = 0.1;
  int max_iters = 10;
  double tol_pi = 0.005;
  int cd_max_iters = 50;
  double cd_tol = 1e-7;
};

/// Items whose observed column is constant; their theta rows are pinned.
inline std::vector<int> constant_columns(const PatternCounts& pc) {
  std::vector<int> out;
  for (Eigen::Index j = 0; j < pc.y.cols(); ++j) {
    const double mx = pc.y.col(j).maxCoeff(), mn = pc.y.col(j).minCoeff();
    if (mx == mn) out.push_back(static_cast<int>(j));
  }
  return out;
}

inline void pin_rows(EmParams& p, const PatternCounts& pc, const std::vector<int>& rows) {
  for (int j : rows) p.theta.row(j).setConstant(pc.y(0, j) > 0.5 ? kThetaMax : kThetaMin);
}

inline EmResult penalized_em(const PatternCounts& pc, int k, const EmTuning& tune, EmParams init) {
  if (k < 1) throw DegenerateInput("penalized_em: k must be at least 1");
  if (pc.total <= 0.0) throw DegenerateInput("penalized_em: empty data");
  const auto n_cfg = static_cast<Eigen::Index>(num_configs(k));
  if (static_cast<Eigen::Index>(init.pi.size()) != n_cfg || init.theta.cols() != n_cfg || init.theta.rows() != pc.y.cols())
    throw DimensionError("penalized_em: initial parameters have the wrong shape");
  const auto pinned = constant_columns(pc);
  EmParams cur = std::move(init);
  cur.theta = cur.theta.cwiseMax(kThetaMin).cwiseMin(kThetaMax);
  pin_rows(cur, pc, pinned);

  EmResult out;
  for (int it = 1; it <= tune.max_iters; ++it) {
    const auto es = e_step(pc, cur);
    out.trace.push_back(es.loglik - truncated_lasso_penalty(cur.theta, tune.lambda, tune.tau));
    EmParams next = cur;
    double diff2 = 0.0;
    for (Eigen::Index h = 0; h < n_cfg; ++h) {
      next.pi[static_cast<std::size_t>(h)] = es.mass(h) / pc.total;
      diff2 += std::pow(next.pi[static_cast<std::size_t>(h)] - cur.pi[static_cast<std::size_t>(h)], 2);
    }
    for (Eigen::Index j = 0; j < next.theta.rows(); ++j) {
      if (std::find(pinned.begin(), pinned.end(), static_cast<int>(j)) != pinned.end()) continue;
      detail::m_step_row(next.theta.row(j), es.success.row(j), es.mass, tune.lambda, tune.tau, tune.cd_max_iters, tune.cd_tol);
    }
    cur = std::move(next);
    out.iters = it;
    if (std::sqrt(diff2) < tune.tol_pi) {
      out.converged = true;
      break;
    }
  }
  const auto final_es = e_step(pc, cur);
  out.loglik = final_es.loglik;
  out.penalty = truncated_lasso_penalty(cur.theta, tune.lambda, tune.tau);
  out.objective = out.loglik - out.penalty;
  out.trace.push_back(out.objective);
  out.params = std::move(cur);
  return out;
}

inline EmResult penalized_em(const BinaryMatrix& y, int k, const EmTuning& tune, EmParams init) {
  if (y.rows() == 0) throw DegenerateInput("penalized_em: empty data");
  return penalized_em(compress_patterns(y), k, tune, std::move(init));
}

/// Draw from Dirichlet(1, ..., 1).
inline std::vector<double> dirichlet_uniform(std::size_t n, RandomStream& rng) {
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) {
    x = -std::log(rng.uniform());
    s += x;
  }
  for (auto& x : v) x /= s;
  return v;
}

/// Blend of the true parameters with noise: w_ref * truth + w_noise * noise,
/// Dirichlet(1) noise for pi and Uniform(0,1) noise for theta.
inline EmParams oracle_blend_init(const LatentProportions& pi, const CondTable& theta, const EmConfig& cfg, std::uint64_t stream = 0) {
  RandomStream rng(cfg.seed, 0x424c454e44ull + stream);
  EmParams p;
  const auto noise = dirichlet_uniform(pi.size(), rng);
  p.pi.resize(pi.size());
  double s = 0.0;
  for (std::size_t h = 0; h < pi.size(); ++h) {
    p.pi[h] = cfg.w_ref * pi[static_cast<Config>(h)] + cfg.w_noise * noise[h];
    s += p.pi[h];
  }
  for (auto& v : p.pi) v /= s;
  p.theta = theta.matrix();
  for (Eigen::Index j = 0; j < p.theta.rows(); ++j)
    for (Eigen::Index h = 0; h < p.theta.cols(); ++h) p.theta(j, h) = cfg.w_ref * p.theta(j, h) + cfg.w_noise * rng.uniform();
  return p;
}

inline EmParams random_init(int j, int k, RandomStream& rng) {
  EmParams p;
  p.pi = dirichlet_uniform(num_configs(k), rng);
  p.theta.resize(j, static_cast<Eigen::Index>(num_configs(k)));
  for (Eigen::Index r = 0; r < p.theta.rows(); ++r)
    for (Eigen::Index h = 0; h < p.theta.cols(); ++h) p.theta(r, h) = 0.2 + 0.6 * rng.uniform();
  return p;
}

/// gamma_jk = 1 iff the lower-middle median over h_{-k} of
/// |theta_{j,(h_{-k},1)} - theta_{j,(h_{-k},0)}| exceeds eps.
inline BipartiteGraph extract_gamma(const Eigen::MatrixXd& theta, double eps) {
  const int k = log2_exact(static_cast<std::size_t>(theta.cols()));
  if (k < 1) throw DimensionError("extract_gamma: need K >= 1");
  BitMatrix g(static_cast<int>(theta.rows()), k);
  std::vector<double> d;
  for (Eigen::Index j = 0; j < theta.rows(); ++j)
    for (int c = 0; c < k; ++c) {
      d.clear();
      for (Config h = 0; h < num_configs(k); ++h)
        if (!config_bit(h, c)) d.push_back(std::abs(theta(j, flip_bit(h, c)) - theta(j, h)));
      std::sort(d.begin(), d.end());
      g.set(static_cast<int>(j), c, d[(d.size() - 1) / 2] > eps);
    }
  return BipartiteGraph(std::move(g));
}

inline BipartiteGraph extract_gamma(const CondTable& theta, double eps) { return extract_gamma(theta.matrix(), eps); }

/// Draws n configurations from pi and runs GES on them.
inline Cpdag fit_lambda_ges(const LatentProportions& pi, int n_pseudo, std::uint64_t seed) {
  if (pi.latents() < 1) return Cpdag(0, {}, {});
  RandomStream rng(seed, 0x474553ull);
  std::vector<double> cdf(pi.size());
  std::partial_sum(pi.values().begin(), pi.values().end(), cdf.begin());
  std::vector<double> counts(pi.size(), 0.0);
  for (int i = 0; i < n_pseudo; ++i) {
    auto it = std::upper_bound(cdf.begin(), cdf.end(), rng.uniform() * cdf.back());
    if (it == cdf.end()) --it;
    counts[static_cast<std::size_t>(it - cdf.begin())] += 1.0;
  }
  return ges(BinaryBicScore(pi.latents(), std::move(counts)));
}

/// Number of distinct levels in a row after merging sorted neighbours closer than tol.
inline int fused_levels(const Eigen::RowVectorXd& row, double tol) {
  std::vector<double> v(row.data(), row.data() + row.size());
  std::sort(v.begin(), v.end());
  int levels = v.empty() ? 0 : 1;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] - v[i - 1] > tol) ++levels;
  return levels;
}

struct GridPoint {
  double lambda2 = 0.0;
  double tau = 0.0;
  double loglik = 0.0;
  double penalty = 0.0;
  double bic = 0.0;
  int df = 0;
  int iters = 0;
  bool converged = false;
};

struct FitResult {
  int k = 0;
  LatentProportions pi_hat;
  CondTable theta_hat;
  BipartiteGraph gamma_hat;
  Cpdag lambda_hat;
  double loglik = 0.0;
  double bic = 0.0;
  double penalty_value = 0.0;
  int df = 0;
  int iters_used = 0;
  bool converged = false;
  double lambda2 = 0.0;
  double tau = 0.0;
  std::vector<GridPoint> grid;
  std::vector<std::string> warnings;
};

enum class InitMode { OracleBlend, RandomRestarts };

struct FitOptions {
  InitMode mode = InitMode::RandomRestarts;
  /// Required for OracleBlend: the true proportions and discretized table.
  std::optional<LatentProportions> truth_pi;
  std::optional<CondTable> truth_theta;
  Cuts cuts;  // empty: threshold every real item at 0
};

namespace detail {

inline EmTuning tuning_for(const EmConfig& cfg, double lambda2, double tau) {
  EmTuning t;
  t.lambda = lambda2;
  t.tau = tau;
  t.max_iters = cfg.max_iters;
  t.tol_pi = cfg.tol_pi;
  t.cd_max_iters = cfg.cd_max_iters;
  t.cd_tol = cfg.cd_tol;
  return t;
}

}  // namespace detail

/// Full pipeline on discretized data.
inline FitResult fit_binary(const BinaryMatrix& y, int k, const EmConfig& cfg, const FitOptions& opt) {
  cfg.validate();
  if (k < 1) throw DegenerateInput("fit: k must be at least 1");
  if (y.rows() == 0) throw DegenerateInput("fit: dataset has no records");
  if (k > 8) throw DimensionError("fit: k > 8 not supported");
  const auto pc = compress_patterns(y);
  const int j = static_cast<int>(y.cols());

  FitResult res;
  res.k = k;
  for (int c : constant_columns(pc))
    res.warnings.push_back("item " + std::to_string(c + 1) + " is constant; its conditional row is pinned");

  std::vector<std::pair<double, double>> grid;
  for (double l : cfg.lambda2_grid)
    for (double t : cfg.tau_grid) grid.emplace_back(l, t);

  std::vector<EmParams> inits;
  if (opt.mode == InitMode::OracleBlend) {
    if (!opt.truth_pi || !opt.truth_theta) throw ParamError("fit: oracle-blend initialization needs the true parameters");
    if (opt.truth_pi->latents() != k || opt.truth_theta->items() != j || opt.truth_theta->latents() != k)
      throw DimensionError("fit: true parameters do not match the data shape");
    inits.push_back(oracle_blend_init(*opt.truth_pi, *opt.truth_theta, cfg));
  } else {
    for (int r = 0; r < cfg.restarts; ++r) {
      RandomStream rng(cfg.seed, 0x494e4954ull + static_cast<std::uint64_t>(r));
      inits.push_back(random_init(j, k, rng));
    }
  }

  std::vector<EmResult> results(grid.size());
  parallel_for(grid.size(), cfg.parallelism, [&](std::size_t g) {
    const auto tune = detail::tuning_for(cfg, grid[g].first, grid[g].second);
    std::optional<EmResult> best;
    for (const auto& init : inits) {
      auto r = penalized_em(pc, k, tune, init);
      if (!best || r.objective > best->objective) best = std::move(r);
    }
    if (opt.mode == InitMode::RandomRestarts && cfg.refine_iters > 0) {
      auto long_tune = tune;
      long_tune.max_iters = cfg.refine_iters;
      long_tune.tol_pi = cfg.refine_tol_pi;
      auto r = penalized_em(pc, k, long_tune, best->params);
      r.iters += best->iters;
      best = std::move(r);
    }
    results[g] = std::move(*best);
  });

  const double log_n = std::log(pc.total);
  std::size_t pick = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    GridPoint gp;
    gp.lambda2 = grid[g].first;
    gp.tau = grid[g].second;
    gp.loglik = results[g].loglik;
    gp.penalty = results[g].penalty;
    gp.iters = results[g].iters;
    gp.converged = results[g].converged;
    gp.df = static_cast<int>(num_configs(k)) - 1;
    for (Eigen::Index r = 0; r < results[g].params.theta.rows(); ++r)
      gp.df += fused_levels(results[g].params.theta.row(r), gp.tau / 2.0);
    gp.bic = -2.0 * gp.loglik + gp.df * log_n;
    res.grid.push_back(gp);
    if (gp.bic < res.grid[pick].bic) pick = g;
  }

  const auto& best = results[pick];
  res.pi_hat = LatentProportions::normalized(best.params.pi);
  res.theta_hat = CondTable(best.params.theta);
  res.loglik = best.loglik;
  res.penalty_value = best.penalty;
  res.iters_used = best.iters;
  res.converged = best.converged;
  res.bic = res.grid[pick].bic;
  res.df = res.grid[pick].df;
  res.lambda2 = res.grid[pick].lambda2;
  res.tau = res.grid[pick].tau;
  res.gamma_hat = extract_gamma(res.theta_hat, cfg.eps_gamma);
  res.lambda_hat = fit_lambda_ges(res.pi_hat, cfg.n_pseudo, cfg.seed);
  return res;
}

inline FitResult fit(const Dataset& data, int k, const EmConfig& cfg, const FitOptions& opt = {}) {
  if (data.size() == 0) throw DegenerateInput("fit: dataset has no records");
  const auto y = opt.cuts.empty() ? discretize(data) : discretize(data, opt.cuts);
  return fit_binary(y, k, cfg, opt);
}

struct KSelection {
  int k_best = 0;
  std::vector<std::pair<int, double>> bic;  // (k, BIC) per candidate
  std::vector<FitResult> fits;
};

/// Fits every candidate K with random restarts and keeps the smallest BIC
/// (ties go to the smaller K).
inline KSelection select_k(const Dataset& data, std::vector<int> candidates, const EmConfig& cfg, const Cuts& cuts = {}) {
  if (candidates.empty()) throw ParamError("select_k: no candidates");
  std::sort(candidates.begin(), candidates.end());
  KSelection out;
  FitOptions opt;
  opt.cuts = cuts;
  double best = std::numeric_limits<double>::infinity();
  for (int k : candidates) {
    auto f = fit(data, k, cfg, opt);
    out.bic.emplace_back(k, f.bic);
    if (f.bic < best) {
      best = f.bic;
      out.k_best = k;
    }
    out.fits.push_back(std::move(f));
  }
  return out;
}

}  // namespace blcm
