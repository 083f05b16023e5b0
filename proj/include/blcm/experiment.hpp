#pragma once

// Replicated simulate-fit-score runs and their aggregation into mean-SHD tables.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "blcm/estimate.hpp"
#include "blcm/graph.hpp"
#include "blcm/model.hpp"
#include "blcm/parallel.hpp"
#include "blcm/simulate.hpp"

namespace blcm {

struct RepOutcome {
  std::string scenario;
  std::int64_t n = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  int shd_gamma = 0;
  int shd_lambda = 0;
  /// Per-entry mismatch of the aligned graph estimate (J x K, 0/1).
  BitMatrix gamma_errors;
  double lambda2 = 0.0;
  double tau = 0.0;
};

/// Simulates one dataset, fits it with K known and scores the aligned estimates.
inline RepOutcome run_replication(const ScenarioSpec& spec, int rep, const EmConfig& base_cfg, InitMode mode) {
  RepOutcome out;
  out.scenario = spec.name();
  out.n = spec.n;
  out.rep = rep;
  out.seed = replication_seed(spec.seed, static_cast<std::uint64_t>(rep) * 1000003ull + static_cast<std::uint64_t>(spec.n));
  try {
    const auto model = build_scenario(spec);
    const auto data = sample_dataset(model, spec.n, out.seed);
    EmConfig cfg = base_cfg;
    cfg.seed = out.seed;
    cfg.parallelism = 1;
    FitOptions opt;
    opt.mode = mode;
    if (mode == InitMode::OracleBlend) {
      opt.truth_pi = model.proportions();
      opt.truth_theta = conditional_table(model);
    }
    const auto f = fit(data, model.latents(), cfg, opt);
    const auto perm = align_columns(f.gamma_hat, model.gamma());
    const auto aligned = f.gamma_hat.permute_cols(perm);
    out.shd_gamma = shd_gamma(aligned, model.gamma());
    out.gamma_errors = BitMatrix(model.items(), model.latents());
    for (int j = 0; j < model.items(); ++j)
      for (int k = 0; k < model.latents(); ++k) out.gamma_errors.set(j, k, aligned(j, k) != model.gamma()(j, k));
    out.shd_lambda = shd_cpdag(f.lambda_hat.permute_nodes(perm), dag_to_cpdag(model.lambda()));
    out.lambda2 = f.lambda2;
    out.tau = f.tau;
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

struct CellSummary {
  std::string scenario;
  std::int64_t n = 0;
  int reps_ok = 0;
  int reps_failed = 0;
  double mean_shd_gamma = 0.0;
  double mean_shd_lambda = 0.0;
  /// Fraction of successful reps with each entry wrong (J x K).
  std::vector<std::vector<double>> entry_error_rate;
};

struct ExperimentResult {
  std::vector<RepOutcome> reps;
  std::vector<CellSummary> cells;
};

/// Runs reps x scenarios x sample sizes; per-rep seeds derive from each
/// scenario's seed so results do not depend on the worker count.
inline ExperimentResult run_experiment(const std::vector<ScenarioSpec>& scenarios, const std::vector<std::int64_t>& n_values,
                                       int n_reps, const EmConfig& cfg, InitMode mode, int parallelism) {
  if (n_reps < 1) throw ParamError("run_experiment: n_reps must be at least 1");
  struct Job {
    ScenarioSpec spec;
    int rep;
  };
  std::vector<Job> jobs;
  for (const auto& s : scenarios)
    for (auto n : n_values)
      for (int r = 0; r < n_reps; ++r) {
        ScenarioSpec spec = s;
        spec.n = n;
        jobs.push_back({spec, r});
      }
  ExperimentResult res;
  res.reps.resize(jobs.size());
  parallel_for(jobs.size(), parallelism, [&](std::size_t i) { res.reps[i] = run_replication(jobs[i].spec, jobs[i].rep, cfg, mode); });

  for (const auto& s : scenarios)
    for (auto n : n_values) {
      CellSummary c;
      c.scenario = s.name();
      c.n = n;
      std::vector<std::vector<double>> err;
      for (const auto& r : res.reps) {
        if (r.scenario != c.scenario || r.n != n) continue;
        if (!r.ok) {
          ++c.reps_failed;
          continue;
        }
        ++c.reps_ok;
        c.mean_shd_gamma += r.shd_gamma;
        c.mean_shd_lambda += r.shd_lambda;
        if (err.empty())
          err.assign(static_cast<std::size_t>(r.gamma_errors.rows()), std::vector<double>(static_cast<std::size_t>(r.gamma_errors.cols()), 0.0));
        for (int j = 0; j < r.gamma_errors.rows(); ++j)
          for (int k = 0; k < r.gamma_errors.cols(); ++k) err[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] += r.gamma_errors(j, k);
      }
      if (c.reps_ok > 0) {
        c.mean_shd_gamma /= c.reps_ok;
        c.mean_shd_lambda /= c.reps_ok;
        for (auto& row : err)
          for (auto& v : row) v /= c.reps_ok;
      }
      c.entry_error_rate = std::move(err);
      res.cells.push_back(std::move(c));
    }
  return res;
}

}  // namespace blcm
