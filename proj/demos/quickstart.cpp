// Check a graph, simulate from it, fit it back and score the estimate.

#include <iostream>

#include "blcm/blcm.hpp"

int main() {
  using namespace blcm;

  const auto model = reference_model();
  const auto report = check_identifiability_conditions(model.gamma());
  std::cout << "identifiable by the sufficient conditions: " << (report.sufficient ? "yes" : "no") << "\n";
  std::cout << "K from the observed margin: " << estimate_k_population(model).k << "\n";

  const auto data = sample_dataset(model, 10000, 7);

  EmConfig cfg;
  cfg.seed = 7;
  FitOptions opt;
  opt.mode = InitMode::OracleBlend;
  opt.truth_pi = model.proportions();
  opt.truth_theta = conditional_table(model);
  const auto f = fit(data, model.latents(), cfg, opt);

  const auto perm = align_columns(f.gamma_hat, model.gamma());
  std::cout << "estimated graph (columns aligned to the truth):\n" << gamma_csv(f.gamma_hat.permute_cols(perm));
  std::cout << "SHD(Gamma) = " << shd_gamma(f.gamma_hat.permute_cols(perm), model.gamma()) << "\n";
  std::cout << "SHD(Lambda) = " << shd_cpdag(f.lambda_hat.permute_nodes(perm), dag_to_cpdag(model.lambda())) << "\n";
  std::cout << "latent CPDAG edges:\n" << cpdag_edge_list(f.lambda_hat.permute_nodes(perm));
}
