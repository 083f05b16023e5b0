#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "blcm/blcm.hpp"

namespace fs = std::filesystem;
using namespace blcm;

namespace {

enum Exit : int { kOk = 0, kInput = 1, kNegative = 2, kRuntime = 3 };

struct CommonOpts {
  std::uint64_t seed = 0;
  std::string out;
  int parallelism = 0;
};

int workers(int requested) { return requested > 0 ? requested : default_parallelism(); }

void emit(const json& j, const std::string& out_file) {
  const auto text = j.dump(2) + "\n";
  if (!out_file.empty()) write_text(out_file, text);
  std::cout << text;
}

Blcm model_or(const std::string& path, Blcm fallback) {
  if (path.empty()) return fallback;
  try {
    return blcm_from_json(json::parse(read_text(path)));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
}

EmConfig load_em_config(const std::string& path, std::uint64_t seed, bool seed_given) {
  EmConfig cfg;
  if (!path.empty()) {
    json j;
    try {
      j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("config JSON: ") + e.what());
    }
    cfg = em_config_from_json(j.contains("em") ? j.at("em") : j);
  }
  if (seed_given) cfg.seed = seed;
  cfg.validate();
  return cfg;
}

std::vector<int> one_based(const std::vector<int>& v) {
  std::vector<int> o;
  for (int x : v) o.push_back(x + 1);
  return o;
}

// ---- simulate ----

int run_simulate(const std::string& scenario, std::int64_t n, const CommonOpts& c) {
  auto spec = parse_scenario(scenario);
  spec.n = n;
  spec.seed = c.seed;
  const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
  const auto model = build_scenario(spec);
  write_dataset_csv(dir / "data.csv", sample_dataset(model, n, spec.seed));
  write_text(dir / "manifest.json", scenario_manifest(spec).dump(2) + "\n");
  std::cout << "wrote " << (dir / "data.csv").string() << " (" << n << " rows) and " << (dir / "manifest.json").string() << "\n";
  return kOk;
}

// ---- check ----

int run_check(const std::string& gamma_path, const CommonOpts& c) {
  const auto g = read_gamma_csv(gamma_path);
  const auto r = check_identifiability_conditions(g);
  emit(to_json(r), c.out.empty() ? "" : (fs::path(c.out) / "check.json").string());
  return r.sufficient ? kOk : kNegative;
}

// ---- fit ----

int run_fit(const std::string& data_path, std::optional<int> k, const std::string& config, const std::string& schema,
            bool seed_given, const CommonOpts& c) {
  std::optional<std::vector<Dataset::Column>> cols;
  if (!schema.empty()) cols = parse_schema(schema);
  const auto data = load_dataset(data_path, cols);
  auto cfg = load_em_config(config, c.seed, seed_given);
  cfg.parallelism = workers(c.parallelism);
  const fs::path dir = c.out.empty() ? fs::path("fit_out") : fs::path(c.out);

  FitResult best;
  json report;
  if (k) {
    best = fit(data, *k, cfg);
    report = to_json(best);
  } else {
    auto sel = select_k(data, {2, 3, 4}, cfg);
    std::ostringstream bic;
    bic << "k,bic\n";
    json table = json::array();
    for (auto [kk, b] : sel.bic) {
      bic << kk << ',' << format_real(b) << '\n';
      table.push_back({{"k", kk}, {"bic", b}});
    }
    write_text(dir / "bic_by_k.csv", bic.str());
    for (auto& f : sel.fits)
      if (f.k == sel.k_best) best = std::move(f);
    report = to_json(best);
    report["k_selection"] = {{"k_best", sel.k_best}, {"bic", table}};
    std::cout << bic.str();
  }
  write_text(dir / "fit.json", report.dump(2) + "\n");
  write_text(dir / "gamma_hat.csv", gamma_csv(best.gamma_hat));
  write_text(dir / "theta_hat.csv", theta_csv(best.theta_hat));
  write_text(dir / "lambda_hat.csv", cpdag_edge_list(best.lambda_hat));
  for (const auto& w : best.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "K = " << best.k << ", BIC = " << format_real(best.bic) << ", lambda2 = " << best.lambda2 << ", tau = " << best.tau
            << "\n"
            << gamma_csv(best.gamma_hat) << "outputs in " << dir.string() << "\n";
  return kOk;
}

// ---- experiment ----

struct ExperimentConfig {
  std::vector<ScenarioSpec> scenarios;
  int n_reps = 50;
  std::vector<std::int64_t> n_values{1000, 10000};
  EmConfig em;
  std::string output_dir = "experiment_out";
  int parallelism = 0;
  InitMode init = InitMode::OracleBlend;
};

InitMode parse_init(const std::string& s) {
  if (s == "oracle") return InitMode::OracleBlend;
  if (s == "random") return InitMode::RandomRestarts;
  throw ParamError("init must be 'oracle' or 'random', got '" + s + "'");
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("scenarios")) {
      c.scenarios.clear();
      for (const auto& s : j.at("scenarios")) c.scenarios.push_back(parse_scenario(s.get<std::string>()));
    }
    if (j.contains("n_reps")) c.n_reps = j.at("n_reps").get<int>();
    if (j.contains("n_values")) c.n_values = j.at("n_values").get<std::vector<std::int64_t>>();
    if (j.contains("em")) c.em = em_config_from_json(j.at("em"));
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("parallelism")) c.parallelism = j.at("parallelism").get<int>();
    if (j.contains("init")) c.init = parse_init(j.at("init").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
  return c;
}

int run_experiment_cmd(const std::string& config, const std::vector<std::string>& scenarios, const std::vector<std::int64_t>& ns,
                       std::optional<int> reps, const std::string& init, bool seed_given, const CommonOpts& c) {
  ExperimentConfig ec;
  if (!config.empty()) {
    try {
      ec = experiment_config_from_json(json::parse(read_text(config)));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("experiment config: ") + e.what());
    }
  }
  if (!scenarios.empty()) {
    ec.scenarios.clear();
    for (const auto& s : scenarios) ec.scenarios.push_back(parse_scenario(s));
  }
  if (ec.scenarios.empty()) ec.scenarios.push_back(parse_scenario("chain/DT"));
  if (!ns.empty()) ec.n_values = ns;
  if (reps) ec.n_reps = *reps;
  if (!init.empty()) ec.init = parse_init(init);
  if (!c.out.empty()) ec.output_dir = c.out;
  if (c.parallelism > 0) ec.parallelism = c.parallelism;
  if (seed_given) ec.em.seed = c.seed;
  if (ec.n_reps < 1) throw ParamError("experiment: reps must be at least 1");
  for (auto n : ec.n_values)
    if (n < 1) throw ParamError("experiment: sample sizes must be positive");
  ec.em.validate();
  for (auto& s : ec.scenarios) s.seed = ec.em.seed;

  const auto res = run_experiment(ec.scenarios, ec.n_values, ec.n_reps, ec.em, ec.init, workers(ec.parallelism));
  const fs::path dir = ec.output_dir;

  std::ostringstream reps_csv;
  reps_csv << "scenario,n,rep,seed,ok,shd_gamma,shd_lambda,lambda2,tau,error\n";
  int failed = 0;
  for (const auto& r : res.reps) {
    reps_csv << r.scenario << ',' << r.n << ',' << r.rep << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ',';
    if (r.ok)
      reps_csv << r.shd_gamma << ',' << r.shd_lambda << ',' << r.lambda2 << ',' << r.tau << ",\n";
    else {
      ++failed;
      std::string e = r.error;
      for (char& ch : e)
        if (ch == ',' || ch == '\n') ch = ';';
      reps_csv << ",,,," << e << '\n';
      std::cerr << "rep failed: " << r.scenario << " n=" << r.n << " rep=" << r.rep << ": " << r.error << "\n";
    }
  }
  write_text(dir / "reps.csv", reps_csv.str());

  std::ostringstream table;
  table << "metric,scenario";
  for (auto n : ec.n_values) table << ",N=" << n;
  table << '\n';
  for (const char* metric : {"shd_gamma", "shd_lambda"})
    for (const auto& s : ec.scenarios) {
      table << metric << ',' << s.name();
      for (const auto& cell : res.cells)
        if (cell.scenario == s.name())
          table << ',' << (cell.reps_ok ? format_real(metric[4] == 'g' ? cell.mean_shd_gamma : cell.mean_shd_lambda) : "NA");
      table << '\n';
    }
  write_text(dir / "summary.csv", table.str());

  std::ostringstream entry;
  entry << "scenario,n,item";
  const int kmax = res.cells.empty() || res.cells[0].entry_error_rate.empty() ? 3 : static_cast<int>(res.cells[0].entry_error_rate[0].size());
  for (int k = 0; k < kmax; ++k) entry << ",k" << k + 1;
  entry << '\n';
  json cells = json::array();
  for (const auto& cell : res.cells) {
    for (std::size_t j = 0; j < cell.entry_error_rate.size(); ++j) {
      entry << cell.scenario << ',' << cell.n << ",x" << j + 1;
      for (double v : cell.entry_error_rate[j]) entry << ',' << format_real(v);
      entry << '\n';
    }
    cells.push_back({{"scenario", cell.scenario},
                     {"n", cell.n},
                     {"reps_ok", cell.reps_ok},
                     {"reps_failed", cell.reps_failed},
                     {"mean_shd_gamma", cell.mean_shd_gamma},
                     {"mean_shd_lambda", cell.mean_shd_lambda},
                     {"entry_error_rate", cell.entry_error_rate}});
  }
  write_text(dir / "entrywise.csv", entry.str());
  json summary{{"n_reps", ec.n_reps},
               {"init", ec.init == InitMode::OracleBlend ? "oracle" : "random"},
               {"em", to_json(ec.em)},
               {"failed_reps", failed},
               {"cells", cells}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << table.str();
  if (failed) std::cout << failed << " replication(s) failed and were excluded\n";
  std::cout << "outputs in " << dir.string() << "\n";
  return kOk;
}

// ---- oracle ----

int run_budget(const std::string& gamma_path, const CommonOpts& c) {
  const auto g = gamma_path.empty() ? budget_example_gamma() : read_gamma_csv(gamma_path);
  const auto b = identifiability_budget(g);
  emit({{"n_params", b.n_params}, {"n_equations", b.n_equations}, {"deficit", b.deficit}, {"n_params_sparse", b.n_params_sparse}},
       c.out.empty() ? "" : (fs::path(c.out) / "budget.json").string());
  return kOk;
}

int run_triangular_rank(int k, bool zero_eta, const CommonOpts& c) {
  RandomStream rng(c.seed, 0x4c454d);
  auto d = random_triangular_draw(k, rng);
  if (zero_eta) zero_eta_slice(d, 0);
  const auto r = triangular_rank_check(d.block, d.theta);
  emit({{"k", k},
        {"block", to_json(d.block)},
        {"rank", r.rank},
        {"full", r.full},
        {"min_singular_value", r.min_sv},
        {"max_singular_value", r.max_sv},
        {"det_survival", r.det_survival},
        {"det_factorized", r.det_factorized},
        {"det_identity_holds", r.det_identity_holds}},
       c.out.empty() ? "" : (fs::path(c.out) / "triangular_rank.json").string());
  return kOk;
}

int run_kruskal(const std::string& model_path, const CommonOpts& c) {
  const auto m = model_or(model_path, reference_model());
  const auto w = find_double_triangular(m.gamma());
  if (!w) throw PreconditionError("kruskal: the model graph is not double triangular");
  const auto theta = conditional_table(m).matrix();
  std::vector<int> s3 = w->rows3;
  const auto t1 = item_set_matrix(theta, w->rows1);
  const auto t2 = item_set_matrix(theta, w->rows2);
  const auto t3 = item_set_matrix(theta, s3);
  const int r = static_cast<int>(num_configs(m.latents()));
  const auto rep = kruskal_condition(t1, t2, t3, r);
  emit({{"split", {{"s1", one_based(w->rows1)}, {"s2", one_based(w->rows2)}, {"s3", one_based(s3)}}},
        {"r", r},
        {"kruskal_ranks", {rep.ranks[0], rep.ranks[1], rep.ranks[2]}},
        {"sum", rep.sum},
        {"required", rep.required},
        {"slack", rep.slack},
        {"holds", rep.holds}},
       c.out.empty() ? "" : (fs::path(c.out) / "kruskal.json").string());
  return rep.holds ? kOk : kNegative;
}

int run_identify_k(const std::string& model_path, const CommonOpts& c) {
  const auto m = model_or(model_path, reference_model());
  const auto r = estimate_k_population(m);
  emit({{"k", r.k}, {"margin_rank", r.rank}, {"witness", to_json(r.witness)}},
       c.out.empty() ? "" : (fs::path(c.out) / "identify_k.json").string());
  return kOk;
}

int run_recover_gamma(const std::string& model_path, bool monotone, const CommonOpts& c) {
  const auto m = model_or(model_path, monotone ? monotone_reference_model() : reference_model());
  const auto w = find_double_triangular(m.gamma());
  if (!w) throw PreconditionError("recover-gamma: the model graph is not double triangular");
  const auto sc = scramble(m, c.seed);
  const auto rec = recover_gamma_population(sc.tables, *w, m.latents());
  const auto aligned = rec.gamma.permute_cols(align_columns(rec.gamma, m.gamma()));
  json out{{"gamma_recovered", to_json(rec.gamma.entries())},
           {"tau", one_based(rec.tau)},
           {"matches_up_to_column_permutation", aligned == m.gamma()}};

  // Label c is compared with the hidden configuration of scrambled column c,
  // read through the latent order tau.
  auto labels_match = [&](const LabelResolution& lr, bool up_to_flips) {
    const int k = m.latents();
    for (int lat = 0; lat < k; ++lat) {
      std::optional<int> flip;
      for (std::size_t col = 0; col < lr.labels.size(); ++col) {
        const int got = config_bit(lr.labels[col], lat);
        const int want = config_bit(sc.hidden[col], rec.tau[static_cast<std::size_t>(lat)]);
        const int f = got ^ want;
        if (!flip) flip = f;
        if (f != *flip || (!up_to_flips && f != 0)) return false;
      }
    }
    return true;
  };
  try {
    if (monotone) {
      const auto lr = resolve_signs_monotone(sc.tables, *w);
      out["labels"] = lr.labels;
      out["labels_exact"] = labels_match(lr, false);
    } else {
      const auto lr = resolve_signs_subset(sc.tables, rec.gamma);
      out["labels"] = lr.labels;
      out["labels_match_up_to_sign_flips"] = labels_match(lr, true);
    }
  } catch (const SubsetViolation& e) {
    out["label_error"] = e.what();
  } catch (const MonotoneViolation& e) {
    out["label_error"] = e.what();
  }
  emit(out, c.out.empty() ? "" : (fs::path(c.out) / "recover_gamma.json").string());
  return kOk;
}

int run_counterexample_subset(const std::string& model_path, int k, int l, const CommonOpts& c) {
  const auto m = model_or(model_path, subset_example_model());
  const auto alt = subset_counterexample(m, k - 1, l - 1);
  double diff = 0.0;
  if (m.all_bernoulli() && m.items() <= 24) {
    const auto p = marginal_pmf(m), q = marginal_pmf(alt);
    for (std::size_t i = 0; i < p.size(); ++i) diff = std::max(diff, std::abs(p[i] - q[i]));
  }
  emit({{"pi", m.proportions().values()},
        {"pi_tilde", alt.proportions().values()},
        {"configuration_order", "h -> sum_k h_k 2^(k-1)"},
        {"max_abs_pmf_difference", diff},
        {"alternative", to_json(alt)}},
       c.out.empty() ? "" : (fs::path(c.out) / "counterexample_subset.json").string());
  return kOk;
}

int run_counterexample_degenerate(int k, double a, double b, const CommonOpts& c) {
  const auto d = degenerate_example(k, a, b);
  const auto p = marginal_pmf(d.model), q = marginal_pmf(d.relabeled);
  double diff = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) diff = std::max(diff, std::abs(p[i] - q[i]));
  emit({{"gamma", to_json(d.model.gamma().entries())},
        {"gamma_tilde", to_json(d.relabeled.gamma().entries())},
        {"relabel", d.relabel},
        {"max_abs_pmf_difference", diff}},
       c.out.empty() ? "" : (fs::path(c.out) / "counterexample_degenerate.json").string());
  return kOk;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const SchemaError*>(&e) || dynamic_cast<const IoError*>(&e) ||
      dynamic_cast<const ParamError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const PreconditionError*>(&e) || dynamic_cast<const UnsupportedItemKind*>(&e) ||
      dynamic_cast<const DegenerateInput*>(&e))
    return kInput;
  return kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary latent causal models: simulation, identifiability checks, estimation and experiments"};
  app.require_subcommand(1);
  CommonOpts common;
  bool seed_given = false;
  auto add_common = [&](CLI::App* sub, bool parallel) {
    sub->add_option("--seed", common.seed, "Random seed")->each([&](const std::string&) { seed_given = true; });
    sub->add_option("--out", common.out, "Output directory");
    if (parallel) sub->add_option("--parallelism", common.parallelism, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
  };
  std::function<int()> action;

  auto* sim = app.add_subcommand("simulate", "Draw a dataset from a simulation scenario");
  std::string scenario = "chain/DT";
  std::int64_t n = 1000;
  sim->add_option("--scenario", scenario, "<chain|collider|dependent>/<DT|dense|sparse>");
  sim->add_option("--n", n, "Sample size")->check(CLI::NonNegativeNumber);
  add_common(sim, false);
  sim->callback([&] { action = [&] { return run_simulate(scenario, n, common); }; });

  auto* chk = app.add_subcommand("check", "Check the identifiability conditions of a bipartite graph");
  std::string gamma_path;
  chk->add_option("gamma", gamma_path, "Graph CSV (header k1..kK, one 0/1 row per item)")->required();
  add_common(chk, false);
  chk->callback([&] { action = [&] { return run_check(gamma_path, common); }; });

  auto* ft = app.add_subcommand("fit", "Estimate the graphs from a dataset");
  std::string data_path, config, schema;
  std::optional<int> k;
  ft->add_option("data", data_path, "Dataset CSV")->required();
  ft->add_option("--k", k, "Number of latents (omitted: choose among 2, 3, 4 by BIC)")->check(CLI::Range(1, 10));
  ft->add_option("--config", config, "EM configuration JSON");
  ft->add_option("--schema", schema, "Column types, one letter per column: b binary, r real");
  add_common(ft, true);
  ft->callback([&] { action = [&] { return run_fit(data_path, k, config, schema, seed_given, common); }; });

  auto* ex = app.add_subcommand("experiment", "Replicated simulate-fit-score runs");
  std::vector<std::string> scenarios;
  std::vector<std::int64_t> ns;
  std::optional<int> reps;
  std::string init;
  ex->add_option("--config", config, "Experiment configuration JSON");
  ex->add_option("--scenario", scenarios, "Scenario (repeatable)");
  ex->add_option("--n", ns, "Sample size (repeatable)");
  ex->add_option("--reps", reps, "Replications per cell");
  ex->add_option("--init", init, "oracle or random")->check(CLI::IsMember({"oracle", "random"}));
  add_common(ex, true);
  ex->callback([&] { action = [&] { return run_experiment_cmd(config, scenarios, ns, reps, init, seed_given, common); }; });

  auto* orc = app.add_subcommand("oracle", "Population-level identification tools");
  orc->require_subcommand(1);
  std::string model_path;

  auto* bud = orc->add_subcommand("budget", "Parameter count versus observed equations");
  bud->add_option("gamma", gamma_path, "Graph CSV (default: the 4 x 3 gap example)");
  add_common(bud, false);
  bud->callback([&] { action = [&] { return run_budget(gamma_path, common); }; });

  auto* tri = orc->add_subcommand("triangular-rank", "Rank of P(X_1:K | H) for a random triangular draw");
  int tri_k = 3;
  bool zero_eta = false;
  tri->add_option("--k", tri_k, "Number of latents")->check(CLI::Range(1, 10));
  tri->add_flag("--zero-eta", zero_eta, "Make the last item blind to its latent on one slice");
  add_common(tri, false);
  tri->callback([&] { action = [&] { return run_triangular_rank(tri_k, zero_eta, common); }; });

  auto* kr = orc->add_subcommand("kruskal", "Kruskal condition on the witness split of a model");
  kr->add_option("--model", model_path, "Model JSON (default: reference model)");
  add_common(kr, false);
  kr->callback([&] { action = [&] { return run_kruskal(model_path, common); }; });

  auto* ik = orc->add_subcommand("identify-k", "Number of latents from the rank of an observed margin");
  ik->add_option("--model", model_path, "Model JSON (default: reference model)");
  add_common(ik, false);
  ik->callback([&] { action = [&] { return run_identify_k(model_path, common); }; });

  auto* rg = orc->add_subcommand("recover-gamma", "Recover the graph and labels from column-scrambled tables");
  bool monotone = false;
  rg->add_option("--model", model_path, "Model JSON (default: reference model)");
  rg->add_flag("--monotone", monotone, "Resolve labels by monotonicity (default model: monotone variant)");
  add_common(rg, false);
  rg->callback([&] { action = [&] { return run_recover_gamma(model_path, monotone, common); }; });

  auto* ce = orc->add_subcommand("counterexample", "Observationally equivalent alternative models");
  ce->require_subcommand(1);
  auto* ces = ce->add_subcommand("subset", "Swap construction for a dominated column");
  int dom = 1, sub = 2;
  ces->add_option("--model", model_path, "Bernoulli model JSON (default: K = 2, J = 6 example)");
  ces->add_option("--dominant", dom, "Dominating column (1-based)");
  ces->add_option("--dominated", sub, "Dominated column (1-based)");
  add_common(ces, false);
  ces->callback([&] { action = [&] { return run_counterexample_subset(model_path, dom, sub, common); }; });
  auto* ced = ce->add_subcommand("degenerate", "Parity model with two graphs for one pmf");
  int deg_k = 3;
  double a = 0.3, b = 0.7;
  ced->add_option("--k", deg_k, "Number of latents")->check(CLI::Range(2, 10));
  ced->add_option("--a", a, "Success probability at even parity");
  ced->add_option("--b", b, "Success probability at odd parity");
  add_common(ced, false);
  ced->callback([&] { action = [&] { return run_counterexample_degenerate(deg_k, a, b, common); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInput;
  }
  try {
    return action ? action() : kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify(e);
  }
}
