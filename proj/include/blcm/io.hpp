#pragma once

// CSV and JSON serialization for graphs, models, datasets, reports and fits.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "blcm/error.hpp"
#include "blcm/estimate.hpp"
#include "blcm/graph.hpp"
#include "blcm/model.hpp"
#include "blcm/oracle.hpp"
#include "blcm/simulate.hpp"

namespace blcm {

using json = nlohmann::ordered_json;

/// 17 significant digits, enough to round-trip a double.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
    out.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace detail

// ---- Bipartite graph CSV: header k1,...,kK then one 0/1 row per item. ----

inline BipartiteGraph read_gamma_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("graph CSV is empty");
  const auto header = detail::split_csv_line(line);
  const std::size_t k = header.size();
  if (k == 0 || header[0].empty()) throw ParseError("graph CSV header is empty", 1, 1);
  std::vector<std::vector<int>> rows;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != k) throw ParseError("expected " + std::to_string(k) + " cells", row_no, cells.size());
    std::vector<int> r;
    for (std::size_t c = 0; c < k; ++c) {
      if (cells[c] != "0" && cells[c] != "1") throw ParseError("graph entries must be 0 or 1, got '" + cells[c] + "'", row_no, c + 1);
      r.push_back(cells[c] == "1" ? 1 : 0);
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ParseError("graph CSV has no rows");
  return BipartiteGraph(BitMatrix::from_rows(rows));
}

inline BipartiteGraph read_gamma_csv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_gamma_csv(in);
}

inline void write_gamma_csv(std::ostream& out, const BipartiteGraph& g) {
  for (int k = 0; k < g.latents(); ++k) out << (k ? "," : "") << "k" << (k + 1);
  out << '\n';
  for (int j = 0; j < g.items(); ++j) {
    for (int k = 0; k < g.latents(); ++k) out << (k ? "," : "") << g(j, k);
    out << '\n';
  }
}

inline std::string gamma_csv(const BipartiteGraph& g) {
  std::ostringstream s;
  write_gamma_csv(s, g);
  return s.str();
}

// ---- Dataset CSV: header x1,...,xJ; binary as 0/1, real with 17 significant digits. ----

inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  for (int j = 0; j < d.items(); ++j) out << (j ? "," : "") << d.names[static_cast<std::size_t>(j)];
  out << '\n';
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    for (int j = 0; j < d.items(); ++j) {
      if (j) out << ',';
      if (d.columns[static_cast<std::size_t>(j)] == Dataset::Column::Binary)
        out << (d.values(i, j) != 0.0 ? '1' : '0');
      else
        out << format_real(d.values(i, j));
    }
    out << '\n';
  }
}

inline void write_dataset_csv(const std::filesystem::path& path, const Dataset& d) {
  auto out = detail::open_output(path);
  write_dataset_csv(out, d);
}

/// Column types: given schema, or inferred (binary when every value is 0 or 1).
/// Missing values are rejected.
inline Dataset load_dataset(std::istream& in, const std::optional<std::vector<Dataset::Column>>& schema = std::nullopt) {
  std::string line;
  if (!std::getline(in, line) || line.empty() || line == "\r") throw ParseError("dataset CSV is empty");
  Dataset d;
  d.names = detail::split_csv_line(line);
  const std::size_t j = d.names.size();
  for (std::size_t c = 0; c < j; ++c)
    if (d.names[c].empty()) throw ParseError("empty column name", 1, c + 1);
  if (schema && schema->size() != j)
    throw SchemaError("schema lists " + std::to_string(schema->size()) + " columns, file has " + std::to_string(j));

  std::vector<double> values;
  std::size_t row_no = 1, n = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != j) throw ParseError("expected " + std::to_string(j) + " cells, found " + std::to_string(cells.size()), row_no, std::min(cells.size(), j) + 1);
    for (std::size_t c = 0; c < j; ++c) {
      const auto v = detail::parse_double(cells[c]);
      if (!v) throw ParseError("not a finite number: '" + cells[c] + "'", row_no, c + 1);
      if (schema && (*schema)[c] == Dataset::Column::Binary && *v != 0.0 && *v != 1.0)
        throw SchemaError("binary column '" + d.names[c] + "' holds " + cells[c] + " (row " + std::to_string(row_no) + ")");
      values.push_back(*v);
    }
    ++n;
  }
  d.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < j; ++c) d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = values[i * j + c];
  if (schema) {
    d.columns = *schema;
  } else {
    for (std::size_t c = 0; c < j; ++c) {
      const auto col = d.values.col(static_cast<Eigen::Index>(c));
      const bool binary = (col.array() == 0.0 || col.array() == 1.0).all();
      d.columns.push_back(binary ? Dataset::Column::Binary : Dataset::Column::Real);
    }
  }
  return d;
}

inline Dataset load_dataset(const std::filesystem::path& path, const std::optional<std::vector<Dataset::Column>>& schema = std::nullopt) {
  auto in = detail::open_input(path);
  return load_dataset(in, schema);
}

/// Schema string: one letter per column, 'b' binary or 'r' real.
inline std::vector<Dataset::Column> parse_schema(std::string_view s) {
  std::vector<Dataset::Column> out;
  for (char c : s) {
    if (c == 'b' || c == 'B') out.push_back(Dataset::Column::Binary);
    else if (c == 'r' || c == 'R') out.push_back(Dataset::Column::Real);
    else if (c != ',' && c != ' ') throw SchemaError(std::string("schema letters must be 'b' or 'r', got '") + c + "'");
  }
  return out;
}

// ---- JSON ----

inline json to_json(const BitMatrix& m) { return m.to_rows(); }

inline json to_json(const Cpdag& c) {
  json d = json::array(), u = json::array();
  for (auto [a, b] : c.directed()) d.push_back({a + 1, b + 1});
  for (auto [a, b] : c.undirected()) u.push_back({a + 1, b + 1});
  return {{"nodes", c.nodes()}, {"directed", d}, {"undirected", u}};
}

inline std::string cpdag_edge_list(const Cpdag& c) {
  std::ostringstream s;
  s << "from,to,type\n";
  for (auto [a, b] : c.directed()) s << "H" << a + 1 << ",H" << b + 1 << ",directed\n";
  for (auto [a, b] : c.undirected()) s << "H" << a + 1 << ",H" << b + 1 << ",undirected\n";
  return s.str();
}

inline json to_json(const Blcm& m) {
  json items = json::array();
  for (const auto& it : m.item_list()) items.push_back({{"kind", std::string(to_string(it.kind))}, {"mu", it.mu}});
  return {{"gamma", to_json(m.gamma().entries())},
          {"lambda", to_json(m.lambda().adjacency())},
          {"proportions", m.proportions().values()},
          {"items", items}};
}

inline Blcm blcm_from_json(const json& j) {
  try {
    const auto g = BipartiteGraph(BitMatrix::from_rows(j.at("gamma").get<std::vector<std::vector<int>>>()));
    const auto lam = LatentDag(BitMatrix::from_rows(j.at("lambda").get<std::vector<std::vector<int>>>()));
    LatentProportions pi(j.at("proportions").get<std::vector<double>>());
    std::vector<ItemDistribution> items;
    for (const auto& it : j.at("items"))
      items.push_back({item_kind_from_string(it.at("kind").get<std::string>()), it.at("mu").get<std::vector<double>>()});
    return Blcm(g, lam, std::move(pi), std::move(items));
  } catch (const json::exception& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
}

inline json to_json(const TriangularWitness& w) {
  auto one_based = [](const std::vector<int>& v) {
    std::vector<int> o;
    for (int x : v) o.push_back(x + 1);
    return o;
  };
  return {{"rows1", one_based(w.rows1)}, {"cols1", one_based(w.cols1)}, {"rows2", one_based(w.rows2)},
          {"cols2", one_based(w.cols2)}, {"rows3", one_based(w.rows3)}};
}

inline json to_json(const IdentifiabilityReport& r) {
  json j;
  j["double_triangular"] = r.double_triangular;
  j["witness"] = r.witness ? to_json(*r.witness) : json(nullptr);
  j["gamma3_columns_nonempty"] = r.gamma3_columns_nonempty;
  j["gamma3_columns_nonempty_all_witnesses"] = r.gamma3_nonempty_all_witnesses;
  j["witnesses_examined"] = r.witnesses_examined;
  j["witness_enumeration_truncated"] = r.witness_enumeration_truncated;
  j["subset_condition"] = r.subset.holds;
  j["subset_violation"] =
      r.subset.violation ? json::array({r.subset.violation->first + 1, r.subset.violation->second + 1}) : json(nullptr);
  j["three_children"] = r.three_children.holds;
  std::vector<int> deficient;
  for (int k : r.three_children.deficient) deficient.push_back(k + 1);
  j["deficient_columns"] = deficient;
  j["sufficient"] = r.sufficient;
  j["necessary_violated"] = r.necessary_violated;
  return j;
}

inline json to_json(const EmConfig& c) {
  return {{"lambda2_grid", c.lambda2_grid}, {"tau_grid", c.tau_grid}, {"eps_gamma", c.eps_gamma},
          {"n_pseudo", c.n_pseudo},         {"max_iters", c.max_iters}, {"tol_pi", c.tol_pi},
          {"init_blend", {c.w_ref, c.w_noise}}, {"restarts", c.restarts}, {"refine_iters", c.refine_iters},
          {"refine_tol_pi", c.refine_tol_pi}, {"cd_max_iters", c.cd_max_iters},
          {"cd_tol", c.cd_tol},             {"seed", c.seed}};
}

/// Fields absent from the JSON keep their defaults.
inline EmConfig em_config_from_json(const json& j, EmConfig c = {}) {
  try {
    if (j.contains("lambda2_grid")) c.lambda2_grid = j.at("lambda2_grid").get<std::vector<double>>();
    if (j.contains("tau_grid")) c.tau_grid = j.at("tau_grid").get<std::vector<double>>();
    if (j.contains("eps_gamma")) c.eps_gamma = j.at("eps_gamma").get<double>();
    if (j.contains("n_pseudo")) c.n_pseudo = j.at("n_pseudo").get<int>();
    if (j.contains("max_iters")) c.max_iters = j.at("max_iters").get<int>();
    if (j.contains("tol_pi")) c.tol_pi = j.at("tol_pi").get<double>();
    if (j.contains("init_blend")) {
      const auto b = j.at("init_blend").get<std::vector<double>>();
      if (b.size() != 2) throw ParamError("init_blend must have two weights");
      c.w_ref = b[0];
      c.w_noise = b[1];
    }
    if (j.contains("restarts")) c.restarts = j.at("restarts").get<int>();
    if (j.contains("refine_iters")) c.refine_iters = j.at("refine_iters").get<int>();
    if (j.contains("refine_tol_pi")) c.refine_tol_pi = j.at("refine_tol_pi").get<double>();
    if (j.contains("cd_max_iters")) c.cd_max_iters = j.at("cd_max_iters").get<int>();
    if (j.contains("cd_tol")) c.cd_tol = j.at("cd_tol").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

inline json to_json(const FitResult& f) {
  json grid = json::array();
  for (const auto& g : f.grid)
    grid.push_back({{"lambda2", g.lambda2}, {"tau", g.tau}, {"loglik", g.loglik}, {"penalty", g.penalty}, {"df", g.df},
                    {"bic", g.bic}, {"iters", g.iters}, {"converged", g.converged}});
  std::vector<std::vector<double>> theta;
  for (int j = 0; j < f.theta_hat.items(); ++j) {
    std::vector<double> row;
    for (Config h = 0; h < num_configs(f.k); ++h) row.push_back(f.theta_hat(j, h));
    theta.push_back(std::move(row));
  }
  return {{"k", f.k},
          {"pi_hat", f.pi_hat.values()},
          {"theta_hat", theta},
          {"gamma_hat", to_json(f.gamma_hat.entries())},
          {"lambda_hat", to_json(f.lambda_hat)},
          {"loglik", f.loglik},
          {"bic", f.bic},
          {"df", f.df},
          {"penalty_value", f.penalty_value},
          {"iters_used", f.iters_used},
          {"converged", f.converged},
          {"selected_tuning", {{"lambda2", f.lambda2}, {"tau", f.tau}}},
          {"grid", grid},
          {"warnings", f.warnings}};
}

inline std::string theta_csv(const CondTable& t) {
  std::ostringstream s;
  s << "item";
  for (Config h = 0; h < num_configs(t.latents()); ++h) {
    s << ",h";
    for (int k = 0; k < t.latents(); ++k) s << config_bit(h, k);
  }
  s << '\n';
  for (int j = 0; j < t.items(); ++j) {
    s << "x" << j + 1;
    for (Config h = 0; h < num_configs(t.latents()); ++h) s << ',' << format_real(t(j, h));
    s << '\n';
  }
  return s.str();
}

/// Scenario manifest: the generated model plus how the graph variant altered
/// the base location table.
inline json scenario_manifest(const ScenarioSpec& spec) {
  const auto model = build_scenario(spec);
  const auto dt = scenario_gamma(GammaKind::DT);
  const auto tables = scenario_mu_tables(spec);
  json changes = json::array();
  for (int j = 0; j < 8; ++j)
    for (int k = 0; k < 3; ++k)
      if (model.gamma()(j, k) != dt(j, k))
        changes.push_back({{"item", j + 1},
                           {"latent", k + 1},
                           {"change", model.gamma()(j, k) ? "edge added" : "edge removed"},
                           {"rule", model.gamma()(j, k) ? "each old level split into two adjacent levels evenly spaced over the old range"
                                                        : "location averaged over the dropped latent given the remaining parents"}});
  json full = json::array();
  for (const auto& t : tables) full.push_back(t);
  return {{"scenario", spec.name()},
          {"n", spec.n},
          {"seed", spec.seed},
          {"configuration_order", "h -> sum_k h_k 2^(k-1)"},
          {"rng", "mt19937_64 per stream, seeded by std::seed_seq{seed_lo, seed_hi, stream_lo, stream_hi}; stream 0 latent, stream j item j"},
          {"model", to_json(model)},
          {"mu_full", full},
          {"modifications", changes}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = detail::open_output(path);
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace blcm
