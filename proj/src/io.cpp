#include "gtvlds/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

#include "gtvlds/error.hpp"

namespace gtvlds {

namespace fs = std::filesystem;

namespace {

json matrix_rows(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_rows(const json& j, int d, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != d) throw DataError(what + ": expected " + std::to_string(d) + " rows");
  Eigen::MatrixXd M(d, d);
  for (int i = 0; i < d; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != d)
      throw DataError(what + ": expected " + std::to_string(d) + " columns");
    for (int k = 0; k < d; ++k) M(i, k) = j[i][k].get<double>();
  }
  return M;
}

// JSON has no NaN/inf; write them as strings so files stay valid.
json num(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

template <class F>
auto with_source(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  } catch (const UsageError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json to_json(const Graph& g) {
  json j;
  j["m"] = g.num_nodes();
  j["kind"] = to_string(g.kind());
  json edges = json::array();
  for (const auto& e : g.edges()) edges.push_back({e.u + 1, e.v + 1});
  j["edges"] = std::move(edges);
  if (g.seed) j["seed"] = *g.seed;
  if (g.kind() == GraphKind::grid2d) {
    j["nx"] = g.grid_nx;
    j["ny"] = g.grid_ny;
  }
  if (g.kind() == GraphKind::erdos_renyi) j["p"] = g.er_p;
  if (g.kind() == GraphKind::knn) j["k"] = g.knn_k;
  return j;
}

Graph graph_from_json(const json& j) {
  const int m = j.at("m").get<int>();
  if (m < 1) throw DataError("graph must have at least one node");
  const GraphKind kind = j.contains("kind") ? graph_kind_from_string(j["kind"].get<std::string>()) : GraphKind::custom;
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw DataError("edge entries must be [u, v] pairs");
    const int u = e[0].get<int>(), v = e[1].get<int>();
    if (u < 1 || u > m || v < 1 || v > m)
      throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) + ") out of range 1.." + std::to_string(m));
    edges.push_back({u - 1, v - 1});
  }
  Graph g(m, std::move(edges), kind);
  if (j.contains("seed")) g.seed = j["seed"].get<std::uint64_t>();
  g.grid_nx = j.value("nx", 0);
  g.grid_ny = j.value("ny", 0);
  g.er_p = j.value("p", 0.0);
  g.knn_k = j.value("k", 0);
  return g;
}

Graph load_graph(const std::string& path) {
  const json j = parse_json_file(path);
  return with_source(path, [&] { return graph_from_json(j); });
}

json to_json(const SystemEnsemble& e) {
  json j;
  j["d"] = e.d;
  j["template"] = e.template_tag;
  j["beta_field"] = e.beta_field.empty() ? json(nullptr) : json(e.beta_field);
  json mats = json::array();
  for (const auto& A : e.matrices) mats.push_back(matrix_rows(A));
  j["matrices"] = std::move(mats);
  return j;
}

SystemEnsemble ensemble_from_json(const json& j) {
  SystemEnsemble e;
  e.d = j.at("d").get<int>();
  if (e.d < 1) throw DataError("ensemble dimension must be >= 1");
  e.template_tag = j.value("template", std::string("custom"));
  if (j.contains("beta_field") && !j["beta_field"].is_null()) e.beta_field = j["beta_field"].get<std::vector<double>>();
  for (const auto& M : j.at("matrices")) e.matrices.push_back(matrix_from_rows(M, e.d, "ensemble matrix"));
  if (e.matrices.empty()) throw DataError("ensemble has no matrices");
  if (!e.beta_field.empty() && e.beta_field.size() != e.matrices.size())
    throw DataError("beta_field length differs from number of matrices");
  return e;
}

SystemEnsemble load_ensemble(const std::string& path) {
  const json j = parse_json_file(path);
  return with_source(path, [&] { return ensemble_from_json(j); });
}

json to_json(const FitResult& fit) {
  json j;
  j["method"] = fit.method;
  j["m"] = fit.m;
  j["d"] = fit.d;
  j["lambda"] = num(fit.lambda);
  json mats = json::array();
  for (int l = 0; l < fit.m; ++l) mats.push_back(matrix_rows(fit.A(l)));
  j["a_hat"] = std::move(mats);
  j["objective"] = num(fit.objective);
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["kkt_gap"] = num(fit.kkt_gap);
  j["primal_residual"] = num(fit.primal_residual);
  j["dual_residual"] = num(fit.dual_residual);
  j["flags"] = fit.flags;
  return j;
}

namespace {
double num_from(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw DataError("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}
}  // namespace

FitResult fit_from_json(const json& j) {
  FitResult f;
  f.method = j.at("method").get<std::string>();
  f.m = j.at("m").get<int>();
  f.d = j.at("d").get<int>();
  f.lambda = num_from(j.at("lambda"));
  const auto& mats = j.at("a_hat");
  if (static_cast<int>(mats.size()) != f.m) throw DataError("a_hat has wrong number of nodes");
  const int b = f.d * f.d;
  f.a_hat.resize(static_cast<Eigen::Index>(f.m) * b);
  for (int l = 0; l < f.m; ++l) {
    const Eigen::MatrixXd A = matrix_from_rows(mats[l], f.d, "a_hat");
    f.a_hat.segment(static_cast<Eigen::Index>(l) * b, b) = Eigen::Map<const Eigen::VectorXd>(A.data(), b);
  }
  f.objective = num_from(j.value("objective", json(0.0)));
  f.iterations = j.value("iterations", 0);
  f.converged = j.value("converged", true);
  f.kkt_gap = num_from(j.value("kkt_gap", json(0.0)));
  f.flags = j.value("flags", std::vector<std::string>{});
  return f;
}

json to_json(const PathResult& path) {
  json j;
  json lambdas = json::array(), metric = json::array(), fits = json::array();
  for (double x : path.lambdas) lambdas.push_back(num(x));
  for (double x : path.selection_metric) metric.push_back(num(x));
  for (const auto& f : path.fits) {
    json s;
    s["lambda"] = num(f.lambda);
    s["objective"] = num(f.objective);
    s["iterations"] = f.iterations;
    s["kkt_gap"] = num(f.kkt_gap);
    s["flags"] = f.flags;
    fits.push_back(std::move(s));
  }
  j["lambdas"] = std::move(lambdas);
  j["validation_mse"] = std::move(metric);
  j["selected_index"] = path.selected_index;
  j["fits"] = std::move(fits);
  if (!path.fits.empty()) j["selected"] = to_json(path.selected());
  return j;
}

json to_json(const TheoryReport& r) {
  json j;
  const auto& in = r.inputs;
  j["inputs"] = {{"T", in.T},
                 {"delta", in.delta},
                 {"v", in.v},
                 {"rho_max", in.rho_max},
                 {"regime", to_string(in.regime)},
                 {"constants",
                  {{"c_zeta1", in.constants.c_zeta1},
                   {"c_zeta2", in.constants.c_zeta2},
                   {"c_F2", in.constants.c_F2},
                   {"C_F3", in.constants.C_F3},
                   {"c_theorem", in.constants.c_theorem},
                   {"C_sample", in.constants.C_sample},
                   {"c_lambda", in.constants.c_lambda}}}};
  j["m"] = r.m;
  j["d"] = r.d;
  j["num_edges"] = r.num_edges;
  j["fiedler"] = num(r.fiedler);
  j["scaling"] = {{"mu", num(r.scaling.mu)},
                  {"mu_prime", num(r.scaling.mu_prime)},
                  {"fiedler_bound_mu", num(r.scaling.fiedler_bound_mu)},
                  {"fiedler_bound_mu_prime", num(r.scaling.fiedler_bound_mu_prime)}};
  j["S"] = {{"regime", to_string(r.S.regime)},
            {"size", r.S.size},
            {"kappa", num(r.S.kappa)},
            {"kappa_exact", r.S.kappa_exact},
            {"kappa_lower_bound", num(r.S.kappa_lower_bound)},
            {"tail_norm", num(r.S.tail_norm)}};
  j["compat_lower_bound"] = num(r.compat_lower_bound);
  j["delta_G"] = num(r.delta_G);
  j["beta"] = num(r.beta);
  j["trace_sum"] = num(r.trace_sum);
  j["max_diag_G"] = num(r.max_diag_G);
  j["ensemble_max_norm"] = num(r.ensemble_max_norm);
  j["stability_ok"] = r.stability_ok;
  j["terms"] = {{"zeta1", num(r.terms.zeta1)}, {"zeta2", num(r.terms.zeta2)}, {"F1", num(r.terms.F1)},
                {"F2", num(r.terms.F2)},       {"F3", num(r.terms.F3)},       {"G3", num(r.terms.G3)},
                {"Phi_S", num(r.terms.Phi_S)}};
  j["lambda"] = num(r.lambda);
  j["lambda_required"] = num(r.lambda_required);
  j["M"] = num(r.M);
  json conds = json::array();
  for (const auto& c : r.conditions)
    conds.push_back({{"name", c.name}, {"lhs", num(c.lhs)}, {"rhs", num(c.rhs)}, {"pass", c.pass}, {"margin", num(c.margin)}});
  j["conditions"] = std::move(conds);
  j["error_bound"] = {{"rhs", num(r.bound.rhs)}, {"per_node", num(r.bound.per_node)}};
  return j;
}

void write_panel_csv(std::ostream& out, const TrajectoryPanel& p) {
  out << "node,t";
  for (int i = 1; i <= p.d; ++i) out << ",x" << i;
  out << '\n';
  for (int l = 0; l < p.m; ++l)
    for (int t = 0; t <= p.T_total; ++t) {
      out << l + 1 << ',' << t;
      for (int i = 0; i < p.d; ++i) out << ',' << format_double(p.states[l](i, t));
      out << '\n';
    }
}

TrajectoryPanel read_panel_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty panel file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 3 || header[0] != "node" || header[1] != "t")
    throw DataError(source + ": panel header must be node,t,x1..xd");
  const int d = static_cast<int>(header.size()) - 2;
  for (int i = 0; i < d; ++i)
    if (header[2 + i] != "x" + std::to_string(i + 1)) throw DataError(source + ": unexpected column '" + header[2 + i] + "'");

  std::map<int, std::map<int, Eigen::VectorXd>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) != d + 2) throw DataError(where + ": wrong number of fields");
    int node = 0, t = 0;
    Eigen::VectorXd x(d);
    try {
      node = std::stoi(cells[0]);
      t = std::stoi(cells[1]);
      for (int i = 0; i < d; ++i) x(i) = std::stod(cells[2 + i]);
    } catch (const std::exception&) {
      throw DataError(where + ": malformed number");
    }
    if (node < 1 || t < 0) throw DataError(where + ": node must be >= 1 and t >= 0");
    if (!x.allFinite()) throw DataError(where + ": non-finite state");
    if (!rows[node].emplace(t, x).second) throw DataError(where + ": duplicate (node, t)");
  }
  if (rows.empty()) throw DataError(source + ": panel has no rows");
  TrajectoryPanel p;
  p.d = d;
  p.m = static_cast<int>(rows.size());
  if (rows.rbegin()->first != p.m) throw DataError(source + ": node ids must be 1..m without gaps");
  p.T_total = static_cast<int>(rows.begin()->second.size()) - 1;
  for (const auto& [node, series] : rows) {
    if (static_cast<int>(series.size()) != p.T_total + 1 || series.rbegin()->first != p.T_total)
      throw DataError(source + ": node " + std::to_string(node) + " does not cover t = 0.." + std::to_string(p.T_total));
    Eigen::MatrixXd X(d, p.T_total + 1);
    for (const auto& [t, x] : series) X.col(t) = x;
    p.states.push_back(std::move(X));
  }
  return p;
}

TrajectoryPanel load_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_panel_csv(in, path);
}

void write_coords_csv(std::ostream& out, const StationTable& t) {
  out << "node,station_id,lat,lon\n";
  for (int s = 0; s < t.num_stations(); ++s)
    out << s + 1 << ',' << t.stations[s].id << ',' << format_double(t.stations[s].lat) << ','
        << format_double(t.stations[s].lon) << '\n';
}

namespace {
std::string join_flags(const std::vector<std::string>& flags) {
  std::string s;
  for (size_t i = 0; i < flags.size(); ++i) s += (i ? ";" : "") + flags[i];
  return s;
}
}  // namespace

void write_results_csv(std::ostream& out, const std::vector<MetricRow>& rows, const SweepLabels& labels) {
  out << "sweep_axis,sweep_value,topology,field,method,seed,param_mse,pred_mse,selected_lambda,n_iter,wall_ms,flags\n";
  for (const auto& r : rows)
    out << labels.axis << ',' << format_double(r.sweep_value) << ',' << labels.topology << ',' << labels.field << ','
        << r.method << ',' << r.seed << ',' << format_double(r.param_mse) << ',' << format_double(r.pred_mse) << ','
        << format_double(r.selected_lambda) << ',' << r.n_iter << ',' << format_double(r.wall_ms) << ','
        << join_flags(r.flags) << '\n';
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "sweep_value,method,mean_param_mse,ci95_param,mean_pred_mse,ci95_pred,n_ok\n";
  for (const auto& r : rows)
    out << format_double(r.sweep_value) << ',' << r.method << ',' << format_double(r.mean_param_mse) << ','
        << format_double(r.ci95_param) << ',' << format_double(r.mean_pred_mse) << ',' << format_double(r.ci95_pred)
        << ',' << r.n_ok << '\n';
}

void atomic_write(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot move " + tmp.string() + " to " + path + ": " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {
std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_list(std::string s) {
  s = strip(s);
  if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(strip(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}
}  // namespace

Config Config::parse(std::istream& in, const std::string& source) {
  Config c;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = strip(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(source + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = strip(line.substr(0, eq));
    if (key.empty()) throw UsageError(source + ":" + std::to_string(line_no) + ": empty key");
    c.set(section.empty() ? key : section + "." + key, unquote(strip(line.substr(eq + 1))));
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  return parse(in, path);
}

std::optional<std::string> Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

int Config::get_int(const std::string& key, int fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  int x = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), x);
  if (res.ec != std::errc{} || res.ptr != v->data() + v->size())
    throw UsageError("config key " + key + ": expected an integer, got '" + *v + "'");
  return x;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::uint64_t x = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), x);
  if (res.ec != std::errc{} || res.ptr != v->data() + v->size())
    throw UsageError("config key " + key + ": expected a non-negative integer, got '" + *v + "'");
  return x;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  double x = 0;
  const auto res = std::from_chars(v->data(), v->data() + v->size(), x);
  if (res.ec != std::errc{} || res.ptr != v->data() + v->size())
    throw UsageError("config key " + key + ": expected a number, got '" + *v + "'");
  return x;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw UsageError("config key " + key + ": expected true/false, got '" + *v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key, std::vector<double> fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v)) {
    double x = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), x);
    if (res.ec != std::errc{} || res.ptr != item.data() + item.size())
      throw UsageError("config key " + key + ": bad list entry '" + item + "'");
    out.push_back(x);
  }
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key, std::vector<std::string> fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  return split_list(*v);
}

void Config::check_known(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_)
    if (!known.count(key)) throw UsageError("unknown config key '" + key + "'");
}

json Config::to_json() const {
  json j = json::object();
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

json run_metadata(const std::string& command, const Config& cfg) {
  json j;
  j["tool"] = "gtvlds";
  j["version"] = GTVLDS_VERSION;
  j["command"] = command;
  j["config"] = cfg.to_json();
  return j;
}

}  // namespace gtvlds
