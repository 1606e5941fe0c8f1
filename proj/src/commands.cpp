#include "gtvlds/commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "gtvlds/error.hpp"

namespace gtvlds {

namespace fs = std::filesystem;

namespace {

// Reads typed parameters from a Config and remembers every value actually
// used, so the resolved configuration (defaults included) can be written out.
class Params {
 public:
  explicit Params(const Config& src) : src_(src) {}

  std::string str(const std::string& key, const std::string& def) { return record(key, src_.get(key, def)); }
  std::optional<std::string> opt_str(const std::string& key) {
    auto v = src_.get(key);
    if (v) record(key, *v);
    return v;
  }
  int i(const std::string& key, int def) {
    const int v = src_.get_int(key, def);
    record(key, std::to_string(v));
    return v;
  }
  std::uint64_t u64(const std::string& key, std::uint64_t def) {
    const auto v = src_.get_u64(key, def);
    record(key, std::to_string(v));
    return v;
  }
  double f(const std::string& key, double def) {
    const double v = src_.get_double(key, def);
    record(key, format_double(v));
    return v;
  }
  std::optional<double> opt_f(const std::string& key) {
    if (!src_.has(key)) return std::nullopt;
    return f(key, 0.0);
  }
  bool b(const std::string& key, bool def) {
    const bool v = src_.get_bool(key, def);
    record(key, v ? "true" : "false");
    return v;
  }
  std::vector<double> doubles(const std::string& key, const std::vector<double>& def) {
    auto v = src_.get_doubles(key, def);
    std::string s;
    for (size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + format_double(v[k]);
    record(key, s);
    return v;
  }
  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& def) {
    auto v = src_.get_strings(key, def);
    std::string s;
    for (size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + v[k];
    record(key, s);
    return v;
  }

  // Rejects keys the command never asked for (typos would otherwise be silent).
  void finish() const {
    for (const auto& [key, value] : src_.values())
      if (!resolved_.has(key)) throw UsageError("unknown config key '" + key + "' for this command");
  }
  const Config& resolved() const { return resolved_; }

 private:
  std::string record(const std::string& key, const std::string& v) {
    resolved_.set(key, v);
    return v;
  }
  const Config& src_;
  Config resolved_;
};

std::string out_path(const RunOptions& o, const std::string& name) { return (fs::path(o.out_dir) / name).string(); }

void write_json(const std::string& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

void write_metadata(const RunOptions& o, const std::string& command, const Params& p, json extra = json::object()) {
  json meta = run_metadata(command, p.resolved());
  for (auto& [k, v] : extra.items()) meta[k] = v;
  write_json(out_path(o, "metadata.json"), meta);
}

SolverOptions read_solver(Params& p) {
  SolverOptions s;
  s.rho = p.f("solver.rho", s.rho);
  s.max_iter = p.i("solver.max_iter", s.max_iter);
  s.tol_primal = p.f("solver.tol_primal", s.tol_primal);
  s.tol_dual = p.f("solver.tol_dual", s.tol_dual);
  s.kkt_tol = p.f("solver.kkt_tol", s.kkt_tol);
  s.polish = p.b("solver.polish", s.polish);
  if (s.rho <= 0 || s.max_iter < 1 || s.tol_primal <= 0 || s.tol_dual <= 0 || s.kkt_tol <= 0) throw UsageError("invalid solver options");
  return s;
}

Graph read_graph(Params& p, std::uint64_t seed, const std::string& default_topology, int default_m) {
  if (auto file = p.opt_str("graph.file")) return load_graph(*file);
  const GraphKind kind = graph_kind_from_string(p.str("graph.topology", default_topology));
  GraphSpec spec;
  spec.kind = kind;
  spec.m = p.i("graph.m", default_m);
  switch (kind) {
    case GraphKind::grid2d: {
      int nx = static_cast<int>(std::lround(std::sqrt(static_cast<double>(spec.m))));
      spec.nx = p.i("graph.nx", nx);
      spec.ny = p.i("graph.ny", spec.nx > 0 ? spec.m / spec.nx : 0);
      break;
    }
    case GraphKind::star: spec.hub = p.i("graph.hub", 1) - 1; break;
    case GraphKind::erdos_renyi: {
      spec.p = p.f("graph.p", 0.1);
      auto [g, extra] = connected_erdos_renyi(spec.m, spec.p, p.u64("graph.seed", seed));
      if (!g.is_connected()) throw DataError("Erdos-Renyi graph still disconnected after resampling");
      (void)extra;
      return std::move(g);
    }
    default: break;
  }
  return build_graph(spec);
}

FieldSpec read_field(Params& p) {
  FieldSpec f;
  f.kind = field_kind_from_string(p.str("field.kind", "piecewise"));
  f.s = p.f("field.s", 1.0);
  f.omega = p.f("field.omega", 0.5);
  f.target_jump = p.opt_f("field.jump");
  return f;
}

SystemEnsemble read_ensemble(Params& p, const Graph& g, std::uint64_t seed) {
  if (auto file = p.opt_str("ensemble.file")) {
    SystemEnsemble e = load_ensemble(*file);
    if (e.num_nodes() != g.num_nodes()) throw DataError(*file + ": ensemble size differs from graph size");
    return e;
  }
  SystemEnsemble e = gen_ground_truth(g, read_field(p), seed);
  if (auto a22 = p.opt_f("field.a22")) {
    for (auto& A : e.matrices) A(1, 1) = *a22;
    e.template_tag += "_a22=" + format_double(*a22);
  }
  return e;
}

void cmd_simulate(const Config& cfg, const RunOptions& o, std::ostream& log) {
  Params p(cfg);
  const std::uint64_t seed = p.u64("seed", 1);
  const Graph g = read_graph(p, seed, "path", 64);
  const SystemEnsemble e = read_ensemble(p, g, seed);
  const int T = p.i("sim.T", SplitSpec{}.offset + SplitSpec{}.total());
  p.finish();
  if (T < 1) throw UsageError("sim.T must be >= 1");
  const TrajectoryPanel panel = simulate_panel(e, T, seed);

  std::ostringstream csv;
  write_panel_csv(csv, panel);
  atomic_write(out_path(o, "panel.csv"), csv.str());
  write_json(out_path(o, "ensemble.json"), to_json(e));
  write_json(out_path(o, "graph.json"), to_json(g));
  write_metadata(o, "simulate", p, {{"noise_generator", kNoiseGenerator}});
  log << "simulated m=" << panel.m << " d=" << panel.d << " T=" << panel.T_total << " -> " << o.out_dir << "\n";
}

void check_strict(const RunOptions& o, const FitResult& f) {
  if (o.strict && !f.converged) throw SolverError(f.method + " fit did not converge (lambda " + format_double(f.lambda) + ")");
}

void cmd_fit(const Config& cfg, const RunOptions& o, std::ostream& log) {
  Params p(cfg);
  const std::string panel_path = p.str("fit.panel", "");
  if (panel_path.empty()) throw UsageError("fit needs fit.panel");
  const std::string method = p.str("fit.method", "graph_tv");
  const bool needs_graph = method == "graph_tv" || method == "laplacian";
  if (!needs_graph && method != "ols_ind" && method != "ols_pooled" && method != "group_lasso")
    throw UsageError("unknown method '" + method + "'");
  std::optional<Graph> g;
  if (auto gf = p.opt_str("fit.graph")) g = load_graph(*gf);
  const auto lambda = p.opt_f("fit.lambda");
  const int grid_size = p.i("fit.grid_size", kDefaultGridSize);
  SplitSpec split;
  split.T_train = p.i("split.T_train", split.T_train);
  split.T_val = p.i("split.T_val", split.T_val);
  split.T_test = p.i("split.T_test", split.T_test);
  split.buffer = p.i("split.buffer", split.buffer);
  split.offset = p.i("split.offset", split.offset);
  const int t_start = p.i("fit.t_start", 0);
  const auto t_end_opt = p.opt_str("fit.t_end");
  const SolverOptions solver = read_solver(p);
  p.finish();

  if (needs_graph && !g) throw UsageError(method + " needs fit.graph");
  if (grid_size < 2 || grid_size > kMaxGridSize) throw UsageError("fit.grid_size must lie in [2, 200]");
  const TrajectoryPanel panel = load_panel(panel_path);
  if (g && g->num_nodes() != panel.m) throw DataError("graph has " + std::to_string(g->num_nodes()) +
                                                      " nodes but the panel has " + std::to_string(panel.m));

  const bool penalized = method == "graph_tv" || method == "laplacian" || method == "group_lasso";
  json meta_extra = json::object();
  if (!penalized || lambda) {
    const int t_end = t_end_opt ? std::stoi(*t_end_opt) : panel.T_total;
    const DesignSystem ds = build_design(panel, t_start, t_end);
    FitResult fit;
    if (method == "graph_tv") fit = fit_graph_tv(ds, *g, *lambda, solver);
    else if (method == "laplacian") fit = fit_laplacian(ds, *g, *lambda);
    else if (method == "group_lasso") fit = fit_group_lasso(ds, *lambda);
    else if (method == "ols_ind") fit = fit_ols_individual(ds);
    else fit = fit_ols_pooled(ds);
    write_json(out_path(o, "fit.json"), to_json(fit));
    write_metadata(o, "fit", p);
    log << method << " fit: objective " << format_double(fit.objective) << ", " << fit.iterations << " iterations\n";
    check_strict(o, fit);
    return;
  }

  const Splits s = make_splits(panel, split);
  PathResult path;
  if (method == "graph_tv") path = regularization_path(s.train, *g, grid_size, s.val, solver);
  else if (method == "laplacian") path = laplacian_path(s.train, *g, grid_size, s.val);
  else path = group_lasso_path(s.train, grid_size, s.val);
  const MetricRow m = compute_metrics(path.selected(), nullptr, s.test);
  write_json(out_path(o, "path.json"), to_json(path));
  write_json(out_path(o, "fit.json"), to_json(path.selected()));
  write_metadata(o, "fit", p, {{"test_pred_mse", m.pred_mse}});
  log << method << " path: selected lambda " << format_double(path.selected().lambda) << ", test pred MSE "
      << format_double(m.pred_mse) << "\n";
  for (const auto& f : path.fits) check_strict(o, f);
}

SweepConfig read_sweep(Params& p, const std::string& prefix, SweepConfig c) {
  c.axis = sweep_axis_from_string(p.str(prefix + "axis", to_string(c.axis)));
  c.values = p.doubles(prefix + "values", c.values);
  c.topology = graph_kind_from_string(p.str(prefix + "topology", to_string(c.topology)));
  c.er_p = p.f(prefix + "er_p", c.er_p);
  c.field = field_kind_from_string(p.str(prefix + "field", to_string(c.field)));
  c.jump = p.f(prefix + "jump", c.jump);
  c.omega = p.f(prefix + "omega", c.omega);
  c.n_rep = p.i(prefix + "n_rep", c.n_rep);
  c.methods = p.strings(prefix + "methods", c.methods);
  c.m = p.i(prefix + "m", c.m);
  c.T_train = p.i(prefix + "T_train", c.T_train);
  c.T_val = p.i(prefix + "T_val", c.T_val);
  c.T_test = p.i(prefix + "T_test", c.T_test);
  c.buffer = p.i(prefix + "buffer", c.buffer);
  c.grid_size = p.i(prefix + "grid_size", c.grid_size);
  c.record_timing = p.b(prefix + "record_timing", c.record_timing);
  return c;
}

void write_sweep(const RunOptions& o, const std::string& dir, const SweepConfig& c, const SweepResult& r) {
  const SweepLabels labels{to_string(c.axis), to_string(c.topology), to_string(c.field)};
  std::ostringstream res, agg, fail;
  write_results_csv(res, r.rows, labels);
  write_aggregate_csv(agg, r.aggregate);
  for (const auto& f : r.failures) fail << f << "\n";
  const fs::path base = fs::path(o.out_dir) / dir;
  atomic_write((base / "results.csv").string(), res.str());
  atomic_write((base / "aggregate.csv").string(), agg.str());
  atomic_write((base / "failures.txt").string(), fail.str());
}

void strict_sweep(const RunOptions& o, const SweepResult& r) {
  if (!o.strict) return;
  if (!r.failures.empty()) throw SolverError(std::to_string(r.failures.size()) + " sweep runs failed");
  for (const auto& row : r.rows)
    for (const auto& f : row.flags)
      if (f == "not_converged") throw SolverError(row.method + " did not converge in a sweep run");
}

void cmd_sweep(const Config& cfg, const RunOptions& o, std::ostream& log) {
  Params p(cfg);
  SweepConfig c;
  c.values = {4, 8, 16};
  c.base_seed = p.u64("seed", 1);
  c = read_sweep(p, "sweep.", c);
  c.solver = read_solver(p);
  c.jobs = o.jobs;
  p.finish();
  validate(c);
  const SweepResult r = run_sweep(c);
  write_sweep(o, ".", c, r);
  write_metadata(o, "sweep", p,
                 {{"coefficient_stability_definition", "mean over coefficients of the across-repeat population variance"},
                  {"er_resamples", r.er_resamples},
                  {"failures", r.failures.size()}});
  log << "sweep: " << r.rows.size() << " rows, " << r.failures.size() << " failed runs\n";
  strict_sweep(o, r);
}

void cmd_theory(const Config& cfg, const RunOptions& o, std::ostream& log) {
  Params p(cfg);
  const std::uint64_t seed = p.u64("seed", 1);
  const Graph g = read_graph(p, seed, "complete", 16);
  const SystemEnsemble e = read_ensemble(p, g, seed);
  TheoryInputs in;
  in.T = p.i("theory.T", in.T);
  in.delta = p.f("theory.delta", in.delta);
  in.v = p.f("theory.v", in.v);
  in.rho_max = p.f("theory.rho_max", in.rho_max);
  in.regime = regime_from_string(p.str("theory.regime", to_string(in.regime)));
  auto& k = in.constants;
  k.c_zeta1 = p.f("theory.c_zeta1", k.c_zeta1);
  k.c_zeta2 = p.f("theory.c_zeta2", k.c_zeta2);
  k.c_F2 = p.f("theory.c_F2", k.c_F2);
  k.C_F3 = p.f("theory.C_F3", k.C_F3);
  k.c_theorem = p.f("theory.c_theorem", k.c_theorem);
  k.C_sample = p.f("theory.C_sample", k.C_sample);
  k.c_lambda = p.f("theory.c_lambda", k.c_lambda);
  p.finish();
  if (in.T < 1) throw UsageError("theory.T must be >= 1");
  if (!(in.delta > 0 && in.delta < 1)) throw UsageError("theory.delta must lie in (0, 1)");
  if (in.v < 1) throw UsageError("theory.v must be >= 1");

  const TheoryReport r = make_theory_report(g, e, in);
  json j = to_json(r);
  j["meta"] = run_metadata("theory", p.resolved());
  write_json(out_path(o, "theory.json"), j);
  write_json(out_path(o, "ensemble.json"), to_json(e));
  write_metadata(o, "theory", p);
  int passed = 0;
  for (const auto& c : r.conditions) passed += c.pass;
  log << "theory: " << passed << "/" << r.conditions.size() << " conditions pass, bound " << format_double(r.bound.rhs)
      << (r.stability_ok ? "" : " (ensemble exceeds rho_max)") << "\n";
}

void cmd_ingest(const Config& cfg, const RunOptions& o, std::ostream& log) {
  Params p(cfg);
  const std::string input = p.str("ingest.input", "");
  if (input.empty()) throw UsageError("ingest needs ingest.input");
  PreprocessOptions pre;
  pre.transform = transform_from_string(p.str("ingest.transform", "none"));
  pre.coverage_min = p.f("ingest.coverage_min", pre.coverage_min);
  pre.year_missing_max = p.f("ingest.year_missing_max", pre.year_missing_max);
  if (auto y = p.opt_str("ingest.year")) pre.year = p.i("ingest.year", 0);
  const int k = p.i("ingest.knn_k", 5);
  const int d = p.i("ingest.d", 2);
  const std::string variable = p.str("ingest.variable", "custom");
  const auto start = p.opt_str("ingest.start");
  const auto end = p.opt_str("ingest.end");
  const std::uint64_t seed = p.u64("seed", 1);
  p.finish();

  StationTable raw = load_station_csv(input);
  raw.variable = variable;
  const StationTable t = preprocess_series(raw, pre);
  if (t.num_stations() == 0) throw DataError("no station passed the coverage filters");

  std::chrono::sys_days first = t.start, last = t.date(t.num_days - 1);
  if (start) first = parse_iso_date(*start);
  else if (pre.year) first = std::max(first, sample_training_start(*pre.year, seed));
  if (end) last = parse_iso_date(*end);
  const TrajectoryPanel panel = to_lds_panel(t, first, last, d);
  const StationGraph sg = station_graph(t, std::min(k, t.num_stations() - 1));

  std::ostringstream panel_csv, coords_csv;
  write_panel_csv(panel_csv, panel);
  write_coords_csv(coords_csv, t);
  atomic_write(out_path(o, "panel.csv"), panel_csv.str());
  atomic_write(out_path(o, "coords.csv"), coords_csv.str());
  json gj = to_json(sg.graph);
  gj["connected"] = sg.connected;
  write_json(out_path(o, "graph.json"), gj);
  write_metadata(o, "ingest", p,
                 {{"state_embedding", "lag: x_t = (y_t, y_{t-1}, ..., y_{t-d+1})"},
                  {"window", {format_iso_date(first), format_iso_date(last)}},
                  {"stations_retained", t.num_stations()},
                  {"stations_in_file", raw.num_stations()},
                  {"graph_connected", sg.connected},
                  {"flags", t.flags}});
  log << "ingest: " << t.num_stations() << "/" << raw.num_stations() << " stations, " << panel.T_total + 1
      << " states" << (sg.connected ? "" : " (station graph disconnected)") << "\n";
}

void cmd_reproduce(const Config& cfg, const RunOptions& o, std::ostream& log) {
  Params p(cfg);
  const std::uint64_t seed = p.u64("seed", 1);
  const int n_rep = p.i("reproduce.n_rep", 15);
  const auto methods = p.strings("reproduce.methods", SweepConfig{}.methods);
  const bool timing = p.b("reproduce.record_timing", true);
  const SolverOptions solver = read_solver(p);
  p.finish();

  SweepConfig time_pw;
  time_pw.axis = SweepAxis::T;
  time_pw.values = {4, 8, 16};
  time_pw.topology = GraphKind::path;
  time_pw.m = 64;
  time_pw.jump = 0.5;

  SweepConfig m_grid = time_pw;
  m_grid.axis = SweepAxis::m;
  m_grid.values = {16, 36, 64};
  m_grid.T_train = 10;

  json summary = json::object();
  for (auto [name, c] : {std::pair{"time_pw", time_pw}, std::pair{"error_vs_m", m_grid}}) {
    c.base_seed = seed;
    c.n_rep = n_rep;
    c.methods = methods;
    c.record_timing = timing;
    c.solver = solver;
    c.jobs = o.jobs;
    validate(c);
    const SweepResult r = run_sweep(c);
    write_sweep(o, name, c, r);
    summary[name] = {{"rows", r.rows.size()}, {"failures", r.failures.size()}};
    log << name << ": " << r.rows.size() << " rows, " << r.failures.size() << " failed runs\n";
    strict_sweep(o, r);
  }
  write_metadata(o, "reproduce", p, {{"sweeps", summary}});
}

}  // namespace

void run_command(const std::string& command, const Config& cfg, const RunOptions& opts, std::ostream& log) {
  if (opts.jobs < 1) throw UsageError("--jobs must be >= 1");
  if (command == "simulate") cmd_simulate(cfg, opts, log);
  else if (command == "fit") cmd_fit(cfg, opts, log);
  else if (command == "sweep") cmd_sweep(cfg, opts, log);
  else if (command == "theory") cmd_theory(cfg, opts, log);
  else if (command == "ingest") cmd_ingest(cfg, opts, log);
  else if (command == "reproduce") cmd_reproduce(cfg, opts, log);
  else throw UsageError("unknown command '" + command + "'");
}

int run_command_safely(const std::string& command, const Config& cfg, const RunOptions& opts, std::ostream& log,
                       std::ostream& err) {
  const fs::path marker = fs::path(opts.out_dir) / ".failed";
  int code = kExitOk;
  std::string message;
  try {
    std::error_code ec;
    fs::remove(marker, ec);
    run_command(command, cfg, opts, log);
    return kExitOk;
  } catch (const UsageError& e) {
    code = kExitUsage;
    message = e.what();
  } catch (const DataError& e) {
    code = kExitData;
    message = e.what();
  } catch (const SolverError& e) {
    code = kExitSolver;
    message = e.what();
  } catch (const fs::filesystem_error& e) {
    code = kExitData;
    message = e.what();
  } catch (const std::exception& e) {
    code = kExitData;
    message = e.what();
  }
  err << "gtvlds " << command << ": " << message << "\n";
  try {
    fs::create_directories(opts.out_dir);
    std::ofstream(marker) << "exit " << code << ": " << message << "\n";
  } catch (const std::exception&) {
    // nowhere to leave the marker; the exit code still reports the failure
  }
  return code;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-TV estimation of linear dynamical systems on graphs", "gtvlds"};
  app.set_version_flag("--version", std::string("gtvlds ") + GTVLDS_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  RunOptions opts;
  opts.jobs = std::max(1u, std::thread::hardware_concurrency());

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "simulate a trajectory panel from a ground-truth ensemble"},
      {"fit", "fit one estimator (single lambda or validated path)"},
      {"sweep", "run a seeded experiment sweep"},
      {"theory", "evaluate the error-bound ingredients and conditions"},
      {"ingest", "turn a station CSV into a panel and kNN graph"},
      {"reproduce", "run the bundled ordering sweeps"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "flat key = value config file");
    sub->add_option("-o,--out", opts.out_dir, "output directory");
    sub->add_option("-j,--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--strict", opts.strict, "exit 3 when any solver fails to converge");
    sub->allow_extras();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  Config cfg;
  try {
    if (!config_path.empty()) cfg = Config::load(config_path);
    // --key=value or --key value overrides; flags win over the file.
    const auto extras = sub->remaining();
    for (size_t k = 0; k < extras.size(); ++k) {
      std::string a = extras[k];
      if (a.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + a + "'");
      a = a.substr(2);
      const auto eq = a.find('=');
      if (eq != std::string::npos) {
        cfg.set(a.substr(0, eq), a.substr(eq + 1));
      } else {
        if (k + 1 >= extras.size()) throw UsageError("option --" + a + " needs a value");
        cfg.set(a, extras[++k]);
      }
    }
  } catch (const UsageError& e) {
    err << "gtvlds " << command << ": " << e.what() << "\n";
    return kExitUsage;
  }
  return run_command_safely(command, cfg, opts, out, err);
}

}  // namespace gtvlds
