#include "gtvlds/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "gtvlds/error.hpp"

namespace gtvlds {

SplitLayout split_layout(const SplitSpec& spec) {
  if (spec.T_train < 1 || spec.T_val < 1 || spec.T_test < 1 || spec.buffer < 0 || spec.offset < 0)
    throw UsageError("split lengths must be positive and buffer non-negative");
  SplitLayout l;
  l.train = {0, spec.T_train};
  l.val = {l.train.end + spec.buffer, l.train.end + spec.buffer + spec.T_val};
  l.test = {l.val.end + spec.buffer, l.val.end + spec.buffer + spec.T_test};
  return l;
}

Splits make_splits(const TrajectoryPanel& panel, const SplitSpec& spec) {
  Splits s;
  s.layout = split_layout(spec);
  const int needed = spec.offset + spec.total();
  if (panel.T_total < needed)
    throw UsageError("panel too short for split: need " + std::to_string(needed) + " steps, have " +
                     std::to_string(panel.T_total));
  auto design = [&](const SliceRange& r) { return build_design(panel, spec.offset + r.begin, spec.offset + r.end); };
  s.train = design(s.layout.train);
  s.val = design(s.layout.val);
  s.test = design(s.layout.test);
  return s;
}

double param_mse(const FitResult& fit, const SystemEnsemble& truth) {
  if (truth.num_nodes() != fit.m || truth.d != fit.d) throw UsageError("fit and ground truth shapes differ");
  double total = 0.0;
  for (int l = 0; l < fit.m; ++l) total += (fit.A(l) - truth.matrices[l]).squaredNorm();
  return total / fit.m;
}

MetricRow compute_metrics(const FitResult& fit, const SystemEnsemble* truth, const DesignSystem& test) {
  if (test.T < 1) throw UsageError("test panel needs at least one one-step pair");
  MetricRow row;
  row.method = fit.method;
  row.param_mse = truth ? param_mse(fit, *truth) : std::numeric_limits<double>::quiet_NaN();
  row.pred_mse = prediction_mse(fit.a_hat, test);
  row.selected_lambda = fit.lambda;
  row.n_iter = fit.iterations;
  row.flags = fit.flags;
  return row;
}

double coefficient_stability(const std::vector<FitResult>& fits) {
  if (fits.size() < 2) throw UsageError("coefficient stability needs at least two repeats");
  const auto n = fits.front().a_hat.size();
  for (const auto& f : fits)
    if (f.a_hat.size() != n || f.m != fits.front().m || f.d != fits.front().d)
      throw UsageError("coefficient stability: shape mismatch across repeats");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (const auto& f : fits) mean += f.a_hat;
  mean /= static_cast<double>(fits.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(n);
  for (const auto& f : fits) var += (f.a_hat - mean).cwiseAbs2();
  var /= static_cast<double>(fits.size());
  return var.mean();
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::T: return "T";
    case SweepAxis::m: return "m";
    case SweepAxis::jump: return "jump";
    case SweepAxis::omega: return "omega";
  }
  return "T";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "T") return SweepAxis::T;
  if (name == "m") return SweepAxis::m;
  if (name == "jump") return SweepAxis::jump;
  if (name == "omega") return SweepAxis::omega;
  throw UsageError("unknown sweep axis '" + name + "'");
}

void validate(const SweepConfig& cfg) {
  if (cfg.values.empty()) throw UsageError("sweep needs at least one value");
  for (size_t i = 1; i < cfg.values.size(); ++i)
    if (!(cfg.values[i] > cfg.values[i - 1])) throw UsageError("sweep values must be strictly increasing");
  if (cfg.n_rep < 1) throw UsageError("n_rep must be >= 1");
  if (cfg.methods.empty()) throw UsageError("sweep needs at least one method");
  static const std::vector<std::string> known{"graph_tv", "ols_ind", "ols_pooled", "laplacian", "group_lasso"};
  for (const auto& m : cfg.methods)
    if (std::find(known.begin(), known.end(), m) == known.end()) throw UsageError("unknown method '" + m + "'");
  if (cfg.jobs < 1) throw UsageError("jobs must be >= 1");
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int grid_side(int m) {
  int nx = static_cast<int>(std::floor(std::sqrt(static_cast<double>(m))));
  while (nx > 1 && m % nx != 0) --nx;
  return std::max(1, nx);
}

}  // namespace

std::uint64_t run_seed(std::uint64_t base_seed, double sweep_value, int rep) {
  std::uint64_t h = splitmix(base_seed);
  h = splitmix(h ^ std::bit_cast<std::uint64_t>(sweep_value));
  h = splitmix(h ^ static_cast<std::uint64_t>(rep));
  return h;
}

std::vector<MetricRow> run_single(const SweepConfig& cfg, double value, int rep, int* er_resamples) {
  const std::uint64_t seed = run_seed(cfg.base_seed, value, rep);
  int m = cfg.m, T_train = cfg.T_train;
  double jump = cfg.jump, omega = cfg.omega;
  switch (cfg.axis) {
    case SweepAxis::T: T_train = static_cast<int>(std::lround(value)); break;
    case SweepAxis::m: m = static_cast<int>(std::lround(value)); break;
    case SweepAxis::jump: jump = value; break;
    case SweepAxis::omega: omega = value; break;
  }

  Graph g;
  switch (cfg.topology) {
    case GraphKind::grid2d: {
      const int nx = grid_side(m);
      g = grid2d_graph(nx, m / nx);
      break;
    }
    case GraphKind::erdos_renyi: {
      auto [graph, extra] = connected_erdos_renyi(m, cfg.er_p, splitmix(seed ^ 0x5eedULL));
      if (er_resamples) *er_resamples += extra;
      g = std::move(graph);
      break;
    }
    default: g = build_graph(GraphSpec{cfg.topology, m});
  }
  if (!g.is_connected()) throw DataError("graph disconnected after resampling");

  FieldSpec field{cfg.field, 1.0, omega, jump};
  const SystemEnsemble truth = gen_ground_truth(g, field, seed);
  SplitSpec split{T_train, cfg.T_val, cfg.T_test, cfg.buffer, 1};
  const TrajectoryPanel panel = simulate_panel(truth, split.offset + split.total(), seed);
  const Splits s = make_splits(panel, split);

  std::vector<MetricRow> rows;
  for (const auto& method : cfg.methods) {
    const auto start = std::chrono::steady_clock::now();
    FitResult fit;
    if (method == "graph_tv") fit = regularization_path(s.train, g, cfg.grid_size, s.val, cfg.solver).selected();
    else if (method == "ols_ind") fit = fit_ols_individual(s.train);
    else if (method == "ols_pooled") fit = fit_ols_pooled(s.train);
    else if (method == "laplacian") fit = laplacian_path(s.train, g, cfg.grid_size, s.val).selected();
    else if (method == "group_lasso") fit = group_lasso_path(s.train, cfg.grid_size, s.val).selected();
    const auto stop = std::chrono::steady_clock::now();
    MetricRow row = compute_metrics(fit, &truth, s.test);
    row.method = method;
    row.seed = seed;
    row.sweep_value = value;
    row.wall_ms = cfg.record_timing ? std::chrono::duration<double, std::milli>(stop - start).count() : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  r.n = static_cast<int>(xs.size());
  if (r.n == 0) return r;
  for (double x : xs) r.mean += x;
  r.mean /= r.n;
  if (r.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / (r.n - 1)) / std::sqrt(static_cast<double>(r.n));
  }
  return r;
}

std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows) {
  // keyed by (value, first-seen method order) for a stable fold
  std::vector<std::pair<double, std::string>> keys;
  std::map<std::pair<double, std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.sweep_value, r.method);
    if (!groups.count(key)) keys.push_back(key);
    auto& g = groups[key];
    if (std::isnan(r.pred_mse)) continue;  // failed run
    g.first.push_back(r.param_mse);
    g.second.push_back(r.pred_mse);
  }
  std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<AggregateRow> out;
  for (const auto& key : keys) {
    const auto& g = groups[key];
    const MeanSe p = mean_se(g.first), q = mean_se(g.second);
    out.push_back({key.first, key.second, p.mean, 1.96 * p.se, q.mean, 1.96 * q.se, q.n});
  }
  return out;
}

SweepResult run_sweep(const SweepConfig& cfg) {
  validate(cfg);
  const int n_values = static_cast<int>(cfg.values.size());
  const int n_tasks = n_values * cfg.n_rep;
  std::vector<std::vector<MetricRow>> cells(n_tasks);
  std::vector<std::string> errors(n_tasks);
  std::vector<int> resamples(n_tasks, 0);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int task = next++; task < n_tasks; task = next++) {
      const double value = cfg.values[task / cfg.n_rep];
      const int rep = task % cfg.n_rep;
      try {
        cells[task] = run_single(cfg, value, rep, &resamples[task]);
      } catch (const std::exception& e) {
        errors[task] = e.what();
      }
    }
  };
  const int n_threads = std::min(cfg.jobs, std::max(1, n_tasks));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  SweepResult result;
  for (int task = 0; task < n_tasks; ++task) {
    const double value = cfg.values[task / cfg.n_rep];
    const int rep = task % cfg.n_rep;
    result.er_resamples += resamples[task];
    if (!errors[task].empty()) {
      result.failures.push_back("value=" + std::to_string(value) + " rep=" + std::to_string(rep) + ": " + errors[task]);
      for (const auto& method : cfg.methods) {
        MetricRow row;
        row.method = method;
        row.seed = run_seed(cfg.base_seed, value, rep);
        row.sweep_value = value;
        row.param_mse = row.pred_mse = row.selected_lambda = std::numeric_limits<double>::quiet_NaN();
        row.flags.push_back("failed");
        result.rows.push_back(std::move(row));
      }
      continue;
    }
    for (auto& row : cells[task]) result.rows.push_back(std::move(row));
  }
  result.aggregate = aggregate(result.rows);
  return result;
}

}  // namespace gtvlds
