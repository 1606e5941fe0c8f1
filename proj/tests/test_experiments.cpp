#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "gtvlds/error.hpp"
#include "gtvlds/experiments.hpp"
#include "gtvlds/io.hpp"
#include "test_util.hpp"

using namespace gtvlds;

namespace {
TrajectoryPanel scalar_panel(const std::vector<std::vector<double>>& series) {
  TrajectoryPanel p;
  p.m = static_cast<int>(series.size());
  p.d = 1;
  p.T_total = static_cast<int>(series[0].size()) - 1;
  for (const auto& s : series) p.states.push_back(Eigen::Map<const Eigen::RowVectorXd>(s.data(), s.size()));
  return p;
}

FitResult fit_from(const std::vector<Eigen::MatrixXd>& mats) {
  FitResult f;
  f.method = "fixed";
  f.m = static_cast<int>(mats.size());
  f.d = static_cast<int>(mats[0].rows());
  const int b = f.d * f.d;
  f.a_hat.resize(f.m * b);
  for (int l = 0; l < f.m; ++l) f.a_hat.segment(l * b, b) = Eigen::Map<const Eigen::VectorXd>(mats[l].data(), b);
  return f;
}

std::string results_csv(const SweepResult& r, const SweepConfig& c) {
  std::ostringstream s;
  write_results_csv(s, r.rows, {to_string(c.axis), to_string(c.topology), to_string(c.field)});
  write_aggregate_csv(s, r.aggregate);
  return s.str();
}
}  // namespace

TEST_CASE("split layout") {
  const auto l = split_layout({4, 3, 5, 2, 0});
  CHECK(l.train.begin == 0);
  CHECK(l.train.end == 4);
  CHECK(l.val.begin == 6);
  CHECK(l.val.end == 9);
  CHECK(l.test.begin == 11);
  CHECK(l.test.end == 16);

  const auto c = split_layout({4, 3, 5, 0, 0});
  CHECK(c.val.begin == c.train.end);
  CHECK(c.test.begin == c.val.end);

  const SplitSpec def;
  CHECK(def.T_val == 4);
  CHECK(def.T_test == 8);
  CHECK(def.buffer == 100);
  CHECK(def.total() == def.T_train + 2 * def.buffer + def.T_val + def.T_test);
}

TEST_CASE("splits never share a sample") {
  const auto e = gen_ground_truth(path_graph(3), {});
  const SplitSpec spec{5, 3, 4, 2, 1};
  const auto panel = simulate_panel(e, spec.offset + spec.total(), 1);
  const auto s = make_splits(panel, spec);
  CHECK(s.train.T == 5);
  CHECK(s.val.T == 3);
  CHECK(s.test.T == 4);
  // pair k uses states offset+k and offset+k+1; collect the response indices
  std::set<int> seen;
  for (const auto& r : {s.layout.train, s.layout.val, s.layout.test})
    for (int k = r.begin; k < r.end; ++k) CHECK(seen.insert(k).second);
  CHECK(s.train.X[0].col(0) == panel.x(0, 1));
  CHECK(s.test.Xt[2].col(3) == panel.x(2, spec.offset + spec.total()));
  CHECK_THROWS_AS(make_splits(simulate_panel(e, spec.total(), 1), spec), UsageError);
}

TEST_CASE("metrics") {
  const Graph g = path_graph(3);
  const auto e = gen_ground_truth(g, {});
  SimulationOptions o;
  o.zero_noise = true;
  o.x0 = Eigen::Vector2d(1, 0.5);
  const auto ds = build_design(simulate_panel(e, 6, 0, o), 0, 6);
  const auto exact = compute_metrics(fit_from(e.matrices), &e, ds);
  CHECK(exact.param_mse == 0.0);
  CHECK(exact.pred_mse < 1e-30);

  auto perturbed = e.matrices;
  const double eps = 0.1;
  for (auto& A : perturbed) A(1, 0) += eps;
  CHECK(compute_metrics(fit_from(perturbed), &e, ds).param_mse == doctest::Approx(eps * eps));
  CHECK(std::isnan(compute_metrics(fit_from(e.matrices), nullptr, ds).param_mse));

  // m = 2, d = 1 by hand: series (1, 2, 1) and (0.5, -1, 2) scored with a = (0.5, -1)
  const auto p = scalar_panel({{1, 2, 1}, {0.5, -1, 2}});
  const auto sds = build_design(p, 0, 2);
  std::vector<Eigen::MatrixXd> A{Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::MatrixXd::Constant(1, 1, -1.0)};
  const double by_hand = (std::pow(0.5 * 1 - 2, 2) + std::pow(0.5 * 2 - 1, 2) + std::pow(-1 * 0.5 + 1, 2) +
                          std::pow(-1 * -1 - 2, 2)) / (2 * 2);
  CHECK(compute_metrics(fit_from(A), nullptr, sds).pred_mse == doctest::Approx(by_hand));
}

TEST_CASE("coefficient stability") {
  const std::vector<Eigen::MatrixXd> mats{Eigen::Matrix2d::Identity(), 0.5 * Eigen::Matrix2d::Ones()};
  const auto a = fit_from(mats);
  CHECK(coefficient_stability({a, a, a}) == 0.0);
  auto b = a;
  const double eps = 0.3;
  b.a_hat(5) += eps;
  // one coefficient varies: population variance eps^2/4, averaged over m d^2 = 8
  CHECK(coefficient_stability({a, b}) == doctest::Approx(eps * eps / 4.0 / 8.0));
  CHECK_THROWS_AS(coefficient_stability({a}), UsageError);
  auto c = fit_from({Eigen::Matrix2d::Identity()});
  CHECK_THROWS_AS(coefficient_stability({a, c}), UsageError);

  const auto panel = simulate_panel(gen_ground_truth(path_graph(2), {}), 20, 3);
  const auto ds = build_design(panel, 1, 20);
  CHECK(coefficient_stability({fit_ols_pooled(ds), fit_ols_pooled(ds)}) == 0.0);
}

TEST_CASE("sweep configuration is validated") {
  SweepConfig c;
  c.values = {};
  CHECK_THROWS_AS(validate(c), UsageError);
  c.values = {4, 4};
  CHECK_THROWS_AS(validate(c), UsageError);
  c.values = {4, 8};
  c.n_rep = 0;
  CHECK_THROWS_AS(validate(c), UsageError);
  c.n_rep = 1;
  c.methods = {"nope"};
  CHECK_THROWS_AS(validate(c), UsageError);
}

TEST_CASE("single-row sweep and trivial aggregate") {
  SweepConfig c;
  c.values = {8};
  c.n_rep = 1;
  c.m = 6;
  c.methods = {"ols_ind"};
  c.buffer = 5;
  const auto r = run_sweep(c);
  REQUIRE(r.rows.size() == 1);
  REQUIRE(r.aggregate.size() == 1);
  CHECK(r.aggregate[0].mean_param_mse == r.rows[0].param_mse);
  CHECK(r.aggregate[0].ci95_param == 0.0);
  CHECK(r.aggregate[0].n_ok == 1);

  MetricRow row = r.rows[0];
  const auto agg = aggregate({row, row, row});
  CHECK(agg[0].mean_pred_mse == row.pred_mse);
  CHECK(agg[0].ci95_pred == 0.0);
}

TEST_CASE("sweeps are deterministic and thread-count independent") {
  SweepConfig c;
  c.values = {4, 8};
  c.n_rep = 3;
  c.m = 9;
  c.topology = GraphKind::grid2d;
  c.methods = {"graph_tv", "ols_ind", "ols_pooled", "laplacian", "group_lasso"};
  c.buffer = 10;
  c.grid_size = 8;
  c.record_timing = false;
  const auto a = results_csv(run_sweep(c), c);
  const auto b = results_csv(run_sweep(c), c);
  CHECK(a == b);
  c.jobs = 3;
  CHECK(results_csv(run_sweep(c), c) == a);
}

TEST_CASE("adding sweep values leaves existing runs untouched") {
  SweepConfig c;
  c.values = {8};
  c.n_rep = 2;
  c.m = 6;
  c.methods = {"ols_ind"};
  c.buffer = 5;
  const auto a = run_sweep(c);
  c.values = {4, 8};
  const auto b = run_sweep(c);
  CHECK(b.rows[2].seed == a.rows[0].seed);
  CHECK(b.rows[2].param_mse == a.rows[0].param_mse);
  CHECK(b.rows[3].param_mse == a.rows[1].param_mse);
}

TEST_CASE("failed runs are recorded and skipped") {
  SweepConfig c;
  c.axis = SweepAxis::omega;
  c.values = {0.0, 0.7};  // a flat smooth field cannot be rescaled to a positive jump
  c.field = FieldKind::smooth;
  c.topology = GraphKind::grid2d;
  c.m = 9;
  c.n_rep = 2;
  c.methods = {"ols_ind", "ols_pooled"};
  c.buffer = 5;
  const auto r = run_sweep(c);
  CHECK(r.failures.size() == 2);
  CHECK(r.rows.size() == 8);
  REQUIRE(r.aggregate.size() == 4);
  CHECK(r.aggregate[0].n_ok == 0);
  CHECK(r.aggregate[2].n_ok == 2);
  for (int i = 0; i < 4; ++i) CHECK(r.rows[i].flags == std::vector<std::string>{"failed"});
}

TEST_CASE("erdos-renyi sweeps resample disconnected draws") {
  SweepConfig c;
  c.values = {6};
  c.n_rep = 4;
  c.m = 12;
  c.topology = GraphKind::erdos_renyi;
  c.er_p = 0.2;
  c.methods = {"ols_ind"};
  c.buffer = 5;
  const auto r = run_sweep(c);
  MESSAGE("extra Erdos-Renyi draws: " << r.er_resamples);
  CHECK(r.rows.size() == 4);
}

TEST_CASE("confidence intervals shrink like one over root n") {
  // Pooled over several sweep values to tame the sampling noise of a single SE.
  SweepConfig c;
  c.values = {6, 8, 10, 12, 14, 16, 18, 20};
  c.m = 6;
  c.methods = {"ols_ind"};
  c.buffer = 10;
  c.record_timing = false;
  auto mean_ci = [&](int n) {
    c.n_rep = n;
    const auto r = run_sweep(c);
    double s = 0;
    for (const auto& a : r.aggregate) s += a.ci95_pred / a.mean_pred_mse;
    return s / r.aggregate.size();
  };
  const double ratio = mean_ci(15) / mean_ci(60);
  MESSAGE("CI ratio n=15 vs n=60: " << ratio << " (ideal 2)");
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.2));
}
