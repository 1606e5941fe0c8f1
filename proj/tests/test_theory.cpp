#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gtvlds/design.hpp"
#include "gtvlds/error.hpp"
#include "gtvlds/estimators.hpp"
#include "gtvlds/theory.hpp"
#include "test_util.hpp"
#include "theory_oracle.hpp"

using namespace gtvlds;

namespace {
void check_against_oracle(const Graph& g, const SystemEnsemble& e, const TheoryInputs& in) {
  const auto r = make_theory_report(g, e, in);
  const auto o = oracle::evaluate(g, e, in.T, in.delta, in.v, in.rho_max, in.regime == Regime::few_changes);
  const double tol = 1e-10;
  CHECK(oracle::rel_err(r.terms.zeta1, o.zeta1) < tol);
  CHECK(oracle::rel_err(r.terms.zeta2, o.zeta2) < tol);
  CHECK(oracle::rel_err(r.terms.F1, o.F1) < tol);
  CHECK(oracle::rel_err(r.terms.F2, o.F2) < tol);
  CHECK(oracle::rel_err(r.terms.F3, o.F3) < tol);
  CHECK(oracle::rel_err(r.terms.G3, o.G3) < tol);
  CHECK(oracle::rel_err(r.terms.Phi_S, o.Phi) < tol);
  CHECK(oracle::rel_err(r.lambda, o.lambda) < tol);
  CHECK(oracle::rel_err(r.bound.rhs, o.rhs) < tol);
  REQUIRE(r.conditions.size() == o.conditions.size());
  for (const auto& c : r.conditions) {
    const auto& [lhs, rhs] = o.conditions.at(c.name);
    CHECK(oracle::rel_err(c.lhs, lhs) < tol);
    CHECK(oracle::rel_err(c.rhs, rhs) < tol);
    CHECK(c.pass == (lhs <= rhs));
  }
}
}  // namespace

TEST_CASE("zeta1 for zero dynamics") {
  const Graph g = path_graph(4);
  const auto e = testutil::constant_ensemble(4, Eigen::MatrixXd::Zero(1, 1));
  const int T = 7;
  const auto bundle = grammian_bundle(e, T);
  const auto f = evaluate_F_terms(bundle, scaling_factors(spectrum(g)), g, T, 1, 0.1, 1.0, SChoice{}, {});
  CHECK(f.zeta1 == doctest::Approx(4.0 * T * std::log(10.0)).epsilon(1e-13));
}

TEST_CASE("choice of S") {
  const Graph g = path_graph(6);
  const auto e = oracle::stable_three_level(6, 0.2);
  const auto smooth = choose_S(g, e, Regime::smooth);
  CHECK(smooth.size == 0);
  CHECK(smooth.kappa == 1.0);
  CHECK(smooth.tail_norm == doctest::Approx(0.4));
  const auto bundle = grammian_bundle(e, 8);
  const auto sc = scaling_factors(spectrum(g));
  const auto f0 = evaluate_F_terms(bundle, sc, g, 8, 2, 0.1, 1.0, smooth, {});
  CHECK(f0.Phi_S == doctest::Approx(1.0 + 0.4));

  const auto few = choose_S(g, e, Regime::few_changes);
  CHECK(few.size == 2);
  CHECK(few.tail_norm == 0.0);
  CHECK(few.kappa_exact);
  const auto f1 = evaluate_F_terms(bundle, sc, g, 8, 2, 0.1, 1.0, few, {});
  CHECK(f1.Phi_S == doctest::Approx(1.0 + std::sqrt(2.0) / few.kappa));
  CHECK(few.kappa >= few.kappa_lower_bound - 1e-9);
}

TEST_CASE("conditions pass for long horizons") {
  const Graph g = complete_graph(8);
  const auto e = oracle::stable_three_level(8, 0.2);
  TheoryInputs in;
  in.T = 1 << 16;
  const auto r = make_theory_report(g, e, in);
  for (const auto& c : r.conditions)
    if (c.name.rfind("theorem_", 0) == 0) CHECK_MESSAGE(c.pass, c.name);
}

TEST_CASE("C3b is trivial without dispersion or variation") {
  const Graph g = path_graph(5);
  const auto e = testutil::constant_ensemble(5, (Eigen::Matrix2d() << 0.2, 0.1, 0, 0.3).finished());
  const auto r = make_theory_report(g, e, TheoryInputs{});
  CHECK(r.delta_G == 0.0);
  for (const auto& c : r.conditions)
    if (c.name == "C3b") {
      CHECK(c.lhs == 0.0);
      CHECK(c.pass);
    }
}

TEST_CASE("error bound") {
  SChoice S;
  const auto b = theorem_error_bound(0.3, 10, 20, S);
  CHECK(b.rhs == doctest::Approx(2 * 10 * 0.3 / 20));
  CHECK(b.per_node == doctest::Approx(b.rhs / std::sqrt(10.0)));
  CHECK(theorem_error_bound(0.6, 10, 20, S).rhs == doctest::Approx(2 * b.rhs));
  CHECK_THROWS_AS(theorem_error_bound(0.0, 10, 20, S), UsageError);
}

TEST_CASE("F3 dominates G3 and the tail norm pushes everything up") {
  const Graph g = grid2d_graph(3, 3);
  const auto e = oracle::stable_three_level(9, 0.2);
  const auto bundle = grammian_bundle(e, 10);
  const auto sc = scaling_factors(spectrum(g));
  double prevPhi = 0, prevF3 = 0, prevRhs = 0;
  for (double tail : {0.0, 0.5, 1.0, 4.0}) {
    SChoice S;
    S.tail_norm = tail;
    const auto f = evaluate_F_terms(bundle, sc, g, 10, 2, 0.1, 1.0, S, {});
    CHECK(f.F3 >= f.G3);
    CHECK(f.G3 >= 0);
    const double rhs = theorem_error_bound(0.5, 9, 10, S).rhs;
    CHECK(f.Phi_S >= prevPhi);
    CHECK(f.F3 >= prevF3);
    CHECK(rhs >= prevRhs);
    prevPhi = f.Phi_S;
    prevF3 = f.F3;
    prevRhs = rhs;
  }
}

TEST_CASE("regimes agree when the field has no jumps") {
  const Graph g = path_graph(6);
  const auto e = oracle::stable_three_level(6, 0.0);
  TheoryInputs in;
  const auto a = make_theory_report(g, e, in);
  in.regime = Regime::few_changes;
  const auto b = make_theory_report(g, e, in);
  CHECK(a.bound.rhs == doctest::Approx(b.bound.rhs).epsilon(1e-14));
  CHECK(a.S.tail_norm == 0.0);
}

TEST_CASE("geometry multiplier matches the lambda bracket") {
  const Graph g = complete_graph(10);
  const auto e = oracle::stable_three_level(10, 0.2);
  TheoryInputs in;
  in.T = 25;
  const auto r = make_theory_report(g, e, in);
  CHECK(r.lambda * r.m / (in.constants.c_lambda * std::sqrt(static_cast<double>(in.T))) ==
        doctest::Approx(r.M).epsilon(1e-12));
}

TEST_CASE("report matches the independent evaluation on complete(64)") {
  TheoryInputs in;
  in.T = 12;
  in.rho_max = 0.5;
  check_against_oracle(complete_graph(64), oracle::stable_three_level(64, 0.2), in);
}

TEST_CASE("report matches the independent evaluation in the few-changes regime") {
  TheoryInputs in;
  in.T = 9;
  in.regime = Regime::few_changes;
  in.v = 2.0;
  check_against_oracle(path_graph(6), oracle::stable_three_level(6, 0.2), in);
}

TEST_CASE("report flags ensembles beyond rho_max") {
  const Graph g = path_graph(4);
  const auto e = gen_ground_truth(g, {});
  const auto r = make_theory_report(g, e, TheoryInputs{});
  CHECK_FALSE(r.stability_ok);
  CHECK(std::isfinite(r.bound.rhs));
}

TEST_CASE("empirical error versus the bound is recorded") {
  const Graph g = path_graph(12);
  const auto e = oracle::stable_three_level(12, 0.3);
  const auto panel = simulate_panel(e, 41, 4);
  const auto ds = build_design(panel, 1, 41);
  TheoryInputs in;
  in.T = 40;
  in.regime = Regime::few_changes;
  const auto r = make_theory_report(g, e, in);
  const auto fit = fit_graph_tv(ds, g, r.lambda);
  const double err = (fit.a_hat - e.stacked()).norm();
  const double rhs = theorem_error_bound(r.lambda, 12, 40, r.S).rhs;
  MESSAGE("empirical error " << err << " vs bound " << rhs << (err <= rhs ? " (within)" : " (exceeds)"));
  CHECK(std::isfinite(err));
}
