#include "gtvlds/theory.hpp"

#include <cmath>

#include "gtvlds/design.hpp"
#include "gtvlds/error.hpp"
#include "gtvlds/estimators.hpp"

namespace gtvlds {

std::string to_string(Regime r) { return r == Regime::smooth ? "smooth" : "few_changes"; }

Regime regime_from_string(const std::string& name) {
  if (name == "smooth") return Regime::smooth;
  if (name == "few_changes") return Regime::few_changes;
  throw UsageError("unknown regime '" + name + "'");
}

SChoice choose_S(const Graph& g, const SystemEnsemble& e, Regime regime) {
  const int block = e.d * e.d;
  const Eigen::VectorXd Da = lift(incidence(g).D, block) * e.stacked();
  SChoice S;
  S.regime = regime;
  if (regime == Regime::smooth) {
    S.tail_norm = Da.lpNorm<1>();
    return S;
  }
  std::vector<int> support;
  for (Eigen::Index i = 0; i < Da.size(); ++i)
    if (std::abs(Da[i]) > 1e-12) support.push_back(static_cast<int>(i));
  S.size = static_cast<int>(support.size());
  S.tail_norm = 0.0;
  if (support.empty()) return S;
  const CompatReport bound = compat_lower_bound(g, support, e.d);
  S.kappa_lower_bound = bound.lower_bound;
  if (S.size <= kCompatExactMaxSet && g.num_nodes() * block <= kCompatExactMaxDim) {
    S.kappa = compat_exact_small(g, support, e.d);
    S.kappa_exact = true;
  } else {
    S.kappa = bound.lower_bound;
    S.kappa_exact = false;
  }
  return S;
}

FTerms evaluate_F_terms(const GrammianBundle& bundle, const ScalingFactors& scaling, const Graph& g, int T, int d,
                        double delta, double v, const SChoice& S, const TheoryConstants& k) {
  if (!(delta > 0.0 && delta < 1.0)) throw UsageError("delta must lie in (0, 1)");
  if (v < 1.0) throw UsageError("v must be >= 1");
  const int m = g.num_nodes();
  const double E = g.num_edges();
  const double log_inv_delta = std::log(1.0 / delta);

  FTerms f;
  f.zeta1 = k.c_zeta1 * bundle.trace_sum * log_inv_delta;
  const double r1 = f.zeta1 / m + 1.0;
  f.F1 = std::sqrt(2.0) * std::sqrt(r1) * std::sqrt(log_inv_delta + 0.5 * d * d * std::log(r1));

  const double l2 = std::log(d * d * E / delta);
  f.zeta2 = k.c_zeta2 * scaling.mu * scaling.mu * bundle.max_diag_G * l2 * l2;
  f.F2 = k.c_F2 * std::sqrt(f.zeta2);

  const double K = 4.0 * std::sqrt(static_cast<double>(S.size)) / S.kappa + 4.0 * S.tail_norm + 1.0;
  const double ell = std::log(d * d * E);
  const double b2 = bundle.beta * bundle.beta;
  const double mp = scaling.mu_prime;
  f.F3 = k.C_F3 * b2 * (mp * mp * K * K * ell + mp * std::sqrt(static_cast<double>(T)) * K * std::sqrt(ell) +
                        std::sqrt(static_cast<double>(T)));
  f.G3 = k.C_F3 * b2 * (mp * K * std::sqrt(ell) + std::sqrt(static_cast<double>(T)));

  f.Phi_S = 1.0 + std::sqrt(static_cast<double>(S.size)) / S.kappa + S.tail_norm;
  return f;
}

std::vector<ConditionRow> check_theorem_conditions(const ConditionInputs& in, const TheoryConstants& k) {
  const double T = in.T, m = in.m, d = in.d, v = in.v;
  const double Delta = (1.0 - in.rho_max) * (1.0 - in.rho_max);
  const double L2 = std::log(d * in.num_edges / in.delta);
  const double mu = in.scaling.mu, mup = in.scaling.mu_prime;
  const double Phi = in.terms.Phi_S;
  const double b2 = in.beta * in.beta;

  std::vector<ConditionRow> rows;
  auto add = [&](std::string name, double lhs, double rhs) {
    rows.push_back({std::move(name), lhs, rhs, lhs <= rhs, rhs - lhs});
  };
  add("theorem_1", in.terms.F3 * std::sqrt(v), k.c_theorem * T);
  add("theorem_2", b2 / m * (std::sqrt(m * T) + d) * (d + v), k.c_theorem * T);
  add("theorem_3",
      mu / std::sqrt(m) * Phi * (d * in.delta_G + b2 * std::sqrt(T) * std::log(in.num_edges * d / in.delta)),
      k.c_theorem * T);
  const double c1_core = 1.0 + mup * Phi * std::sqrt(L2);
  add("C1", k.C_sample * v / (Delta * Delta) * c1_core * c1_core, T);
  add("C2", k.C_sample * (d + v) * (d + v) / (m * Delta * Delta), T);
  add("C3a", k.C_sample * mu * mu * Phi * Phi * L2 * L2 / (m * Delta * Delta), T);
  add("C3b", k.C_sample * mu / std::sqrt(m) * Phi * d * in.delta_G, T);
  return rows;
}

ErrorBound theorem_error_bound(double lambda, int m, int T, const SChoice& S) {
  if (!(lambda > 0.0) || T <= 0) throw UsageError("error bound needs lambda > 0 and T > 0");
  ErrorBound b;
  b.rhs = 2.0 * m * lambda / T * (1.0 + 3.0 * std::sqrt(static_cast<double>(S.size)) / S.kappa) +
          std::sqrt(8.0 * lambda * m / T * S.tail_norm);
  b.per_node = b.rhs / std::sqrt(static_cast<double>(m));
  return b;
}

double geometry_log_multiplier(double rho_max, double mu, int T, int d, int num_edges, double delta) {
  const double Delta = (1.0 - rho_max) * (1.0 - rho_max);
  const double L1 = std::log(d * T / (delta * Delta));
  const double L2 = std::log(d * num_edges / delta);
  return std::max(std::pow(d, 1.5) * L1, mu * L2) / std::sqrt(Delta);
}

TheoryReport make_theory_report(const Graph& g, const SystemEnsemble& e, const TheoryInputs& in) {
  if (e.num_nodes() != g.num_nodes()) throw UsageError("ensemble and graph sizes differ");
  if (!(in.rho_max >= 0.0 && in.rho_max < 1.0)) throw UsageError("rho_max must lie in [0, 1)");
  TheoryReport r;
  r.inputs = in;
  r.m = g.num_nodes();
  r.d = e.d;
  r.num_edges = g.num_edges();
  const GraphSpectrum spec = spectrum(g);
  r.fiedler = spec.fiedler;
  r.scaling = scaling_factors(spec);

  const GrammianBundle bundle = grammian_bundle(e, in.T);
  r.delta_G = bundle.delta_G;
  r.beta = bundle.beta;
  r.trace_sum = bundle.trace_sum;
  r.max_diag_G = bundle.max_diag_G;
  r.ensemble_max_norm = e.max_spectral_norm();
  r.stability_ok = r.ensemble_max_norm <= in.rho_max + 1e-12;

  r.S = choose_S(g, e, in.regime);
  r.compat_lower_bound = r.S.kappa_lower_bound;
  r.terms = evaluate_F_terms(bundle, r.scaling, g, in.T, e.d, in.delta, in.v, r.S, in.constants);

  TheoreticalLambdaInputs li{in.rho_max, r.scaling.mu, r.m, in.T, e.d, r.num_edges, in.delta, in.constants.c_lambda};
  r.lambda = theoretical_lambda(li);
  r.lambda_required = 2.0 / r.m * std::max(r.terms.F1, r.terms.F2);
  r.M = geometry_log_multiplier(in.rho_max, r.scaling.mu, in.T, e.d, r.num_edges, in.delta);

  ConditionInputs ci;
  ci.m = r.m;
  ci.T = in.T;
  ci.d = e.d;
  ci.num_edges = r.num_edges;
  ci.delta = in.delta;
  ci.v = in.v;
  ci.rho_max = in.rho_max;
  ci.beta = r.beta;
  ci.delta_G = r.delta_G;
  ci.scaling = r.scaling;
  ci.terms = r.terms;
  r.conditions = check_theorem_conditions(ci, in.constants);
  r.conditions.push_back({"lambda_valid", r.lambda_required, r.lambda, r.lambda_required <= r.lambda,
                          r.lambda - r.lambda_required});
  r.bound = theorem_error_bound(r.lambda, r.m, in.T, r.S);
  return r;
}

}  // namespace gtvlds
