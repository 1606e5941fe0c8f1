#pragma once

#include <string>
#include <vector>

#include "gtvlds/graph.hpp"
#include "gtvlds/graph_analysis.hpp"
#include "gtvlds/lds.hpp"

namespace gtvlds {

// Universal constants the bounds leave unspecified. All default to 1.
struct TheoryConstants {
  double c_zeta1 = 1.0;   // c1 in zeta_1
  double c_zeta2 = 1.0;   // c1 in zeta_2
  double c_F2 = 1.0;      // c2 in F_2 = c2 sqrt(zeta_2)
  double C_F3 = 1.0;      // C1 in F_3, G_3
  double c_theorem = 1.0; // c in the three theorem conditions
  double C_sample = 1.0;  // C in C1..C3b
  double c_lambda = 1.0;  // c1 in the lambda choice
};

enum class Regime { smooth, few_changes };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& name);

// The index set S enters only through |S|, kappa_S and ||(D~a*)_{S^c}||_1.
struct SChoice {
  Regime regime = Regime::smooth;
  int size = 0;
  double kappa = 1.0;
  bool kappa_exact = true;
  double kappa_lower_bound = 1.0;
  double tail_norm = 0.0;
};

// S = {} or S = supp(D~a*); kappa_S exact when small enough, else the lower bound.
SChoice choose_S(const Graph& g, const SystemEnsemble& e, Regime regime);

struct FTerms {
  double zeta1 = 0.0;
  double zeta2 = 0.0;
  double F1 = 0.0;
  double F2 = 0.0;
  double F3 = 0.0;
  double G3 = 0.0;
  double Phi_S = 0.0;
};

FTerms evaluate_F_terms(const GrammianBundle& bundle, const ScalingFactors& scaling, const Graph& g, int T, int d,
                        double delta, double v, const SChoice& S, const TheoryConstants& k);

struct ConditionRow {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
  double margin = 0.0;  // rhs - lhs
};

struct ConditionInputs {
  int m = 0;
  int T = 0;
  int d = 0;
  int num_edges = 0;
  double delta = 0.1;
  double v = 1.0;
  double rho_max = 0.0;
  double beta = 0.0;
  double delta_G = 0.0;
  ScalingFactors scaling;
  FTerms terms;
};

// Theorem conditions 1-3 then the stable-case sample-size conditions C1, C2, C3a, C3b.
std::vector<ConditionRow> check_theorem_conditions(const ConditionInputs& in, const TheoryConstants& k);

struct ErrorBound {
  double rhs = 0.0;
  double per_node = 0.0;  // rhs / sqrt(m)
};

// (2 m lambda / T)(1 + 3 sqrt|S| / kappa_S) + sqrt(8 lambda m / T * tail)
ErrorBound theorem_error_bound(double lambda, int m, int T, const SChoice& S);

// Delta^{-1/2} max(d^{3/2} L1, mu L2)
double geometry_log_multiplier(double rho_max, double mu, int T, int d, int num_edges, double delta);

struct TheoryInputs {
  int T = 10;
  double delta = 0.1;
  double v = 1.0;
  double rho_max = 0.5;
  Regime regime = Regime::smooth;
  TheoryConstants constants;
};

struct TheoryReport {
  TheoryInputs inputs;
  int m = 0;
  int d = 0;
  int num_edges = 0;
  double fiedler = 0.0;
  ScalingFactors scaling;
  SChoice S;
  double compat_lower_bound = 1.0;
  double delta_G = 0.0;
  double beta = 0.0;
  double trace_sum = 0.0;
  double max_diag_G = 0.0;
  double ensemble_max_norm = 0.0;
  bool stability_ok = true;
  FTerms terms;
  double lambda = 0.0;           // theoretical choice
  double lambda_required = 0.0;  // (2/m) max(F1, F2)
  double M = 0.0;
  std::vector<ConditionRow> conditions;
  ErrorBound bound;
};

TheoryReport make_theory_report(const Graph& g, const SystemEnsemble& e, const TheoryInputs& in);

}  // namespace gtvlds
