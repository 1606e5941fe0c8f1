#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gtvlds/design.hpp"
#include "gtvlds/graph.hpp"

namespace gtvlds {

struct FitResult {
  std::string method;
  int m = 0;
  int d = 0;
  Eigen::VectorXd a_hat;  // stacked column-major vec(A_l)
  double lambda = 0.0;
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double kkt_gap = 0.0;
  bool converged = true;
  std::vector<std::string> flags;
  Eigen::VectorXd dual;                 // graph-TV only: multiplier for D~a, in [-lambda, lambda]
  std::vector<double> objective_trace;  // group lasso iterate log

  Eigen::MatrixXd A(int node) const { return unstack(a_hat, d, node); }
  bool has_flag(const std::string& f) const;
};

struct SolverOptions {
  double rho = 1.0;
  int max_iter = 5000;
  double tol_primal = 1e-8;
  double tol_dual = 1e-8;
  double kkt_tol = 1e-6;
  int max_rho_adaptations = 10;
  bool polish = true;
};

// (1/2m)||x~ - Q a||^2 + lambda ||D~ a||_1
double tv_objective(const DesignSystem& ds, const Eigen::SparseMatrix<double>& Dtil, const Eigen::VectorXd& a,
                    double lambda);

// Graph-TV penalized least squares by ADMM on z = D~a, with support polishing
// and a KKT certificate. `warm` seeds a and the dual.
FitResult fit_graph_tv(const DesignSystem& ds, const IncidenceMatrix& inc, double lambda,
                       const SolverOptions& opts = {}, const FitResult* warm = nullptr);
FitResult fit_graph_tv(const DesignSystem& ds, const Graph& g, double lambda, const SolverOptions& opts = {},
                       const FitResult* warm = nullptr);

// Smallest feasible slack: max_i |g + D~^T u|_i for the best available
// feasible multiplier u (u_i = lambda sign((D~a)_i) on the active set,
// |u_i| <= lambda elsewhere). Writes the multiplier used to `dual_out`.
double tv_kkt_gap(const DesignSystem& ds, const Eigen::SparseMatrix<double>& Dtil, const Eigen::VectorXd& a,
                  double lambda, const Eigen::VectorXd* dual_hint, Eigen::VectorXd* dual_out = nullptr);

// ||(pinv(D~))^T grad(a_pool)||_inf : above it the fully fused fit is optimal.
double lambda_max(const DesignSystem& ds, const IncidenceMatrix& inc);
double lambda_max(const DesignSystem& ds, const Graph& g);

FitResult fit_ols_individual(const DesignSystem& ds);
FitResult fit_ols_pooled(const DesignSystem& ds);

// (Q^TQ/m + 2 lambda L kron I) a = Q^T x~ / m
FitResult fit_laplacian(const DesignSystem& ds, const IncidenceMatrix& inc, double lambda);
FitResult fit_laplacian(const DesignSystem& ds, const Graph& g, double lambda);

struct GroupLassoOptions {
  int max_iter = 20000;
  double tol = 1e-8;
};

// Group lasso on deviations from the pooled fit, one group per coefficient
// (collecting that coefficient across all nodes).
FitResult fit_group_lasso(const DesignSystem& ds, double lambda, const GroupLassoOptions& opts = {},
                          const FitResult* warm = nullptr);
double group_lasso_lambda_max(const DesignSystem& ds);
// Lambda scale for the Laplacian grid: max_l ||Sxx_l||_2 / (m * fiedler).
double laplacian_lambda_scale(const DesignSystem& ds, const Graph& g);

struct PathResult {
  std::vector<double> lambdas;  // strictly decreasing
  std::vector<FitResult> fits;
  std::vector<double> selection_metric;  // validation one-step prediction MSE
  int selected_index = 0;

  const FitResult& selected() const { return fits[selected_index]; }
};

inline constexpr int kDefaultGridSize = 50;
inline constexpr int kMaxGridSize = 200;
inline constexpr double kGridFloor = 1e-4;

// Geometric grid from top down to floor * top, length n.
std::vector<double> geometric_grid(double top, int n, double floor_ratio = kGridFloor);

// Index of the smallest metric; ties go to the larger lambda (lower index).
int select_min(const std::vector<double>& metric);

PathResult regularization_path(const DesignSystem& ds, const Graph& g, int grid_size, const DesignSystem& val,
                               const SolverOptions& opts = {});
PathResult laplacian_path(const DesignSystem& ds, const Graph& g, int grid_size, const DesignSystem& val);
PathResult group_lasso_path(const DesignSystem& ds, int grid_size, const DesignSystem& val);

struct TheoreticalLambdaInputs {
  double rho_max = 0.0;
  double mu = 0.0;
  int m = 0;
  int T = 0;
  int d = 0;
  int num_edges = 0;
  double delta = 0.1;
  double c1 = 1.0;
};

// lambda = (c1/m) sqrt(T/Delta) max(d^{3/2} L1, mu L2) with Delta = (1-rho)^2,
// L1 = log(dT/(delta Delta)), L2 = log(d|E|/delta).
double theoretical_lambda(const TheoreticalLambdaInputs& in);

}  // namespace gtvlds
