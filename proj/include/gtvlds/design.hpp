#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "gtvlds/graph.hpp"
#include "gtvlds/lds.hpp"

namespace gtvlds {

// Per-node regression blocks X_l = [x_{l,t0} .. x_{l,t1-1}], Xt_l = [x_{l,t0+1} .. x_{l,t1}].
// Q = blkdiag(X_l^T kron I_d) is never formed except on request; the solvers
// work with the sufficient statistics X_l X_l^T, Xt_l X_l^T and ||Xt_l||_F^2.
struct DesignSystem {
  int m = 0;
  int d = 0;
  int T = 0;
  std::vector<Eigen::MatrixXd> X;
  std::vector<Eigen::MatrixXd> Xt;
  std::vector<Eigen::MatrixXd> Sxx;
  std::vector<Eigen::MatrixXd> Syx;
  std::vector<double> Syy;

  int block() const { return d * d; }
  int dim() const { return m * d * d; }

  Eigen::SparseMatrix<double> Q() const;
  Eigen::VectorXd response() const;               // x~ = stack(vec(Xt_l))
  Eigen::SparseMatrix<double> gram() const;       // Q^T Q
  Eigen::VectorXd Qt_response() const;            // Q^T x~
  double loss(const Eigen::VectorXd& a) const;    // (1/2m) ||x~ - Q a||^2
  Eigen::VectorXd gradient(const Eigen::VectorXd& a) const;  // (1/m) Q^T (Q a - x~)
};

DesignSystem build_design(const TrajectoryPanel& panel, int t_start, int t_end);

// D~ = D kron I_{block}, rows edge-major.
Eigen::SparseMatrix<double> lift(const Eigen::SparseMatrix<double>& D, int block);

// Column-major d x d matrix of node l from a stacked coefficient vector.
Eigen::MatrixXd unstack(const Eigen::VectorXd& a, int d, int node);

// (1/(m T)) sum_l ||A_l X_l - Xt_l||_F^2 for the pairs held by ds.
double prediction_mse(const Eigen::VectorXd& a, const DesignSystem& ds);

}  // namespace gtvlds
