#pragma once

#include <random>

#include <Eigen/Dense>

#include "gtvlds/lds.hpp"

namespace testutil {

// Random d x d matrix rescaled to spectral norm `norm`.
inline Eigen::MatrixXd random_matrix_with_norm(int d, double norm, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = n01(rng);
  const double s = Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()(0);
  return A * (norm / s);
}

inline gtvlds::SystemEnsemble random_stable_ensemble(int m, int d, double rho_max, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  gtvlds::SystemEnsemble e;
  e.d = d;
  e.template_tag = "custom";
  for (int l = 0; l < m; ++l) e.matrices.push_back(random_matrix_with_norm(d, rho_max * u(rng), rng));
  return e;
}

inline gtvlds::SystemEnsemble constant_ensemble(int m, const Eigen::MatrixXd& A) {
  gtvlds::SystemEnsemble e;
  e.d = static_cast<int>(A.rows());
  e.template_tag = "custom";
  e.matrices.assign(m, A);
  return e;
}

}  // namespace testutil
