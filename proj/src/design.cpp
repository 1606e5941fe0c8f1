#include "gtvlds/design.hpp"

#include "gtvlds/error.hpp"

namespace gtvlds {

DesignSystem build_design(const TrajectoryPanel& panel, int t_start, int t_end) {
  if (t_end - t_start < 1) throw UsageError("design range is empty");
  if (t_start < 0 || t_end > panel.T_total)
    throw UsageError("design range [" + std::to_string(t_start) + ", " + std::to_string(t_end) +
                     "] outside panel of length " + std::to_string(panel.T_total));
  DesignSystem ds;
  ds.m = panel.m;
  ds.d = panel.d;
  ds.T = t_end - t_start;
  for (int l = 0; l < panel.m; ++l) {
    Eigen::MatrixXd X = panel.states[l].middleCols(t_start, ds.T);
    Eigen::MatrixXd Xt = panel.states[l].middleCols(t_start + 1, ds.T);
    ds.Sxx.push_back(X * X.transpose());
    ds.Syx.push_back(Xt * X.transpose());
    ds.Syy.push_back(Xt.squaredNorm());
    ds.X.push_back(std::move(X));
    ds.Xt.push_back(std::move(Xt));
  }
  return ds;
}

Eigen::SparseMatrix<double> DesignSystem::Q() const {
  std::vector<Eigen::Triplet<double>> trips;
  const int rows_per_node = T * d;
  for (int l = 0; l < m; ++l) {
    // (X^T kron I_d)[(t, i), (j, i)] = X(j, t)
    for (int t = 0; t < T; ++t)
      for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
          trips.emplace_back(l * rows_per_node + t * d + i, l * block() + j * d + i, X[l](j, t));
  }
  Eigen::SparseMatrix<double> q(m * rows_per_node, dim());
  q.setFromTriplets(trips.begin(), trips.end());
  return q;
}

Eigen::VectorXd DesignSystem::response() const {
  Eigen::VectorXd y(m * T * d);
  for (int l = 0; l < m; ++l) y.segment(l * T * d, T * d) = Eigen::Map<const Eigen::VectorXd>(Xt[l].data(), T * d);
  return y;
}

Eigen::SparseMatrix<double> DesignSystem::gram() const {
  std::vector<Eigen::Triplet<double>> trips;
  for (int l = 0; l < m; ++l)
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q)
        if (Sxx[l](p, q) != 0.0)
          for (int i = 0; i < d; ++i) trips.emplace_back(l * block() + p * d + i, l * block() + q * d + i, Sxx[l](p, q));
  Eigen::SparseMatrix<double> g(dim(), dim());
  g.setFromTriplets(trips.begin(), trips.end());
  return g;
}

Eigen::VectorXd DesignSystem::Qt_response() const {
  Eigen::VectorXd b(dim());
  for (int l = 0; l < m; ++l) b.segment(l * block(), block()) = Eigen::Map<const Eigen::VectorXd>(Syx[l].data(), block());
  return b;
}

double DesignSystem::loss(const Eigen::VectorXd& a) const {
  double total = 0.0;
  for (int l = 0; l < m; ++l) {
    Eigen::Map<const Eigen::MatrixXd> A(a.data() + l * block(), d, d);
    // ||Xt - A X||^2 = ||Xt||^2 - 2 tr(A^T Syx) + tr(A Sxx A^T)
    total += Syy[l] - 2.0 * (A.cwiseProduct(Syx[l])).sum() + (A * Sxx[l]).cwiseProduct(A).sum();
  }
  return total / (2.0 * m);
}

Eigen::VectorXd DesignSystem::gradient(const Eigen::VectorXd& a) const {
  Eigen::VectorXd g(dim());
  for (int l = 0; l < m; ++l) {
    Eigen::Map<const Eigen::MatrixXd> A(a.data() + l * block(), d, d);
    Eigen::MatrixXd G = (A * Sxx[l] - Syx[l]) / m;
    g.segment(l * block(), block()) = Eigen::Map<const Eigen::VectorXd>(G.data(), block());
  }
  return g;
}

Eigen::SparseMatrix<double> lift(const Eigen::SparseMatrix<double>& D, int block) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(D.nonZeros() * block);
  for (int k = 0; k < D.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(D, k); it; ++it)
      for (int c = 0; c < block; ++c)
        trips.emplace_back(static_cast<int>(it.row()) * block + c, static_cast<int>(it.col()) * block + c, it.value());
  Eigen::SparseMatrix<double> out(D.rows() * block, D.cols() * block);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

Eigen::MatrixXd unstack(const Eigen::VectorXd& a, int d, int node) {
  return Eigen::Map<const Eigen::MatrixXd>(a.data() + node * d * d, d, d);
}

double prediction_mse(const Eigen::VectorXd& a, const DesignSystem& ds) {
  double total = 0.0;
  for (int l = 0; l < ds.m; ++l) total += (unstack(a, ds.d, l) * ds.X[l] - ds.Xt[l]).squaredNorm();
  return total / (static_cast<double>(ds.m) * ds.T);
}

}  // namespace gtvlds
