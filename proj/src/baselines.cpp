#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>

#include "gtvlds/error.hpp"
#include "gtvlds/estimators.hpp"

namespace gtvlds {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

FitResult blank_fit(const DesignSystem& ds, const std::string& method, double lambda) {
  FitResult f;
  f.method = method;
  f.m = ds.m;
  f.d = ds.d;
  f.lambda = lambda;
  f.a_hat = Eigen::VectorXd::Zero(ds.dim());
  return f;
}

void put_block(Eigen::VectorXd& a, int node, const Eigen::MatrixXd& A) {
  const auto block = A.size();
  a.segment(node * block, block) = Eigen::Map<const Eigen::VectorXd>(A.data(), block);
}

}  // namespace

FitResult fit_ols_individual(const DesignSystem& ds) {
  FitResult f = blank_fit(ds, "ols_ind", 0.0);
  bool deficient = false;
  for (int l = 0; l < ds.m; ++l) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(ds.Sxx[l]);
    if (cod.rank() < ds.d) deficient = true;
    put_block(f.a_hat, l, ds.Syx[l] * cod.pseudoInverse());
  }
  if (deficient) f.flags.push_back("rank_deficient");
  f.objective = ds.loss(f.a_hat);
  f.kkt_gap = ds.gradient(f.a_hat).lpNorm<Eigen::Infinity>();
  return f;
}

FitResult fit_ols_pooled(const DesignSystem& ds) {
  FitResult f = blank_fit(ds, "ols_pooled", 0.0);
  Eigen::MatrixXd Sxx = Eigen::MatrixXd::Zero(ds.d, ds.d), Syx = Eigen::MatrixXd::Zero(ds.d, ds.d);
  for (int l = 0; l < ds.m; ++l) {
    Sxx += ds.Sxx[l];
    Syx += ds.Syx[l];
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Sxx);
  if (cod.rank() < ds.d) f.flags.push_back("rank_deficient");
  const Eigen::MatrixXd A = Syx * cod.pseudoInverse();
  for (int l = 0; l < ds.m; ++l) put_block(f.a_hat, l, A);
  f.objective = ds.loss(f.a_hat);
  return f;
}

FitResult fit_laplacian(const DesignSystem& ds, const IncidenceMatrix& inc, double lambda) {
  if (lambda < 0) throw UsageError("lambda must be >= 0");
  FitResult f = blank_fit(ds, "laplacian", lambda);
  const SpMat Dtil = lift(inc.D, ds.block());
  const SpMat M = SpMat(ds.gram() / static_cast<double>(ds.m) + 2.0 * lambda * SpMat(Dtil.transpose() * Dtil));
  const Eigen::VectorXd rhs = ds.Qt_response() / static_cast<double>(ds.m);
  Eigen::SimplicialLDLT<SpMat> ldlt(M);
  bool ok = ldlt.info() == Eigen::Success;
  if (ok) {
    f.a_hat = ldlt.solve(rhs);
    ok = f.a_hat.allFinite() &&
         (M * f.a_hat - rhs).lpNorm<Eigen::Infinity>() <= 1e-9 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
  }
  if (!ok) {
    SpMat I(M.rows(), M.cols());
    I.setIdentity();
    ldlt.compute(SpMat(M + 1e-12 * std::max(1.0, M.diagonal().maxCoeff()) * I));
    if (ldlt.info() != Eigen::Success) throw SolverError("Laplacian system factorization failed");
    f.a_hat = ldlt.solve(rhs);
    f.flags.push_back("ridge");
  }
  const Eigen::VectorXd Da = Dtil * f.a_hat;
  f.objective = ds.loss(f.a_hat) + lambda * Da.squaredNorm();
  f.kkt_gap = (M * f.a_hat - rhs).lpNorm<Eigen::Infinity>();
  return f;
}

FitResult fit_laplacian(const DesignSystem& ds, const Graph& g, double lambda) {
  return fit_laplacian(ds, incidence(g), lambda);
}

namespace {

double group_penalty(const Eigen::VectorXd& delta, int m, int block) {
  double total = 0.0;
  for (int c = 0; c < block; ++c) {
    double sq = 0.0;
    for (int l = 0; l < m; ++l) sq += delta[l * block + c] * delta[l * block + c];
    total += std::sqrt(sq);
  }
  return total;
}

void group_shrink(Eigen::VectorXd& v, int m, int block, double t) {
  for (int c = 0; c < block; ++c) {
    double sq = 0.0;
    for (int l = 0; l < m; ++l) sq += v[l * block + c] * v[l * block + c];
    const double norm = std::sqrt(sq);
    const double scale = norm > t ? 1.0 - t / norm : 0.0;
    for (int l = 0; l < m; ++l) v[l * block + c] *= scale;
  }
}

}  // namespace

double group_lasso_lambda_max(const DesignSystem& ds) {
  const FitResult pooled = fit_ols_pooled(ds);
  const Eigen::VectorXd g = ds.gradient(pooled.a_hat);
  const int block = ds.block();
  double best = 0.0;
  for (int c = 0; c < block; ++c) {
    double sq = 0.0;
    for (int l = 0; l < ds.m; ++l) sq += g[l * block + c] * g[l * block + c];
    best = std::max(best, std::sqrt(sq));
  }
  return best;
}

FitResult fit_group_lasso(const DesignSystem& ds, double lambda, const GroupLassoOptions& opts,
                          const FitResult* warm) {
  if (lambda < 0) throw UsageError("lambda must be >= 0");
  FitResult f = blank_fit(ds, "group_lasso", lambda);
  const int m = ds.m, block = ds.block();
  const Eigen::VectorXd pool = fit_ols_pooled(ds).a_hat;

  double lip = 0.0;
  for (const auto& S : ds.Sxx) lip = std::max(lip, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().maxCoeff());
  lip /= m;
  if (lip <= 0.0) lip = 1.0;

  auto smooth = [&](const Eigen::VectorXd& delta) { return ds.loss(pool + delta); };
  auto total = [&](const Eigen::VectorXd& delta) { return smooth(delta) + lambda * group_penalty(delta, m, block); };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(ds.dim());
  if (warm && warm->a_hat.size() == ds.dim()) x = warm->a_hat - pool;
  Eigen::VectorXd x_prev = x, y = x;
  double t = 1.0;
  double F = total(x);
  f.objective_trace.push_back(F);
  double L = lip / 16.0;
  bool converged = false;
  int it = 0;
  for (it = 1; it <= opts.max_iter; ++it) {
    const double fy = smooth(y);
    const Eigen::VectorXd gy = ds.gradient(pool + y);
    Eigen::VectorXd zk;
    while (true) {
      zk = y - gy / L;
      group_shrink(zk, m, block, lambda / L);
      const Eigen::VectorXd step = zk - y;
      if (smooth(zk) <= fy + gy.dot(step) + 0.5 * L * step.squaredNorm() + 1e-15 * std::abs(fy)) break;
      L *= 2.0;
    }
    const double step_norm = (zk - y).lpNorm<Eigen::Infinity>();
    const double Fz = total(zk);
    x_prev = x;
    if (Fz <= F) {
      x = zk;
      F = Fz;
    }
    f.objective_trace.push_back(F);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x + (t / t_next) * (zk - x) + ((t - 1.0) / t_next) * (x - x_prev);
    t = t_next;
    if (step_norm <= opts.tol * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
      converged = true;
      break;
    }
  }
  f.a_hat = pool + x;
  f.objective = F;
  f.iterations = std::min(it, opts.max_iter);
  f.converged = converged;
  if (!converged) f.flags.push_back("not_converged");
  return f;
}

double laplacian_lambda_scale(const DesignSystem& ds, const Graph& g) {
  double top = 0.0;
  for (const auto& S : ds.Sxx) top = std::max(top, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues().maxCoeff());
  const double fiedler = spectrum(g).fiedler;
  if (fiedler <= 0.0) throw UsageError("Laplacian grid needs a connected graph");
  return std::max(top, 1e-12) / (ds.m * fiedler);
}

double theoretical_lambda(const TheoreticalLambdaInputs& in) {
  if (!(in.rho_max >= 0.0 && in.rho_max < 1.0)) throw UsageError("theoretical lambda needs 0 <= rho_max < 1");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw UsageError("delta must lie in (0, 1)");
  if (in.c1 <= 0.0 || in.m < 1 || in.T < 1 || in.d < 1 || in.num_edges < 1)
    throw UsageError("theoretical lambda needs positive c1, m, T, d, |E|");
  const double Delta = (1.0 - in.rho_max) * (1.0 - in.rho_max);
  const double L1 = std::log(in.d * in.T / (in.delta * Delta));
  const double L2 = std::log(in.d * in.num_edges / in.delta);
  const double bracket = std::max(std::pow(in.d, 1.5) * L1, in.mu * L2);
  return in.c1 / in.m * std::sqrt(in.T / Delta) * bracket;
}

}  // namespace gtvlds
