#include <cmath>
#include <limits>

#include "gtvlds/error.hpp"
#include "gtvlds/estimators.hpp"

namespace gtvlds {

std::vector<double> geometric_grid(double top, int n, double floor_ratio) {
  if (n < 2) throw UsageError("grid size must be >= 2");
  if (n > kMaxGridSize) throw UsageError("grid size capped at 200");
  if (!(top > 0.0) || !(floor_ratio > 0.0 && floor_ratio < 1.0)) throw UsageError("invalid grid endpoints");
  std::vector<double> grid(n);
  const double log_ratio = std::log(floor_ratio);
  for (int i = 0; i < n; ++i) grid[i] = top * std::exp(log_ratio * i / (n - 1));
  grid[0] = top;
  return grid;
}

int select_min(const std::vector<double>& metric) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(metric.size()); ++i)
    if (metric[i] < metric[best]) best = i;
  return best;
}

namespace {

template <class FitFn>
PathResult run_path(std::vector<double> lambdas, const DesignSystem& val, FitFn&& fit_one) {
  PathResult path;
  path.lambdas = std::move(lambdas);
  const FitResult* prev = nullptr;
  for (double lambda : path.lambdas) {
    FitResult fit;
    try {
      fit = fit_one(lambda, prev);
    } catch (const SolverError& e) {
      fit.lambda = lambda;
      fit.converged = false;
      fit.flags.push_back("solver_error");
    }
    const double metric = fit.a_hat.size() ? prediction_mse(fit.a_hat, val) : std::numeric_limits<double>::infinity();
    path.selection_metric.push_back(metric);
    path.fits.push_back(std::move(fit));
    prev = path.fits.back().a_hat.size() ? &path.fits.back() : nullptr;
  }
  path.selected_index = select_min(path.selection_metric);
  return path;
}

}  // namespace

PathResult regularization_path(const DesignSystem& ds, const Graph& g, int grid_size, const DesignSystem& val,
                               const SolverOptions& opts) {
  const IncidenceMatrix inc = incidence(g);
  double top = lambda_max(ds, inc);
  if (!(top > 0.0)) top = 1e-12 * std::max(1.0, (ds.Qt_response() / ds.m).lpNorm<Eigen::Infinity>());
  auto lambdas = geometric_grid(top, grid_size);
  // warm starts carry state, so the path is walked sequentially
  return run_path(std::move(lambdas), val, [&](double lambda, const FitResult* prev) {
    return fit_graph_tv(ds, inc, lambda, opts, prev);
  });
}

PathResult laplacian_path(const DesignSystem& ds, const Graph& g, int grid_size, const DesignSystem& val) {
  const IncidenceMatrix inc = incidence(g);
  const double scale = laplacian_lambda_scale(ds, g);
  auto lambdas = geometric_grid(1e3 * scale, grid_size, 1e-7);
  return run_path(std::move(lambdas), val,
                  [&](double lambda, const FitResult*) { return fit_laplacian(ds, inc, lambda); });
}

PathResult group_lasso_path(const DesignSystem& ds, int grid_size, const DesignSystem& val) {
  double top = group_lasso_lambda_max(ds);
  if (!(top > 0.0)) top = 1e-12;
  auto lambdas = geometric_grid(top, grid_size);
  return run_path(std::move(lambdas), val, [&](double lambda, const FitResult* prev) {
    return fit_group_lasso(ds, lambda, {}, prev);
  });
}

}  // namespace gtvlds
