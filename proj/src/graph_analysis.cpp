#include "gtvlds/graph_analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "gtvlds/error.hpp"

namespace gtvlds {

ScalingFactors scaling_factors(const GraphSpectrum& spec) {
  if (!spec.connected || spec.fiedler <= 0.0)
    throw UsageError("inverse scaling factors need a connected graph");
  ScalingFactors sf;
  if (spec.pinv_D.cols() > 0) {
    sf.mu = spec.pinv_D.colwise().norm().maxCoeff();
    sf.mu_prime = spec.pinv_D.rowwise().norm().maxCoeff();
  }
  sf.fiedler_bound_mu = std::min(std::sqrt(2.0) / spec.fiedler, 1.0 / std::sqrt(spec.fiedler));
  sf.fiedler_bound_mu_prime = 1.0 / std::sqrt(spec.fiedler);
  return sf;
}

std::vector<int> edges_appearing(std::span<const int> T, int d, int num_edges) {
  if (d < 1) throw UsageError("state dimension must be >= 1");
  const int block = d * d;
  std::vector<int> out;
  out.reserve(T.size());
  for (int i : T) {
    if (i < 0 || i >= num_edges * block)
      throw UsageError("lifted index " + std::to_string(i + 1) + " outside [1, " +
                       std::to_string(num_edges * block) + "]");
    out.push_back(i / block);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

CompatReport compat_lower_bound(const Graph& g, std::span<const int> T, int d) {
  CompatReport r;
  r.set_T.assign(T.begin(), T.end());
  std::sort(r.set_T.begin(), r.set_T.end());
  r.set_T.erase(std::unique(r.set_T.begin(), r.set_T.end()), r.set_T.end());
  if (r.set_T.empty()) {
    r.lower_bound = 1.0;
    r.exact_value = 1.0;
    return r;
  }
  r.T_E = edges_appearing(r.set_T, d, g.num_edges());
  const double max_deg = g.max_degree();
  r.lower_bound = 1.0 / (2.0 * std::min(std::sqrt(max_deg), std::sqrt(static_cast<double>(r.T_E.size()))));
  return r;
}

double compat_exact_small(const IncidenceMatrix& inc, std::span<const int> T_in, int d) {
  std::vector<int> T(T_in.begin(), T_in.end());
  std::sort(T.begin(), T.end());
  T.erase(std::unique(T.begin(), T.end()), T.end());
  if (T.empty()) return 1.0;
  const int n = static_cast<int>(T.size());
  const int block = d * d;
  const int dim = inc.num_nodes() * block;
  if (n > kCompatExactMaxSet) throw UsageError("exact compatibility factor limited to |T| <= 14");
  if (dim > kCompatExactMaxDim) throw UsageError("exact compatibility factor limited to m*d^2 <= 200");

  // Each lifted row has two nonzeros: (col_a, sign_a), (col_b, sign_b).
  struct Row {
    int col[2];
    double val[2];
  };
  std::vector<Row> rows(n);
  const Eigen::MatrixXd Dd = inc.dense();
  for (int r = 0; r < n; ++r) {
    if (T[r] < 0 || T[r] >= inc.num_edges() * block) throw UsageError("lifted index out of range");
    const int edge = T[r] / block, coef = T[r] % block;
    int found = 0;
    for (int node = 0; node < inc.num_nodes() && found < 2; ++node) {
      if (Dd(edge, node) != 0.0) {
        rows[r].col[found] = node * block + coef;
        rows[r].val[found] = Dd(edge, node);
        ++found;
      }
    }
    if (found != 2) throw UsageError("incidence row without two nonzeros");
  }

  // Gray-code walk over sign patterns with sigma_0 = +1 fixed (the norm is
  // symmetric under global sign flip).
  std::vector<double> w(dim, 0.0);
  std::vector<int> sigma(n, 1);
  for (int r = 0; r < n; ++r)
    for (int k = 0; k < 2; ++k) w[rows[r].col[k]] += rows[r].val[k];
  auto norm2 = [&] {
    double s = 0.0;
    for (double x : w) s += x * x;
    return s;
  };
  double sq = norm2();
  double best = sq;
  const std::uint64_t patterns = std::uint64_t{1} << (n - 1);
  for (std::uint64_t step = 1; step < patterns; ++step) {
    const int r = 1 + std::countr_zero(step);  // flip row r (never row 0)
    const double delta = -2.0 * sigma[r];
    for (int k = 0; k < 2; ++k) {
      double& x = w[rows[r].col[k]];
      const double nx = x + delta * rows[r].val[k];
      sq += nx * nx - x * x;
      x = nx;
    }
    sigma[r] = -sigma[r];
    if ((step & 0x3ff) == 0) sq = norm2();  // limit drift
    best = std::max(best, sq);
  }
  best = std::max(best, norm2());
  return std::sqrt(static_cast<double>(n)) / std::sqrt(best);
}

double compat_exact_small(const Graph& g, std::span<const int> T, int d) {
  return compat_exact_small(incidence(g), T, d);
}

double cheeger_exact_small(const Graph& g) {
  const int m = g.num_nodes();
  if (m > kCheegerExactMaxNodes) throw UsageError("exact Cheeger constant limited to m <= 20");
  if (m < 2) throw UsageError("Cheeger constant needs m >= 2");
  double best = std::numeric_limits<double>::infinity();
  const std::uint32_t full = (std::uint32_t{1} << m);
  for (std::uint32_t S = 1; S < full; ++S) {
    const int size = std::popcount(S);
    if (2 * size > m) continue;
    int boundary = 0;
    for (const auto& e : g.edges()) {
      const bool in_u = (S >> e.u) & 1u, in_v = (S >> e.v) & 1u;
      boundary += in_u != in_v;
    }
    best = std::min(best, static_cast<double>(boundary) / size);
  }
  return best;
}

}  // namespace gtvlds
