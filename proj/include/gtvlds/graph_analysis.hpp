#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gtvlds/graph.hpp"

namespace gtvlds {

// Column / row norms of the incidence pseudoinverse and their Fiedler bounds.
struct ScalingFactors {
  double mu = 0.0;        // max column l2 norm of pinv(D)
  double mu_prime = 0.0;  // max row l2 norm of pinv(D)
  double fiedler_bound_mu = 0.0;        // min(sqrt(2)/fiedler, 1/sqrt(fiedler))
  double fiedler_bound_mu_prime = 0.0;  // 1/sqrt(fiedler)
};

ScalingFactors scaling_factors(const GraphSpectrum& spec);

// Index sets below are 0-based positions into the lifted edge vector D~a,
// whose length is |E| * d^2 (edge-major, d^2 coefficients per edge).
struct CompatReport {
  std::vector<int> set_T;
  std::vector<int> T_E;
  double lower_bound = 1.0;
  std::optional<double> exact_value;
};

// Edges touched by the lifted index set, sorted and unique.
std::vector<int> edges_appearing(std::span<const int> T, int d, int num_edges);

// kappa_T >= 1 / (2 min(sqrt(max degree), sqrt(|T_E|))); kappa_empty = 1.
CompatReport compat_lower_bound(const Graph& g, std::span<const int> T, int d);

inline constexpr int kCompatExactMaxSet = 14;
inline constexpr int kCompatExactMaxDim = 200;

// Exact kappa_T = sqrt(|T|) / max over sign vectors s of ||(D~_T)^T s||_2.
double compat_exact_small(const IncidenceMatrix& inc, std::span<const int> T, int d);
double compat_exact_small(const Graph& g, std::span<const int> T, int d);

inline constexpr int kCheegerExactMaxNodes = 20;

// Exhaustive min |boundary(S)| / |S| over nonempty S with |S| <= m/2.
double cheeger_exact_small(const Graph& g);

}  // namespace gtvlds
