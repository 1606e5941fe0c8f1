#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gtvlds/graph.hpp"

namespace gtvlds {

struct SystemEnsemble {
  int d = 0;
  std::vector<Eigen::MatrixXd> matrices;  // A*_l, d x d
  std::vector<double> beta_field;         // empty for custom ensembles
  std::string template_tag = "custom";    // "paper2x2" | "custom"

  int num_nodes() const { return static_cast<int>(matrices.size()); }
  double max_spectral_norm() const;
  // a* = (vec(A_1); ...; vec(A_m)), column-major vec.
  Eigen::VectorXd stacked() const;
};

enum class FieldKind { piecewise, smooth };

std::string to_string(FieldKind kind);
FieldKind field_kind_from_string(const std::string& name);

struct FieldSpec {
  FieldKind kind = FieldKind::piecewise;
  double s = 1.0;
  double omega = 0.0;  // smooth only
  // When set, beta is rescaled so that max_edge |beta_u - beta_v| equals it.
  std::optional<double> target_jump;
};

// A*_l = [[beta_l, 0.1], [0, 0.6]] from a piecewise or smooth beta field.
SystemEnsemble gen_ground_truth(const Graph& g, const FieldSpec& field, std::uint64_t seed = 0);

// Three equal contiguous blocks along the Fiedler ordering; block index per node.
std::vector<int> piecewise_groups(const Graph& g);

struct TrajectoryPanel {
  int m = 0;
  int d = 0;
  int T_total = 0;
  std::vector<Eigen::MatrixXd> states;  // per node d x (T_total + 1), column t is x_{l,t}
  std::uint64_t noise_seed = 0;

  Eigen::VectorXd x(int node, int t) const { return states[node].col(t); }
};

struct SimulationOptions {
  bool zero_noise = false;               // test hook
  std::optional<Eigen::VectorXd> x0;     // defaults to 0
};

inline constexpr const char* kNoiseGenerator = "mt19937_64/seed_seq(seed_lo,seed_hi,node)/std::normal_distribution";

TrajectoryPanel simulate_panel(const SystemEnsemble& e, int T_total, std::uint64_t seed,
                               const SimulationOptions& opts = {});

// Gamma_t(A) = sum_{k=0}^t A^k (A^k)^T.
Eigen::MatrixXd grammian(const Eigen::MatrixXd& A, int t);

struct GrammianBundle {
  std::vector<Eigen::MatrixXd> G;  // G_l = sum_{t=1}^T Gamma_{t-1}(A_l)
  Eigen::MatrixXd G_mean;
  double delta_G = 0.0;
  double beta = 0.0;  // max_l ||A~_l||_2
  std::vector<double> beta_per_node;
  double trace_sum = 0.0;       // sum_l sum_{t=0}^{T-1} tr Gamma_t(A_l)
  double max_diag_G = 0.0;      // max_{l,i} (G_l)_{ii}
};

GrammianBundle grammian_bundle(const SystemEnsemble& e, int T);

// Spectral norm of the dT x dT block lower-triangular Toeplitz matrix with
// blocks A^{i-j}. That matrix is the inverse of the block bidiagonal N with
// I on the diagonal and -A below it, so the norm is 1/sqrt(lambda_min(N N^T));
// lambda_min is bracketed by bisection on positive definiteness of the block
// tridiagonal N N^T - sigma I. Cost O(T d^3) per bisection step for any T.
double block_toeplitz_norm(const Eigen::MatrixXd& A, int T);

// Same quantity by matrix-free power iteration on M^T M. Convergence slows
// like T^2 as the top singular values cluster, so only for moderate T.
double block_toeplitz_norm_power(const Eigen::MatrixXd& A, int T, double rel_tol = 1e-12, int max_iter = 2000000);
Eigen::MatrixXd block_toeplitz_dense(const Eigen::MatrixXd& A, int T);

struct LTValue {
  double exact = 0.0;
  double closed_bound = 0.0;
};

// L_T(rho) = 2 sum_{s=1}^{T-1} (T-s) s rho^{2s-1} and its bound 2 rho T / (1-rho^2)^2.
LTValue L_T(double rho, int T);

struct DeltaGBounds {
  double delta_G = 0.0;
  double rho_max = 0.0;
  double frobenius_bound = 0.0;
  std::optional<double> tv_cheeger_bound;
};

// rho_max defaults to max_l ||A_l||_2.
DeltaGBounds deltaG_bounds(const SystemEnsemble& e, const Graph& g, int T,
                           std::optional<double> rho_max = std::nullopt);

}  // namespace gtvlds
