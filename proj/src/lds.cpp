#include "gtvlds/lds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gtvlds/error.hpp"
#include "gtvlds/graph_analysis.hpp"

namespace gtvlds {

double SystemEnsemble::max_spectral_norm() const {
  double rho = 0.0;
  for (const auto& A : matrices) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    rho = std::max(rho, svd.singularValues()(0));
  }
  return rho;
}

Eigen::VectorXd SystemEnsemble::stacked() const {
  const int block = d * d;
  Eigen::VectorXd a(num_nodes() * block);
  for (int l = 0; l < num_nodes(); ++l)
    a.segment(l * block, block) = Eigen::Map<const Eigen::VectorXd>(matrices[l].data(), block);
  return a;
}

std::string to_string(FieldKind kind) { return kind == FieldKind::piecewise ? "piecewise" : "smooth"; }

FieldKind field_kind_from_string(const std::string& name) {
  if (name == "piecewise" || name == "pw") return FieldKind::piecewise;
  if (name == "smooth") return FieldKind::smooth;
  throw UsageError("unknown field kind '" + name + "'");
}

std::vector<int> piecewise_groups(const Graph& g) {
  const int m = g.num_nodes();
  std::vector<int> groups(m, 0);
  if (m < 2) return groups;
  Eigen::VectorXd f = spectrum(g).fiedler_vector();
  // fix the eigenvector sign so that node 0 sits on the low side
  if (f[0] > 0) f = -f;
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (std::abs(f[a] - f[b]) > 1e-12) return f[a] < f[b];
    return a < b;
  });
  for (int r = 0; r < m; ++r) groups[order[r]] = std::min(2, (3 * r) / m);
  return groups;
}

SystemEnsemble gen_ground_truth(const Graph& g, const FieldSpec& field, std::uint64_t /*seed*/) {
  if (field.s < 0) throw UsageError("field scale s must be >= 0");
  const int m = g.num_nodes();
  std::vector<double> beta(m, 0.0);
  if (field.kind == FieldKind::piecewise) {
    const auto groups = piecewise_groups(g);
    constexpr double level[3] = {1.0, 0.0, -1.0};
    for (int l = 0; l < m; ++l) beta[l] = field.s * level[groups[l]];
  } else {
    const int side = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(m)) + 1e-12)));
    for (int l = 0; l < m; ++l) {
      const double t1 = l % side, t2 = l / side;
      beta[l] = field.s * std::cos(field.omega * t1) * std::cos(field.omega * t2);
    }
  }

  if (field.target_jump) {
    double jump = 0.0;
    for (const auto& e : g.edges()) jump = std::max(jump, std::abs(beta[e.u] - beta[e.v]));
    if (jump == 0.0) {
      if (*field.target_jump > 0.0)
        throw UsageError("cannot rescale a constant field to a positive jump size");
    } else {
      const double scale = *field.target_jump / jump;
      for (double& b : beta) b *= scale;
    }
  }

  SystemEnsemble e;
  e.d = 2;
  e.template_tag = "paper2x2";
  e.beta_field = beta;
  e.matrices.reserve(m);
  for (int l = 0; l < m; ++l) {
    Eigen::MatrixXd A(2, 2);
    A << beta[l], 0.1, 0.0, 0.6;
    e.matrices.push_back(A);
  }
  return e;
}

TrajectoryPanel simulate_panel(const SystemEnsemble& e, int T_total, std::uint64_t seed,
                               const SimulationOptions& opts) {
  if (T_total < 1) throw UsageError("T_total must be >= 1");
  TrajectoryPanel p;
  p.m = e.num_nodes();
  p.d = e.d;
  p.T_total = T_total;
  p.noise_seed = seed;
  p.states.resize(p.m);
  for (int l = 0; l < p.m; ++l) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(l)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd X(e.d, T_total + 1);
    X.col(0) = opts.x0 ? *opts.x0 : Eigen::VectorXd::Zero(e.d);
    for (int t = 0; t < T_total; ++t) {
      X.col(t + 1) = e.matrices[l] * X.col(t);
      if (!opts.zero_noise)
        for (int i = 0; i < e.d; ++i) X(i, t + 1) += normal(rng);
    }
    p.states[l] = std::move(X);
  }
  return p;
}

Eigen::MatrixXd grammian(const Eigen::MatrixXd& A, int t) {
  if (t < 0) throw UsageError("Grammian horizon must be >= 0");
  const auto d = A.rows();
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Identity(d, d);
  for (int k = 1; k <= t; ++k) {
    power = A * power;
    gamma.noalias() += power * power.transpose();
  }
  return gamma;
}

Eigen::MatrixXd block_toeplitz_dense(const Eigen::MatrixXd& A, int T) {
  const auto d = A.rows();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d * T, d * T);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(d, d);
  for (int k = 0; k < T; ++k) {
    for (int j = 0; j + k < T; ++j) M.block((j + k) * d, j * d, d, d) = power;
    power = A * power;
  }
  return M;
}

namespace {

// y_i = sum_{j<=i} A^{i-j} x_j  via  y_i = A y_{i-1} + x_i
void toeplitz_apply(const Eigen::MatrixXd& A, const Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
  y.col(0) = x.col(0);
  for (Eigen::Index i = 1; i < x.cols(); ++i) y.col(i).noalias() = A * y.col(i - 1) + x.col(i);
}

// z_j = sum_{i>=j} (A^{i-j})^T x_i  via  z_j = A^T z_{j+1} + x_j
void toeplitz_apply_transpose(const Eigen::MatrixXd& At, const Eigen::MatrixXd& x, Eigen::MatrixXd& z) {
  const auto n = x.cols();
  z.col(n - 1) = x.col(n - 1);
  for (Eigen::Index j = n - 2; j >= 0; --j) z.col(j).noalias() = At * z.col(j + 1) + x.col(j);
}

}  // namespace

namespace {

// Is N N^T - sigma I positive definite? Block Cholesky on the tridiagonal
// structure: diagonal blocks I (first) and I + A A^T, sub-diagonal blocks -A.
bool shifted_gram_is_pd(const Eigen::MatrixXd& A, const Eigen::MatrixXd& AAt, int T, double sigma) {
  const auto d = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd S = (1.0 - sigma) * I;
  for (int t = 0;; ++t) {
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 0.0) return false;
    if (t + 1 == T) return true;
    const Eigen::MatrixXd X = llt.matrixL().solve(A.transpose());  // L^{-1} A^T
    S = (1.0 - sigma) * I + AAt - X.transpose() * X;
  }
}

}  // namespace

double block_toeplitz_norm(const Eigen::MatrixXd& A, int T) {
  if (T < 1) throw UsageError("horizon must be >= 1");
  if (A.rows() != A.cols()) throw UsageError("block_toeplitz_norm needs a square matrix");
  if (A.size() == 0) return 1.0;
  const Eigen::MatrixXd AAt = A * A.transpose();
  // lambda_min <= (N N^T)_{00} = 1, and it is positive because N is unit triangular
  double hi = 1.0, lo = 0.5;
  while (!shifted_gram_is_pd(A, AAt, T, lo)) {
    hi = lo;
    lo *= 0.5;
    if (lo < 1e-300) throw SolverError("block Toeplitz norm overflows");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (shifted_gram_is_pd(A, AAt, T, mid) ? lo : hi) = mid;
  }
  return 1.0 / std::sqrt(0.5 * (lo + hi));
}

double block_toeplitz_norm_power(const Eigen::MatrixXd& A, int T, double rel_tol, int max_iter) {
  if (T < 1) throw UsageError("horizon must be >= 1");
  const auto d = A.rows();
  const Eigen::MatrixXd At = A.transpose();
  Eigen::MatrixXd v(d, T), y(d, T), w(d, T);
  for (Eigen::Index c = 0; c < T; ++c)
    for (Eigen::Index r = 0; r < d; ++r) v(r, c) = 1.0 + 1e-3 * static_cast<double>((r + 7 * c) % 13);
  v /= v.norm();

  double sigma2 = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    toeplitz_apply(A, v, y);
    toeplitz_apply_transpose(At, y, w);
    sigma2 = y.squaredNorm();  // v^T (M^T M) v
    const double residual = (w - sigma2 * v).norm();
    if (residual <= rel_tol * sigma2) break;
    v = w / w.norm();
  }
  return std::sqrt(sigma2);
}

GrammianBundle grammian_bundle(const SystemEnsemble& e, int T) {
  if (T < 1) throw UsageError("horizon T must be >= 1");
  const int m = e.num_nodes(), d = e.d;
  GrammianBundle b;
  b.G.reserve(m);
  b.G_mean = Eigen::MatrixXd::Zero(d, d);
  for (const auto& A : e.matrices) {
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
    for (int t = 0; t < T; ++t) {
      if (t > 0) {
        power = A * power;
        gamma.noalias() += power * power.transpose();
      }
      G += gamma;  // accumulates Gamma_t for t = 0..T-1
      b.trace_sum += gamma.trace();
    }
    b.max_diag_G = std::max(b.max_diag_G, G.diagonal().maxCoeff());
    b.G_mean += G;
    b.G.push_back(std::move(G));
    const double beta_l = block_toeplitz_norm(A, T);
    b.beta_per_node.push_back(beta_l);
    b.beta = std::max(b.beta, beta_l);
  }
  if (m > 0) b.G_mean /= m;
  Eigen::MatrixXd dispersion = Eigen::MatrixXd::Zero(d, d);
  for (const auto& G : b.G) dispersion += (G - b.G_mean).cwiseAbs2();
  b.delta_G = std::sqrt(dispersion.maxCoeff());
  return b;
}

LTValue L_T(double rho, int T) {
  if (!(rho >= 0.0 && rho < 1.0)) throw UsageError("L_T needs 0 <= rho < 1");
  if (T < 1) throw UsageError("L_T needs T >= 1");
  LTValue v;
  for (int s = 1; s <= T - 1; ++s) v.exact += static_cast<double>(T - s) * s * std::pow(rho, 2 * s - 1);
  v.exact *= 2.0;
  v.closed_bound = 2.0 * rho * T / ((1.0 - rho * rho) * (1.0 - rho * rho));
  return v;
}

DeltaGBounds deltaG_bounds(const SystemEnsemble& e, const Graph& g, int T, std::optional<double> rho_max) {
  const double rho_actual = e.max_spectral_norm();
  const double rho = rho_max.value_or(rho_actual);
  if (rho >= 1.0 || rho_actual > rho + 1e-12)
    throw UsageError("Delta_G bounds need a stable ensemble with ||A_l||_2 <= rho_max < 1");
  if (e.num_nodes() != g.num_nodes()) throw UsageError("ensemble and graph sizes differ");

  DeltaGBounds out;
  out.rho_max = rho;
  out.delta_G = grammian_bundle(e, T).delta_G;
  const double lt = L_T(rho, T).exact;

  double frob_sq = 0.0, entry_l1 = 0.0;
  for (const auto& edge : g.edges()) {
    const Eigen::MatrixXd diff = e.matrices[edge.u] - e.matrices[edge.v];
    frob_sq += diff.squaredNorm();
    entry_l1 += diff.cwiseAbs().sum();
  }
  const double fiedler = spectrum(g).fiedler;
  if (fiedler <= 0.0) throw UsageError("Delta_G bounds need a connected graph");
  out.frobenius_bound = lt / std::sqrt(fiedler) * std::sqrt(frob_sq);
  if (g.num_nodes() <= kCheegerExactMaxNodes && g.num_nodes() >= 2)
    out.tv_cheeger_bound = lt / cheeger_exact_small(g) * entry_l1;
  return out;
}

}  // namespace gtvlds
