#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SparseCholesky>

#include "gtvlds/error.hpp"
#include "gtvlds/estimators.hpp"

namespace gtvlds {

bool FitResult::has_flag(const std::string& f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

double tv_objective(const DesignSystem& ds, const Eigen::SparseMatrix<double>& Dtil, const Eigen::VectorXd& a,
                    double lambda) {
  return ds.loss(a) + lambda * (Dtil * a).lpNorm<1>();
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

struct EdgeEnds {
  int u, v;
};

std::vector<EdgeEnds> edge_ends(const IncidenceMatrix& inc) {
  std::vector<EdgeEnds> ends(inc.num_edges(), EdgeEnds{-1, -1});
  for (int k = 0; k < inc.D.outerSize(); ++k)
    for (SpMat::InnerIterator it(inc.D, k); it; ++it) {
      auto& e = ends[it.row()];
      (e.u < 0 ? e.u : e.v) = static_cast<int>(it.col());
    }
  return ends;
}

// Components of the graph restricted to fused edges, separately for each of
// the `block` coefficients. root[c * m + l] is the representative node.
struct FusedComponents {
  std::vector<int> root;
  std::vector<int> var;  // var[c * m + l] : reduced variable of (c, l)
  int num_vars = 0;
};

FusedComponents fused_components(const std::vector<EdgeEnds>& ends, int m, int block,
                                 const std::vector<char>& fused) {
  FusedComponents fc;
  fc.root.resize(static_cast<size_t>(block) * m);
  fc.var.assign(static_cast<size_t>(block) * m, -1);
  std::vector<int> parent(m);
  for (int c = 0; c < block; ++c) {
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (size_t j = 0; j < ends.size(); ++j)
      if (fused[j * block + c]) {
        int a = find(ends[j].u), b = find(ends[j].v);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    std::vector<int> root_var(m, -1);
    for (int l = 0; l < m; ++l) {
      const int r = find(l);
      fc.root[c * m + l] = r;
      if (root_var[r] < 0) root_var[r] = fc.num_vars++;
      fc.var[c * m + l] = root_var[r];
    }
  }
  return fc;
}

// Given the active set (with signs) and fused set, returns multipliers u with
// u_A = lambda * sign, u_Z = base_Z + B y where B^T B y = r - B^T base_Z makes
// the stationarity equation exact; then clips u_Z into the box.
Eigen::VectorXd certificate_dual(const SpMat& Dtil, const std::vector<EdgeEnds>& ends, int m, int block,
                                 const Eigen::VectorXd& grad, const Eigen::VectorXd& sign, const std::vector<char>& fused,
                                 double lambda, const Eigen::VectorXd& base) {
  const Eigen::Index n_rows = Dtil.rows();
  Eigen::VectorXd u(n_rows);
  Eigen::VectorXd zsel = Eigen::VectorXd::Zero(n_rows);
  for (Eigen::Index i = 0; i < n_rows; ++i) {
    if (fused[i]) {
      u[i] = base[i];
      zsel[i] = 1.0;
    } else {
      u[i] = lambda * sign[i];
    }
  }
  // residual of stationarity g + D~^T u = 0
  Eigen::VectorXd r = -(grad + Dtil.transpose() * u);
  SpMat BtB = SpMat(Dtil.transpose() * zsel.asDiagonal() * Dtil);
  const FusedComponents fc = fused_components(ends, m, block, fused);
  std::vector<Eigen::Triplet<double>> anchor;
  for (int c = 0; c < block; ++c)
    for (int l = 0; l < m; ++l)
      if (fc.root[c * m + l] == l) anchor.emplace_back(l * block + c, l * block + c, 1.0);
  SpMat A(BtB.rows(), BtB.cols());
  A.setFromTriplets(anchor.begin(), anchor.end());
  A += BtB;
  Eigen::SimplicialLDLT<SpMat> ldlt(A);
  if (ldlt.info() == Eigen::Success) {
    Eigen::VectorXd y = ldlt.solve(r);
    Eigen::VectorXd corr = zsel.asDiagonal() * (Dtil * y);
    u += corr;
  }
  for (Eigen::Index i = 0; i < n_rows; ++i)
    if (fused[i]) u[i] = std::clamp(u[i], -lambda, lambda);
  return u;
}

struct PolishOutcome {
  bool accepted = false;
  bool ridge = false;
  Eigen::VectorXd a;
};

// Solves the problem restricted to the fused/active pattern of z exactly.
PolishOutcome polish(const DesignSystem& ds, const SpMat& Dtil, const SpMat& gram_m, const Eigen::VectorXd& rhs0,
                     const std::vector<EdgeEnds>& ends, const Eigen::VectorXd& z, double lambda) {
  const int m = ds.m, block = ds.block();
  std::vector<char> fused(z.size());
  Eigen::VectorXd sign(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    fused[i] = z[i] == 0.0;
    sign[i] = z[i] > 0 ? 1.0 : (z[i] < 0 ? -1.0 : 0.0);
  }
  const FusedComponents fc = fused_components(ends, m, block, fused);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(m) * block);
  for (int l = 0; l < m; ++l)
    for (int c = 0; c < block; ++c) trips.emplace_back(l * block + c, fc.var[c * m + l], 1.0);
  SpMat P(ds.dim(), fc.num_vars);
  P.setFromTriplets(trips.begin(), trips.end());

  SpMat H = SpMat(P.transpose() * gram_m * P);
  Eigen::VectorXd rhs = P.transpose() * (rhs0 - lambda * (Dtil.transpose() * sign));
  PolishOutcome out;
  Eigen::SimplicialLDLT<SpMat> ldlt(H);
  Eigen::VectorXd b;
  bool ok = ldlt.info() == Eigen::Success;
  if (ok) {
    b = ldlt.solve(rhs);
    ok = b.allFinite() && (H * b - rhs).lpNorm<Eigen::Infinity>() <= 1e-9 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
  }
  if (!ok) {
    SpMat I(H.rows(), H.cols());
    I.setIdentity();
    const double ridge = 1e-12 * std::max(1.0, H.diagonal().maxCoeff());
    ldlt.compute(SpMat(H + ridge * I));
    if (ldlt.info() != Eigen::Success) return out;
    b = ldlt.solve(rhs);
    out.ridge = true;
  }
  out.a = P * b;
  const Eigen::VectorXd Da = Dtil * out.a;
  const double tol = 1e-10 * std::max(1.0, out.a.lpNorm<Eigen::Infinity>());
  for (Eigen::Index i = 0; i < Da.size(); ++i)
    if (!fused[i] && sign[i] * Da[i] < -tol) return out;
  out.accepted = true;
  return out;
}

}  // namespace

double tv_kkt_gap(const DesignSystem& ds, const Eigen::SparseMatrix<double>& Dtil, const Eigen::VectorXd& a,
                  double lambda, const Eigen::VectorXd* dual_hint, Eigen::VectorXd* dual_out) {
  const Eigen::VectorXd grad = ds.gradient(a);
  if (lambda == 0.0 || Dtil.rows() == 0) {
    if (dual_out) *dual_out = Eigen::VectorXd::Zero(Dtil.rows());
    return grad.lpNorm<Eigen::Infinity>();
  }
  const Eigen::VectorXd Da = Dtil * a;
  const double act_tol = 1e-9 * std::max(1.0, a.lpNorm<Eigen::Infinity>());
  std::vector<char> fused(Da.size());
  Eigen::VectorXd sign(Da.size());
  for (Eigen::Index i = 0; i < Da.size(); ++i) {
    fused[i] = std::abs(Da[i]) <= act_tol;
    sign[i] = fused[i] ? 0.0 : (Da[i] > 0 ? 1.0 : -1.0);
  }
  // rebuild edge ends from Dtil's block structure
  const int block = ds.block();
  const int num_edges = static_cast<int>(Dtil.rows()) / block;
  std::vector<EdgeEnds> ends(num_edges, EdgeEnds{-1, -1});
  for (int k = 0; k < Dtil.outerSize(); ++k)
    for (SpMat::InnerIterator it(Dtil, k); it; ++it)
      if (it.row() % block == 0) {
        auto& e = ends[it.row() / block];
        (e.u < 0 ? e.u : e.v) = static_cast<int>(it.col()) / block;
      }

  auto gap_of = [&](const Eigen::VectorXd& u) { return (grad + Dtil.transpose() * u).lpNorm<Eigen::Infinity>(); };

  Eigen::VectorXd best = certificate_dual(Dtil, ends, ds.m, block, grad, sign, fused, lambda,
                                          Eigen::VectorXd::Zero(Da.size()));
  double best_gap = gap_of(best);
  if (dual_hint && dual_hint->size() == Da.size()) {
    Eigen::VectorXd hinted = certificate_dual(Dtil, ends, ds.m, block, grad, sign, fused, lambda, *dual_hint);
    const double g = gap_of(hinted);
    if (g < best_gap) {
      best_gap = g;
      best = std::move(hinted);
    }
    Eigen::VectorXd clipped(Da.size());
    for (Eigen::Index i = 0; i < Da.size(); ++i)
      clipped[i] = fused[i] ? std::clamp((*dual_hint)[i], -lambda, lambda) : lambda * sign[i];
    const double gc = gap_of(clipped);
    if (gc < best_gap) {
      best_gap = gc;
      best = std::move(clipped);
    }
  }
  if (dual_out) *dual_out = std::move(best);
  return best_gap;
}

FitResult fit_graph_tv(const DesignSystem& ds, const IncidenceMatrix& inc, double lambda, const SolverOptions& opts,
                       const FitResult* warm) {
  if (lambda < 0) throw UsageError("lambda must be >= 0");
  if (inc.num_nodes() != ds.m) throw UsageError("graph and design have different node counts");
  const int block = ds.block();
  const SpMat Dtil = lift(inc.D, block);
  const SpMat DtilT = Dtil.transpose();
  const SpMat Llift = SpMat(DtilT * Dtil);
  const SpMat gram_m = ds.gram() / static_cast<double>(ds.m);
  const Eigen::VectorXd rhs0 = ds.Qt_response() / static_cast<double>(ds.m);
  const auto ends = edge_ends(inc);

  FitResult res;
  res.method = "graph_tv";
  res.m = ds.m;
  res.d = ds.d;
  res.lambda = lambda;

  double rho = opts.rho;
  Eigen::SimplicialLLT<SpMat> llt;
  bool ridge_flagged = false;
  auto factor = [&] {
    SpMat M = gram_m + rho * Llift;
    llt.compute(M);
    if (llt.info() != Eigen::Success) {
      SpMat I(M.rows(), M.cols());
      I.setIdentity();
      llt.compute(SpMat(M + 1e-12 * std::max(1.0, M.diagonal().maxCoeff()) * I));
      if (llt.info() != Eigen::Success) throw SolverError("a-update factorization failed");
      ridge_flagged = true;
    }
  };
  factor();

  Eigen::VectorXd a = Eigen::VectorXd::Zero(ds.dim());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(Dtil.rows());
  if (warm && warm->a_hat.size() == ds.dim()) {
    a = warm->a_hat;
    if (warm->dual.size() == Dtil.rows()) w = warm->dual / rho;
  }
  Eigen::VectorXd z = Dtil * a;
  if (lambda > 0)
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = soft_threshold(z[i] + w[i], lambda / rho);

  auto finish = [&](Eigen::VectorXd a_final, int iters, double r, double s, bool converged) {
    res.a_hat = std::move(a_final);
    res.iterations = iters;
    res.primal_residual = r;
    res.dual_residual = s;
    Eigen::VectorXd hint = rho * w;
    res.kkt_gap = tv_kkt_gap(ds, Dtil, res.a_hat, lambda, &hint, &res.dual);
    res.objective = tv_objective(ds, Dtil, res.a_hat, lambda);
    res.converged = converged && res.kkt_gap <= opts.kkt_tol;
    if (!res.converged) res.flags.push_back("not_converged");
    if (ridge_flagged) res.flags.push_back("ridge");
    return res;
  };

  std::vector<signed char> last_pattern;
  int adaptations = 0;
  double r_norm = 0.0, s_norm = 0.0;
  Eigen::VectorXd z_old, Da;
  for (int it = 1; it <= opts.max_iter; ++it) {
    a = llt.solve(rhs0 + rho * (DtilT * (z - w)));
    Da = Dtil * a;
    z_old = z;
    z = Da + w;
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = soft_threshold(z[i], lambda / rho);
    w += Da - z;

    r_norm = (Da - z).lpNorm<Eigen::Infinity>();
    s_norm = rho * (DtilT * (z - z_old)).lpNorm<Eigen::Infinity>();
    const double eps_pri = opts.tol_primal * std::max({1.0, Da.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>()});
    const double eps_dual = opts.tol_dual * std::max(1.0, rho * (DtilT * w).lpNorm<Eigen::Infinity>());
    const bool admm_done = r_norm <= eps_pri && s_norm <= eps_dual;

    if (opts.polish && (it % 10 == 0 || admm_done || it == 1)) {
      std::vector<signed char> pattern(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) pattern[i] = static_cast<signed char>((z[i] > 0) - (z[i] < 0));
      if (pattern != last_pattern) {
        last_pattern = std::move(pattern);
        PolishOutcome p = polish(ds, Dtil, gram_m, rhs0, ends, z, lambda);
        if (p.accepted) {
          Eigen::VectorXd hint = rho * w;
          const double gap = tv_kkt_gap(ds, Dtil, p.a, lambda, &hint);
          if (gap <= opts.kkt_tol) {
            if (p.ridge) res.flags.push_back("ridge");
            res.flags.push_back("polished");
            return finish(std::move(p.a), it, 0.0, gap, true);
          }
        }
      }
    }
    if (admm_done) {
      Eigen::VectorXd hint = rho * w;
      if (tv_kkt_gap(ds, Dtil, a, lambda, &hint) <= opts.kkt_tol) return finish(a, it, r_norm, s_norm, true);
    }

    if (it % 10 == 0 && adaptations < opts.max_rho_adaptations) {
      const double rp = r_norm / eps_pri, sd = s_norm / eps_dual;
      double factor_change = 1.0;
      if (rp > 10.0 * sd) factor_change = 2.0;
      else if (sd > 10.0 * rp) factor_change = 0.5;
      if (factor_change != 1.0) {
        rho *= factor_change;
        w /= factor_change;
        ++adaptations;
        factor();
      }
    }
  }
  return finish(a, opts.max_iter, r_norm, s_norm, false);
}

FitResult fit_graph_tv(const DesignSystem& ds, const Graph& g, double lambda, const SolverOptions& opts,
                       const FitResult* warm) {
  return fit_graph_tv(ds, incidence(g), lambda, opts, warm);
}

double lambda_max(const DesignSystem& ds, const IncidenceMatrix& inc) {
  if (inc.num_edges() == 0) return 0.0;
  const GraphSpectrum spec = spectrum(inc);
  if (!spec.connected) throw UsageError("lambda_max needs a connected graph");
  const FitResult pooled = fit_ols_pooled(ds);
  const Eigen::VectorXd g = ds.gradient(pooled.a_hat);
  const int block = ds.block();
  // ((pinv D)^T kron I) g, coefficient by coefficient
  double best = 0.0;
  Eigen::VectorXd gc(ds.m);
  for (int c = 0; c < block; ++c) {
    for (int l = 0; l < ds.m; ++l) gc[l] = g[l * block + c];
    best = std::max(best, (spec.pinv_D.transpose() * gc).lpNorm<Eigen::Infinity>());
  }
  return best;
}

double lambda_max(const DesignSystem& ds, const Graph& g) { return lambda_max(ds, incidence(g)); }

}  // namespace gtvlds
