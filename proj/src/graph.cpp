#include "gtvlds/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "gtvlds/error.hpp"

namespace gtvlds {

std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::path: return "path";
    case GraphKind::grid2d: return "grid2d";
    case GraphKind::star: return "star";
    case GraphKind::complete: return "complete";
    case GraphKind::erdos_renyi: return "erdos_renyi";
    case GraphKind::knn: return "knn";
    case GraphKind::custom: return "custom";
  }
  return "custom";
}

GraphKind graph_kind_from_string(const std::string& name) {
  if (name == "path" || name == "chain") return GraphKind::path;
  if (name == "grid2d" || name == "grid") return GraphKind::grid2d;
  if (name == "star") return GraphKind::star;
  if (name == "complete") return GraphKind::complete;
  if (name == "erdos_renyi" || name == "er") return GraphKind::erdos_renyi;
  if (name == "knn") return GraphKind::knn;
  if (name == "custom") return GraphKind::custom;
  throw UsageError("unknown graph kind '" + name + "'");
}

Graph::Graph(int m, std::vector<Edge> edges, GraphKind kind) : m_(m), kind_(kind) {
  if (m < 1) throw UsageError("graph needs at least one node");
  std::set<Edge> seen;
  edges_.reserve(edges.size());
  for (auto e : edges) {
    if (e.u < 0 || e.v < 0 || e.u >= m || e.v >= m)
      throw UsageError("edge endpoint out of range");
    if (e.u == e.v) throw UsageError("self-loop at node " + std::to_string(e.u + 1));
    if (e.u > e.v) std::swap(e.u, e.v);
    if (!seen.insert(e).second)
      throw UsageError("duplicate edge (" + std::to_string(e.u + 1) + "," + std::to_string(e.v + 1) + ")");
    edges_.push_back(e);
  }
}

std::vector<int> Graph::degrees() const {
  std::vector<int> deg(m_, 0);
  for (const auto& e : edges_) {
    ++deg[e.u];
    ++deg[e.v];
  }
  return deg;
}

int Graph::max_degree() const {
  auto deg = degrees();
  return deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
}

bool Graph::is_connected() const {
  std::vector<int> parent(m_);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = m_;
  for (const auto& e : edges_) {
    int a = find(e.u), b = find(e.v);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

Graph path_graph(int m) {
  if (m < 1) throw UsageError("path graph needs m >= 1");
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < m; ++i) edges.push_back({i, i + 1});
  return Graph(m, std::move(edges), GraphKind::path);
}

Graph grid2d_graph(int nx, int ny) {
  if (nx < 1 || ny < 1) throw UsageError("grid dimensions must be positive");
  // node index = x + nx * y
  std::vector<Edge> edges;
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      int id = x + nx * y;
      if (x + 1 < nx) edges.push_back({id, id + 1});
      if (y + 1 < ny) edges.push_back({id, id + nx});
    }
  }
  Graph g(nx * ny, std::move(edges), GraphKind::grid2d);
  g.grid_nx = nx;
  g.grid_ny = ny;
  return g;
}

Graph star_graph(int m, int hub) {
  if (m < 1) throw UsageError("star graph needs m >= 1");
  if (hub < 0 || hub >= m) throw UsageError("star hub out of range");
  std::vector<Edge> edges;
  for (int i = 0; i < m; ++i)
    if (i != hub) edges.push_back({std::min(hub, i), std::max(hub, i)});
  return Graph(m, std::move(edges), GraphKind::star);
}

Graph complete_graph(int m) {
  if (m < 1) throw UsageError("complete graph needs m >= 1");
  std::vector<Edge> edges;
  for (int u = 0; u < m; ++u)
    for (int v = u + 1; v < m; ++v) edges.push_back({u, v});
  return Graph(m, std::move(edges), GraphKind::complete);
}

Graph erdos_renyi_graph(int m, double p, std::uint64_t seed) {
  if (m < 1) throw UsageError("Erdos-Renyi graph needs m >= 1");
  if (!(p > 0.0 && p <= 1.0)) throw UsageError("Erdos-Renyi p must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<Edge> edges;
  for (int u = 0; u < m; ++u)
    for (int v = u + 1; v < m; ++v)
      if (coin(rng)) edges.push_back({u, v});
  Graph g(m, std::move(edges), GraphKind::erdos_renyi);
  g.er_p = p;
  g.seed = seed;
  return g;
}

std::pair<Graph, int> connected_erdos_renyi(int m, double p, std::uint64_t seed, int max_tries) {
  Graph g = erdos_renyi_graph(m, p, seed);
  int extra = 0;
  while (!g.is_connected() && extra < max_tries) {
    ++extra;
    g = erdos_renyi_graph(m, p, seed + static_cast<std::uint64_t>(extra));
  }
  return {std::move(g), extra};
}

Graph build_graph(const GraphSpec& spec) {
  if (spec.m < 1) throw UsageError("graph needs at least one node");
  switch (spec.kind) {
    case GraphKind::path: return path_graph(spec.m);
    case GraphKind::grid2d:
      if (spec.nx * spec.ny != spec.m)
        throw UsageError("grid dimensions " + std::to_string(spec.nx) + "x" + std::to_string(spec.ny) +
                         " do not multiply to m=" + std::to_string(spec.m));
      return grid2d_graph(spec.nx, spec.ny);
    case GraphKind::star: return star_graph(spec.m, spec.hub);
    case GraphKind::complete: return complete_graph(spec.m);
    case GraphKind::erdos_renyi: return erdos_renyi_graph(spec.m, spec.p, spec.seed);
    case GraphKind::knn:
    case GraphKind::custom: break;
  }
  throw UsageError(to_string(spec.kind) + " graphs need explicit input (coordinates or edge list)");
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  constexpr double kEarthRadiusKm = 6371.0;
  constexpr double kDeg = M_PI / 180.0;
  double dlat = (b.lat - a.lat) * kDeg;
  double dlon = (b.lon - a.lon) * kDeg;
  double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
             std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

Graph knn_graph(std::span<const GeoPoint> coords, int k) {
  const int m = static_cast<int>(coords.size());
  if (k < 1) throw UsageError("knn needs k >= 1");
  if (k >= m) throw UsageError("knn needs k < number of points");
  for (const auto& c : coords)
    if (!std::isfinite(c.lat) || !std::isfinite(c.lon)) throw UsageError("non-finite coordinate");

  std::set<Edge> edges;
  std::vector<std::pair<double, int>> order;
  for (int i = 0; i < m; ++i) {
    order.clear();
    for (int j = 0; j < m; ++j)
      if (j != i) order.emplace_back(haversine_km(coords[i], coords[j]), j);
    // ties resolved by smaller node index
    std::partial_sort(order.begin(), order.begin() + k, order.end());
    for (int r = 0; r < k; ++r) {
      int j = order[r].second;
      edges.insert({std::min(i, j), std::max(i, j)});
    }
  }
  Graph g(m, std::vector<Edge>(edges.begin(), edges.end()), GraphKind::knn);
  g.knn_k = k;
  return g;
}

IncidenceMatrix incidence(const Graph& g) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * g.edges().size());
  for (int j = 0; j < g.num_edges(); ++j) {
    trips.emplace_back(j, g.edges()[j].u, -1.0);
    trips.emplace_back(j, g.edges()[j].v, 1.0);
  }
  IncidenceMatrix inc;
  inc.D.resize(g.num_edges(), g.num_nodes());
  inc.D.setFromTriplets(trips.begin(), trips.end());
  return inc;
}

IncidenceMatrix IncidenceMatrix::with_flipped_rows(std::span<const int> rows) const {
  Eigen::VectorXd sign = Eigen::VectorXd::Ones(D.rows());
  for (int r : rows) sign[r] = -sign[r];
  IncidenceMatrix out;
  out.D = sign.asDiagonal() * D;
  return out;
}

Eigen::VectorXd GraphSpectrum::fiedler_vector() const {
  const auto m = eigenvectors.cols();
  if (m < 2) return Eigen::VectorXd::Zero(m);
  return eigenvectors.col(m - 2);
}

GraphSpectrum spectrum(const IncidenceMatrix& inc) {
  const int m = inc.num_nodes();
  Eigen::MatrixXd L = Eigen::MatrixXd(inc.laplacian());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L);
  if (eig.info() != Eigen::Success) throw SolverError("Laplacian eigendecomposition failed");

  GraphSpectrum s;
  s.laplacian_eigenvalues = eig.eigenvalues().reverse();
  s.eigenvectors = eig.eigenvectors().rowwise().reverse();
  s.eigen_residual = (L * s.eigenvectors - s.eigenvectors * s.laplacian_eigenvalues.asDiagonal())
                         .cwiseAbs()
                         .maxCoeff();

  const double scale = std::max(1.0, s.laplacian_eigenvalues.size() ? s.laplacian_eigenvalues[0] : 1.0);
  const double zero_tol = 1e-9 * m * scale;
  int zeros = 0;
  s.laplacian_pinv = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    double ev = s.laplacian_eigenvalues[i];
    if (std::abs(ev) <= zero_tol) {
      ++zeros;
      continue;
    }
    s.laplacian_pinv.noalias() += (1.0 / ev) * s.eigenvectors.col(i) * s.eigenvectors.col(i).transpose();
  }
  s.connected = zeros == 1;
  s.fiedler = (m >= 2 && s.connected) ? s.laplacian_eigenvalues[m - 2] : 0.0;
  s.pinv_D = s.laplacian_pinv * Eigen::MatrixXd(inc.D.transpose());
  return s;
}

GraphSpectrum spectrum(const Graph& g) { return spectrum(incidence(g)); }

}  // namespace gtvlds
