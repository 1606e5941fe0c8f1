#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace gtvlds {

// Nodes are 0-based internally; serialized forms are 1-based.
struct Edge {
  int u = 0;
  int v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class GraphKind { path, grid2d, star, complete, erdos_renyi, knn, custom };

std::string to_string(GraphKind kind);
GraphKind graph_kind_from_string(const std::string& name);

struct GraphSpec {
  GraphKind kind = GraphKind::path;
  int m = 0;
  int nx = 0;  // grid2d
  int ny = 0;  // grid2d
  double p = 0.0;  // erdos_renyi
  std::uint64_t seed = 0;  // erdos_renyi
  int hub = 0;  // star, 0-based
};

class Graph {
 public:
  Graph() = default;
  // Canonicalizes orientation (u < v) and rejects self-loops / duplicates.
  Graph(int m, std::vector<Edge> edges, GraphKind kind = GraphKind::custom);

  int num_nodes() const { return m_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  GraphKind kind() const { return kind_; }

  std::vector<int> degrees() const;
  int max_degree() const;
  bool is_connected() const;

  // Generator parameters, kept for serialization.
  int grid_nx = 0;
  int grid_ny = 0;
  double er_p = 0.0;
  std::optional<std::uint64_t> seed;
  int knn_k = 0;

 private:
  int m_ = 0;
  std::vector<Edge> edges_;
  GraphKind kind_ = GraphKind::custom;
};

Graph build_graph(const GraphSpec& spec);

Graph path_graph(int m);
Graph grid2d_graph(int nx, int ny);
Graph star_graph(int m, int hub = 0);
Graph complete_graph(int m);
Graph erdos_renyi_graph(int m, double p, std::uint64_t seed);

// Resamples with seed+1, seed+2, ... until connected (at most max_tries draws).
// Returns the graph and the number of extra draws; the last draw is returned
// even if still disconnected.
std::pair<Graph, int> connected_erdos_renyi(int m, double p, std::uint64_t seed, int max_tries = 10);

struct GeoPoint {
  double lat = 0.0;  // degrees
  double lon = 0.0;  // degrees
};

double haversine_km(const GeoPoint& a, const GeoPoint& b);

// Undirected union of the directed k-nearest-neighbour relations.
Graph knn_graph(std::span<const GeoPoint> coords, int k);

// |E| x m oriented incidence: row j has -1 at u_j and +1 at v_j.
struct IncidenceMatrix {
  Eigen::SparseMatrix<double> D;

  int num_edges() const { return static_cast<int>(D.rows()); }
  int num_nodes() const { return static_cast<int>(D.cols()); }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(D); }
  Eigen::SparseMatrix<double> laplacian() const { return Eigen::SparseMatrix<double>(D.transpose() * D); }

  // Same graph with the orientation of the listed rows reversed.
  IncidenceMatrix with_flipped_rows(std::span<const int> rows) const;
};

IncidenceMatrix incidence(const Graph& g);

struct GraphSpectrum {
  Eigen::VectorXd laplacian_eigenvalues;  // nonincreasing
  Eigen::MatrixXd eigenvectors;           // columns match laplacian_eigenvalues
  double fiedler = 0.0;
  bool connected = false;
  Eigen::MatrixXd laplacian_pinv;  // m x m
  Eigen::MatrixXd pinv_D;          // m x |E|
  double eigen_residual = 0.0;     // max ||L v - lambda v||

  Eigen::VectorXd fiedler_vector() const;
};

GraphSpectrum spectrum(const IncidenceMatrix& inc);
GraphSpectrum spectrum(const Graph& g);

}  // namespace gtvlds
