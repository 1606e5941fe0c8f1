#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "gtvlds/error.hpp"
#include "gtvlds/graph.hpp"

using namespace gtvlds;

namespace {
std::vector<std::pair<int, int>> one_based(const Graph& g) {
  std::vector<std::pair<int, int>> out;
  for (const auto& e : g.edges()) out.emplace_back(e.u + 1, e.v + 1);
  return out;
}

void check_moore_penrose(const Graph& g) {
  const auto inc = incidence(g);
  const auto sp = spectrum(inc);
  const Eigen::MatrixXd D = inc.dense();
  const Eigen::MatrixXd& P = sp.pinv_D;
  CHECK((D * P * D - D).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((P * D * P - P).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(((D * P).transpose() - D * P).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(((P * D).transpose() - P * D).cwiseAbs().maxCoeff() < 1e-8);
}
}  // namespace

TEST_CASE("builders produce canonical edge lists") {
  CHECK(one_based(path_graph(3)) == std::vector<std::pair<int, int>>{{1, 2}, {2, 3}});
  CHECK(one_based(star_graph(4, 0)) == std::vector<std::pair<int, int>>{{1, 2}, {1, 3}, {1, 4}});
  CHECK(complete_graph(5).num_edges() == 10);
  const Graph grid = grid2d_graph(3, 2);
  CHECK(grid.num_edges() == 7);
  CHECK(grid.is_connected());
}

TEST_CASE("graph construction errors") {
  CHECK_THROWS_AS(build_graph({GraphKind::path, 0}), UsageError);
  GraphSpec bad_grid{GraphKind::grid2d, 6};
  bad_grid.nx = 4;
  bad_grid.ny = 2;
  CHECK_THROWS_AS(build_graph(bad_grid), UsageError);
  GraphSpec bad_p{GraphKind::erdos_renyi, 10};
  bad_p.p = 0.0;
  CHECK_THROWS_AS(build_graph(bad_p), UsageError);
  bad_p.p = 1.5;
  CHECK_THROWS_AS(build_graph(bad_p), UsageError);
  CHECK_THROWS_AS(Graph(3, {{0, 0}}), UsageError);
  CHECK_THROWS_AS(Graph(3, {{0, 1}, {1, 0}}), UsageError);
}

TEST_CASE("stored edges are oriented low to high") {
  Graph g(3, {{2, 0}, {1, 2}});
  for (const auto& e : g.edges()) CHECK(e.u < e.v);
}

TEST_CASE("erdos-renyi is reproducible from its seed") {
  GraphSpec s{GraphKind::erdos_renyi, 30};
  s.p = 0.2;
  s.seed = 42;
  CHECK(one_based(build_graph(s)) == one_based(build_graph(s)));
  s.seed = 43;
  const auto other = build_graph(s);
  s.seed = 42;
  CHECK(one_based(build_graph(s)) != one_based(other));
}

TEST_CASE("erdos-renyi above the connectivity threshold is usually connected") {
  const int m = 50;
  const double p = std::min(1.0, 8.0 * std::log(m) / m);
  int connected = 0;
  for (int s = 0; s < 100; ++s) connected += erdos_renyi_graph(m, p, 1000 + s).is_connected();
  CHECK(connected >= 95);
}

TEST_CASE("incidence matrix examples") {
  const auto D2 = incidence(path_graph(2)).dense();
  CHECK(D2.rows() == 1);
  CHECK(D2(0, 0) == -1.0);
  CHECK(D2(0, 1) == 1.0);

  Eigen::MatrixXd expect(2, 3);
  expect << -1, 1, 0, -1, 0, 1;
  CHECK(incidence(star_graph(3)).dense() == expect);

  const Graph g = erdos_renyi_graph(12, 0.4, 3);
  const auto inc = incidence(g);
  const Eigen::MatrixXd L = inc.laplacian();
  const auto deg = g.degrees();
  for (int i = 0; i < g.num_nodes(); ++i) CHECK(L(i, i) == doctest::Approx(deg[i]));
  for (int r = 0; r < inc.num_edges(); ++r) {
    CHECK(inc.dense().row(r).sum() == 0.0);
    CHECK(inc.dense().row(r).cwiseAbs().sum() == 2.0);
  }
}

TEST_CASE("laplacian equals degree minus adjacency") {
  const Graph g = grid2d_graph(3, 3);
  Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(9, 9);
  for (const auto& e : g.edges()) {
    ref(e.u, e.v) = ref(e.v, e.u) = -1;
    ref(e.u, e.u) += 1;
    ref(e.v, e.v) += 1;
  }
  CHECK((Eigen::MatrixXd(incidence(g).laplacian()) - ref).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spectrum examples") {
  CHECK(spectrum(complete_graph(6)).fiedler == doctest::Approx(6.0).epsilon(1e-10));
  CHECK(spectrum(star_graph(8)).fiedler == doctest::Approx(1.0).epsilon(1e-10));
  const auto p2 = spectrum(path_graph(2));
  CHECK(p2.fiedler == doctest::Approx(2.0));
  CHECK(p2.pinv_D(0, 0) == doctest::Approx(-0.5));
  CHECK(p2.pinv_D(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("spectrum invariants across generated graphs") {
  std::vector<Graph> graphs{path_graph(7), star_graph(9), complete_graph(5), grid2d_graph(4, 3),
                            connected_erdos_renyi(15, 0.3, 9).first};
  for (const auto& g : graphs) {
    const auto sp = spectrum(g);
    const int m = g.num_nodes();
    CHECK(std::abs(sp.laplacian_eigenvalues(m - 1)) < 1e-9 * m);
    for (int i = 1; i < m; ++i) CHECK(sp.laplacian_eigenvalues(i - 1) >= sp.laplacian_eigenvalues(i));
    CHECK(sp.connected);
    CHECK(sp.fiedler > 0);
    check_moore_penrose(g);
  }
}

TEST_CASE("disconnected graphs report a zero fiedler value") {
  const Graph g(4, {{0, 1}, {2, 3}});
  const auto sp = spectrum(g);
  CHECK_FALSE(sp.connected);
  CHECK(sp.fiedler == 0.0);
  check_moore_penrose(g);
}

TEST_CASE("knn graph examples") {
  std::vector<GeoPoint> line{{0, 0}, {0, 1}, {0, 2}};
  CHECK(one_based(knn_graph(line, 1)) == std::vector<std::pair<int, int>>{{1, 2}, {2, 3}});

  std::vector<GeoPoint> square{{0, 0}, {0, 1}, {1, 1}, {1, 0}};
  const Graph sq = knn_graph(square, 2);
  CHECK(sq.num_edges() == 4);
  CHECK(one_based(sq) == std::vector<std::pair<int, int>>{{1, 2}, {1, 4}, {2, 3}, {3, 4}});

  std::vector<GeoPoint> five{{0, 0}, {3, 1}, {-2, 5}, {7, 7}, {1, -4}};
  CHECK(knn_graph(five, 4).num_edges() == 10);
  CHECK_THROWS_AS(knn_graph(five, 5), UsageError);
}

TEST_CASE("haversine distance") {
  CHECK(haversine_km({0, 0}, {0, 0}) == 0.0);
  // a quarter of a great circle
  CHECK(haversine_km({0, 0}, {0, 90}) == doctest::Approx(6371.0 * M_PI / 2));
}
