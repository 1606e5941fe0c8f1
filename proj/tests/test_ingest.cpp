#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gtvlds/error.hpp"
#include "gtvlds/ingest.hpp"

using namespace gtvlds;
using namespace std::chrono;

namespace {
StationTable parse(const std::string& text) {
  std::istringstream in(text);
  return load_station_csv(in, "fixture.csv");
}

// One station, consecutive days from 2020-01-01; NaN entries are left out of the file.
std::string one_station(const std::vector<double>& ys, const std::string& id = "A") {
  std::string s = "station_id,date,value,lat,lon\n";
  for (size_t i = 0; i < ys.size(); ++i) {
    if (std::isnan(ys[i])) continue;
    s += id + "," + format_iso_date(sys_days{2020y / January / 1} + days{static_cast<int>(i)}) + "," +
         std::to_string(ys[i]) + ",40.0,-75.0\n";
  }
  return s;
}

bool same_table(const StationTable& a, const StationTable& b) {
  if (a.num_stations() != b.num_stations() || a.num_days != b.num_days || a.start != b.start) return false;
  for (int s = 0; s < a.num_stations(); ++s)
    if (a.values[s] != b.values[s] || a.stations[s].id != b.stations[s].id) return false;
  return a.flags == b.flags;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

TEST_CASE("well-formed file with two stations") {
  const auto t = parse(
      "station_id,date,value,lat,lon\n"
      "A,2020-01-01,1.5,40.0,-75.0\n"
      "A,2020-01-02,2.5,40.0,-75.0\n"
      "A,2020-01-03,3.5,40.0,-75.0\n"
      "B,2020-01-01,4,41.0,-74.0\n"
      "B,2020-01-02,5,41.0,-74.0\n"
      "B,2020-01-03,6,41.0,-74.0\n");
  CHECK(t.num_stations() == 2);
  CHECK(t.num_days == 3);
  CHECK(t.values[0] == std::vector<double>{1.5, 2.5, 3.5});
  CHECK(t.values[1] == std::vector<double>{4, 5, 6});
  CHECK(t.stations[1].lat == 41.0);
}

TEST_CASE("out-of-order dates are sorted") {
  const auto t = parse(
      "date,value,station_id,lon,lat\n"
      "2020-01-03,3,A,0,0\n"
      "2020-01-01,1,A,0,0\n"
      "2020-01-02,2,A,0,0\n");
  CHECK(t.values[0] == std::vector<double>{1, 2, 3});
  CHECK(format_iso_date(t.start) == "2020-01-01");
}

TEST_CASE("duplicate key names station and date") {
  try {
    parse("station_id,date,value,lat,lon\nA,2020-01-01,1,0,0\nA,2020-01-01,2,0,0\n");
    FAIL("expected a duplicate error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("station A") != std::string::npos);
    CHECK(msg.find("2020-01-01") != std::string::npos);
  }
}

TEST_CASE("malformed rows report their line number") {
  try {
    parse("station_id,date,value,lat,lon\nA,2020-01-01,1,0,0\nA,2020-13-01,2,0,0\n");
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("fixture.csv:3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("station_id,date,value,lat,lon\nA,2020-01-01,x,0,0\n"), DataError);
  CHECK_THROWS_AS(parse("station_id,date,value,lat\nA,2020-01-01,1,0\n"), DataError);
  CHECK_THROWS_AS(parse("station_id,date,value,lat,lon\nA,2020-01-01,1,0\n"), DataError);
}

TEST_CASE("drop column marks readings missing") {
  const auto t = parse("station_id,date,value,lat,lon,drop\nA,2020-01-01,1,0,0,0\nA,2020-01-02,9,0,0,1\nA,2020-01-03,3,0,0,\n");
  CHECK(std::isnan(t.values[0][1]));
  CHECK(t.values[0][2] == 3);
}

TEST_CASE("transforms") {
  const auto t = parse(one_station({0, 1, std::exp(1.0) - 1}));
  PreprocessOptions o;
  o.transform = Transform::loglog;
  const auto p = preprocess_series(t, o);
  CHECK(p.values[0][0] == doctest::Approx(std::log(std::log(1 + kLogGuard))));
  CHECK(p.values[0][1] == doctest::Approx(std::log(std::log(2.0))));
  CHECK(p.values[0][2] == doctest::Approx(0.0).epsilon(1e-6));
  bool guarded = false;
  for (const auto& f : p.flags) guarded |= f.rfind("log_guard:A:2020-01-01", 0) == 0;
  CHECK(guarded);

  o.transform = Transform::log;
  CHECK(preprocess_series(parse(one_station({2, 4})), o).values[0][1] == doctest::Approx(std::log(4.0)));
  CHECK_THROWS_AS(preprocess_series(parse(one_station({-1, 4})), o), DataError);
}

TEST_CASE("coverage filter and LOCF") {
  // 10 days; station B observes only 6
  std::string s = one_station({5, kNaN, kNaN, 7, 8, 9, 10, 11, 12, 13}, "A");
  const std::string b = one_station({1, 2, 3, kNaN, kNaN, kNaN, kNaN, 8, 9, 10}, "B");
  s += b.substr(b.find('\n') + 1);
  const auto t = parse(s);
  PreprocessOptions o;
  const auto p = preprocess_series(t, o);
  REQUIRE(p.num_stations() == 1);
  CHECK(p.stations[0].id == "A");
  CHECK(p.values[0][1] == 5);
  CHECK(p.values[0][2] == 5);

  o.coverage_min = 0.5;
  CHECK(preprocess_series(t, o).num_stations() == 2);
}

TEST_CASE("station count is monotone in the coverage threshold") {
  std::string s;
  for (int k = 0; k < 6; ++k) {
    std::vector<double> ys(20, 1.0);
    for (int i = 0; i < 3 * k; ++i) ys[19 - i] = kNaN;
    const auto block = one_station(ys, "S" + std::to_string(k));
    s += k == 0 ? block : block.substr(block.find('\n') + 1);
  }
  const auto t = parse(s);
  int prev = 1 << 30;
  for (double c : {0.0, 0.2, 0.4, 0.6, 0.75, 0.9, 1.0}) {
    PreprocessOptions o;
    o.coverage_min = c;
    const int n = preprocess_series(t, o).num_stations();
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("leading gaps take the first observation and are flagged") {
  std::string text = one_station({kNaN, 4, 5, 6, 7, 8, 9, 10}, "A");
  const std::string b = one_station({1, 2, 3, 4, 5, 6, 7, 8}, "B");
  text += b.substr(b.find('\n') + 1);
  const auto p = preprocess_series(parse(text), {});
  REQUIRE(p.num_stations() == 2);
  CHECK(p.values[0][0] == 4);
  CHECK(p.values[0][1] == 4);
  CHECK(std::find(p.flags.begin(), p.flags.end(), "leading_fill:A") != p.flags.end());
}

TEST_CASE("target-year missingness filter") {
  std::vector<double> ys(366, 1.0);
  for (int i = 0; i < 20; ++i) ys[100 + i] = kNaN;  // ~5.5% of 2020 missing
  PreprocessOptions o;
  o.year = 2020;
  const auto t = parse(one_station(ys));
  CHECK(preprocess_series(t, o).num_stations() == 0);
  o.year_missing_max = 0.06;
  CHECK(preprocess_series(t, o).num_stations() == 1);
}

TEST_CASE("preprocessing is idempotent") {
  std::string s = one_station({0, kNaN, 3, 4, kNaN, 6, 7, 8}, "A");
  const std::string b = one_station({kNaN, 2, 2, 5, 1, 0, 9, 3}, "B");
  s += b.substr(b.find('\n') + 1);
  PreprocessOptions o;
  o.transform = Transform::loglog;
  const auto once = preprocess_series(parse(s), o);
  const auto twice = preprocess_series(once, o);
  CHECK(same_table(once, twice));
  o.transform = Transform::log;
  CHECK_THROWS_AS(preprocess_series(once, o), UsageError);
}

TEST_CASE("lag embedding") {
  const auto p = preprocess_series(parse(one_station({1, 2, 3, 4})), {});
  const auto panel = to_lds_panel(p, p.date(0), p.date(3));
  REQUIRE(panel.T_total + 1 == 3);
  CHECK(panel.x(0, 0) == Eigen::Vector2d(2, 1));
  CHECK(panel.x(0, 1) == Eigen::Vector2d(3, 2));
  CHECK(panel.x(0, 2) == Eigen::Vector2d(4, 3));

  const auto c = preprocess_series(parse(one_station({3, 3, 3, 3, 3})), {});
  const auto cp = to_lds_panel(c, c.date(0), c.date(4));
  for (int t = 0; t <= cp.T_total; ++t) CHECK(cp.x(0, t) == Eigen::Vector2d(3, 3));

  // first coordinate reproduces the series from the second day on
  const auto w = preprocess_series(parse(one_station({5, 1, 4, 1, 5, 9, 2, 6})), {});
  const auto wp = to_lds_panel(w, w.date(2), w.date(7));
  for (int t = 0; t <= wp.T_total; ++t) CHECK(wp.x(0, t)(0) == w.values[0][3 + t]);

  CHECK_THROWS_AS(to_lds_panel(p, p.date(1), p.date(1)), UsageError);
  CHECK_THROWS_AS(to_lds_panel(p, p.date(0), p.date(9)), UsageError);
}

TEST_CASE("station graph and training start") {
  std::string s = "station_id,date,value,lat,lon\n";
  for (int k = 0; k < 8; ++k)
    s += "S" + std::to_string(k) + ",2020-01-01,1," + std::to_string(40 + 0.1 * k) + "," + std::to_string(-75 + 0.05 * k * k) + "\n";
  const auto t = parse(s);
  const auto sg = station_graph(t, 5);
  CHECK(sg.connected);
  for (int deg : sg.graph.degrees()) CHECK(deg >= 5);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto d = sample_training_start(2021, seed);
    CHECK(d >= sys_days{2021y / January / 1});
    CHECK(d < sys_days{2021y / July / 1});
  }
  CHECK(sample_training_start(2021, 3) == sample_training_start(2021, 3));
}
