#include "gtvlds/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "gtvlds/error.hpp"

namespace gtvlds {

using namespace std::chrono;

sys_days parse_iso_date(const std::string& text) {
  int y = 0;
  unsigned mo = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream ss(text);
  if (!(ss >> y >> dash1 >> mo >> dash2 >> d) || dash1 != '-' || dash2 != '-')
    throw DataError("bad date '" + text + "' (expected YYYY-MM-DD)");
  std::string rest;
  if (ss >> rest) throw DataError("bad date '" + text + "' (trailing characters)");
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok()) throw DataError("invalid calendar date '" + text + "'");
  return sys_days{ymd};
}

std::string format_iso_date(sys_days d) {
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& what, const std::string& where) {
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": bad " + what + " '" + s + "'");
  }
}

bool truthy(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), ::tolower);
  return l == "1" || l == "true" || l == "yes" || l == "y";
}

}  // namespace

StationTable load_station_csv(std::istream& in, const std::string& source) {
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv(line);
      break;
    }
  }
  if (header.empty()) throw DataError(source + ": empty file");
  auto column = [&](const std::string& name, bool required) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw DataError(source + ": missing column '" + name + "'");
      return -1;
    }
    return static_cast<int>(it - header.begin());
  };
  const int c_id = column("station_id", true), c_date = column("date", true), c_val = column("value", true),
            c_lat = column("lat", true), c_lon = column("lon", true), c_drop = column("drop", false);

  std::map<std::string, std::map<sys_days, double>> series;
  std::map<std::string, Station> coords;
  std::vector<std::string> order;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    const std::string& id = cells[c_id];
    if (id.empty()) throw DataError(where + ": empty station_id");
    sys_days date;
    try {
      date = parse_iso_date(cells[c_date]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    double value = parse_number(cells[c_val], "value", where);
    const double lat = parse_number(cells[c_lat], "lat", where), lon = parse_number(cells[c_lon], "lon", where);
    if (!std::isfinite(lat) || !std::isfinite(lon) || std::abs(lat) > 90 || std::abs(lon) > 180)
      throw DataError(where + ": coordinates out of range");
    if (c_drop >= 0 && truthy(cells[c_drop])) value = std::numeric_limits<double>::quiet_NaN();

    if (!coords.count(id)) {
      coords[id] = Station{id, lat, lon};
      order.push_back(id);
    } else if (coords[id].lat != lat || coords[id].lon != lon) {
      throw DataError(where + ": station " + id + " has inconsistent coordinates");
    }
    auto [it, inserted] = series[id].emplace(date, value);
    if (!inserted) throw DataError(where + ": duplicate reading for station " + id + " on " + format_iso_date(date));
  }
  if (order.empty()) throw DataError(source + ": no data rows");

  StationTable t;
  sys_days lo = sys_days::max(), hi = sys_days::min();
  for (const auto& [id, s] : series) {
    lo = std::min(lo, s.begin()->first);
    hi = std::max(hi, s.rbegin()->first);
  }
  t.start = lo;
  t.num_days = static_cast<int>((hi - lo).count()) + 1;
  for (const auto& id : order) {
    t.stations.push_back(coords[id]);
    std::vector<double> v(t.num_days, std::numeric_limits<double>::quiet_NaN());
    for (const auto& [date, value] : series[id]) v[t.day_index(date)] = value;
    t.values.push_back(std::move(v));
  }
  return t;
}

StationTable load_station_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return load_station_csv(in, path);
}

std::string to_string(Transform t) {
  switch (t) {
    case Transform::none: return "none";
    case Transform::log: return "log";
    case Transform::loglog: return "loglog";
  }
  return "none";
}

Transform transform_from_string(const std::string& name) {
  if (name == "none") return Transform::none;
  if (name == "log") return Transform::log;
  if (name == "loglog") return Transform::loglog;
  throw UsageError("unknown transform '" + name + "' (none|log|loglog)");
}

StationTable preprocess_series(const StationTable& t, const PreprocessOptions& opts) {
  if (opts.coverage_min < 0 || opts.coverage_min > 1 || opts.year_missing_max < 0 || opts.year_missing_max > 1)
    throw UsageError("coverage thresholds must lie in [0, 1]");
  StationTable out;
  out.start = t.start;
  out.num_days = t.num_days;
  out.variable = t.variable;
  out.flags = t.flags;
  if (t.transform_applied && t.transform != to_string(opts.transform))
    throw UsageError("table already preprocessed with transform '" + t.transform + "'");
  out.transform = to_string(opts.transform);

  int year_lo = 0, year_hi = 0;
  if (opts.year) {
    year_lo = std::max(0, t.day_index(sys_days{year{*opts.year} / January / 1}));
    year_hi = std::min(t.num_days, t.day_index(sys_days{year{*opts.year + 1} / January / 1}));
  }

  for (int s = 0; s < t.num_stations(); ++s) {
    const auto& id = t.stations[s].id;
    std::vector<double> v = t.values[s];

    const auto observed = std::count_if(v.begin(), v.end(), [](double x) { return !std::isnan(x); });
    if (observed == 0 || static_cast<double>(observed) < opts.coverage_min * t.num_days) {
      out.flags.push_back("dropped_coverage:" + id);
      continue;
    }
    if (opts.year) {
      if (year_hi <= year_lo) throw UsageError("target year lies outside the record");
      const auto missing = std::count_if(v.begin() + year_lo, v.begin() + year_hi, [](double x) { return std::isnan(x); });
      if (static_cast<double>(missing) >= opts.year_missing_max * (year_hi - year_lo)) {
        out.flags.push_back("dropped_year_missing:" + id);
        continue;
      }
    }

    if (!t.transform_applied) {
      for (int day = 0; day < t.num_days; ++day) {
        double& x = v[day];
        if (std::isnan(x)) continue;
        if (x < 0 && opts.transform != Transform::none)
          throw DataError("negative reading for station " + id + " on " + format_iso_date(t.date(day)));
        switch (opts.transform) {
          case Transform::none: break;
          case Transform::log:
            if (x == 0) {
              out.flags.push_back("log_guard:" + id + ":" + format_iso_date(t.date(day)));
              x = kLogGuard;
            }
            x = std::log(x);
            break;
          case Transform::loglog:
            if (x == 0) {
              out.flags.push_back("log_guard:" + id + ":" + format_iso_date(t.date(day)));
              x = kLogGuard;
            }
            x = std::log(std::log(x + 1.0));
            break;
        }
        if (!std::isfinite(x))
          throw DataError("non-finite value after transform for station " + id + " on " + format_iso_date(t.date(day)));
      }
    }

    const auto first = std::find_if(v.begin(), v.end(), [](double x) { return !std::isnan(x); });
    if (first != v.begin()) {
      std::fill(v.begin(), first, *first);
      out.flags.push_back("leading_fill:" + id);
    }
    for (size_t day = 1; day < v.size(); ++day)
      if (std::isnan(v[day])) v[day] = v[day - 1];

    out.stations.push_back(t.stations[s]);
    out.values.push_back(std::move(v));
  }
  out.transform_applied = true;
  return out;
}

TrajectoryPanel to_lds_panel(const StationTable& t, sys_days first, sys_days last, int d) {
  if (d < 1) throw UsageError("state dimension must be >= 1");
  if (t.num_stations() == 0) throw DataError("no stations left to build a panel");
  const int lo = t.day_index(first), hi = t.day_index(last);
  if (lo < 0 || hi >= t.num_days || hi < lo)
    throw UsageError("window " + format_iso_date(first) + ".." + format_iso_date(last) + " outside the record");
  const int days = hi - lo + 1;
  if (days < 2 || days < d + 1) throw UsageError("window shorter than the embedding needs");

  TrajectoryPanel p;
  p.m = t.num_stations();
  p.d = d;
  const int n_states = days - (d - 1);
  p.T_total = n_states - 1;
  for (int s = 0; s < p.m; ++s) {
    Eigen::MatrixXd X(d, n_states);
    for (int k = 0; k < n_states; ++k)
      for (int i = 0; i < d; ++i) {
        const double y = t.values[s][lo + (d - 1) + k - i];
        if (std::isnan(y)) throw DataError("missing value for station " + t.stations[s].id + " inside window");
        X(i, k) = y;
      }
    p.states.push_back(std::move(X));
  }
  return p;
}

StationGraph station_graph(const StationTable& t, int k) {
  std::vector<GeoPoint> pts;
  for (const auto& s : t.stations) pts.push_back({s.lat, s.lon});
  StationGraph sg;
  sg.graph = knn_graph(pts, k);
  sg.connected = sg.graph.is_connected();
  return sg;
}

sys_days sample_training_start(int y, std::uint64_t seed) {
  const sys_days jan1{year{y} / January / 1}, jul1{year{y} / July / 1};
  const int span = static_cast<int>((jul1 - jan1).count());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, span - 1);
  return jan1 + days{pick(rng)};
}

}  // namespace gtvlds
