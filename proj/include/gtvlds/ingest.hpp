#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gtvlds/graph.hpp"
#include "gtvlds/lds.hpp"

namespace gtvlds {

struct Station {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
};

// Daily values of one variable on a common calendar grid; NaN marks a missing day.
struct StationTable {
  std::vector<Station> stations;
  std::chrono::sys_days start{};
  int num_days = 0;
  std::vector<std::vector<double>> values;  // [station][day]
  std::string variable = "custom";
  bool transform_applied = false;  // values already transformed and gap-filled
  std::string transform = "none";
  std::vector<std::string> flags;

  int num_stations() const { return static_cast<int>(stations.size()); }
  std::chrono::sys_days date(int day) const { return start + std::chrono::days{day}; }
  int day_index(std::chrono::sys_days d) const { return static_cast<int>((d - start).count()); }
};

std::chrono::sys_days parse_iso_date(const std::string& text);
std::string format_iso_date(std::chrono::sys_days d);

// Columns (by header name): station_id, date, value, lat, lon, optional drop.
// Rows with a truthy drop column are treated as missing readings.
StationTable load_station_csv(std::istream& in, const std::string& source = "<stream>");
StationTable load_station_csv(const std::string& path);

enum class Transform { none, log, loglog };

std::string to_string(Transform t);
Transform transform_from_string(const std::string& name);

inline constexpr double kLogGuard = 1e-6;

struct PreprocessOptions {
  Transform transform = Transform::none;
  std::optional<int> year;           // target year for the missing-days filter
  double coverage_min = 0.75;        // fraction observed over the full record
  double year_missing_max = 0.05;    // stations at or above this are dropped
};

// Transform, filter stations, then carry the last observation forward.
// A second call on the output is a no-op.
StationTable preprocess_series(const StationTable& t, const PreprocessOptions& opts);

// Lag embedding x_t = (y_t, y_{t-1}, ..., y_{t-d+1}) on the inclusive day window.
TrajectoryPanel to_lds_panel(const StationTable& t, std::chrono::sys_days first, std::chrono::sys_days last,
                             int d = 2);

struct StationGraph {
  Graph graph;
  bool connected = false;
};

StationGraph station_graph(const StationTable& t, int k = 5);

// Training start drawn uniformly from the first half of the given year.
std::chrono::sys_days sample_training_start(int year, std::uint64_t seed);

}  // namespace gtvlds
