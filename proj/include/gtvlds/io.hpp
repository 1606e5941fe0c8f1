#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtvlds/estimators.hpp"
#include "gtvlds/experiments.hpp"
#include "gtvlds/graph.hpp"
#include "gtvlds/ingest.hpp"
#include "gtvlds/lds.hpp"
#include "gtvlds/theory.hpp"

namespace gtvlds {

using json = nlohmann::ordered_json;

// Graph files use 1-based node ids.
json to_json(const Graph& g);
Graph graph_from_json(const json& j);
Graph load_graph(const std::string& path);

json to_json(const SystemEnsemble& e);
SystemEnsemble ensemble_from_json(const json& j);
SystemEnsemble load_ensemble(const std::string& path);

// A_hat is written as one row-major d x d nested array per node.
json to_json(const FitResult& fit);
FitResult fit_from_json(const json& j);
json to_json(const PathResult& path);
json to_json(const TheoryReport& report);

void write_panel_csv(std::ostream& out, const TrajectoryPanel& p);
TrajectoryPanel read_panel_csv(std::istream& in, const std::string& source = "<stream>");
TrajectoryPanel load_panel(const std::string& path);

void write_coords_csv(std::ostream& out, const StationTable& t);

struct SweepLabels {
  std::string axis, topology, field;
};

void write_results_csv(std::ostream& out, const std::vector<MetricRow>& rows, const SweepLabels& labels);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

// Shortest round-trip decimal; "nan" / "inf" for non-finite values.
std::string format_double(double x);

// Writes to a sibling temp file and renames it into place; creates parent directories.
void atomic_write(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Flat key = value configuration. `[section]` headers prefix later keys with
// "section.". Later assignments win.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "<stream>");
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const;
  std::optional<std::string> get(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::string> get_strings(const std::string& key, std::vector<std::string> fallback) const;

  // Throws UsageError naming the first key outside `known`.
  void check_known(const std::set<std::string>& known) const;

  json to_json() const;

 private:
  std::map<std::string, std::string> values_;
};

// {"tool", "version", "command", "config"} sidecar embedded next to every output.
json run_metadata(const std::string& command, const Config& cfg);

}  // namespace gtvlds
