#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gtvlds/design.hpp"
#include "gtvlds/estimators.hpp"
#include "gtvlds/graph.hpp"
#include "gtvlds/lds.hpp"

namespace gtvlds {

inline constexpr int kSyntheticBuffer = 100;
inline constexpr int kStationBuffer = 20;

// Layout train | buffer | val | buffer | test in one-step pair units. Pair k
// maps x_{offset+k} to x_{offset+k+1}; offset 1 skips the x_0 = 0 state of
// simulated panels.
struct SplitSpec {
  int T_train = 16;
  int T_val = 4;
  int T_test = 8;
  int buffer = kSyntheticBuffer;
  int offset = 1;

  int total() const { return T_train + 2 * buffer + T_val + T_test; }
};

struct SliceRange {
  int begin = 0;  // pair index, inclusive
  int end = 0;    // pair index, exclusive
};

struct SplitLayout {
  SliceRange train, val, test;
};

SplitLayout split_layout(const SplitSpec& spec);

struct Splits {
  SplitLayout layout;
  DesignSystem train, val, test;
};

Splits make_splits(const TrajectoryPanel& panel, const SplitSpec& spec);

struct MetricRow {
  std::string method;
  std::uint64_t seed = 0;
  double sweep_value = 0.0;
  double param_mse = 0.0;  // NaN when no ground truth
  double pred_mse = 0.0;
  double selected_lambda = 0.0;
  int n_iter = 0;
  double wall_ms = 0.0;
  std::vector<std::string> flags;
};

MetricRow compute_metrics(const FitResult& fit, const SystemEnsemble* truth, const DesignSystem& test);

double param_mse(const FitResult& fit, const SystemEnsemble& truth);

// Mean over the m d^2 coefficients of their across-repeat population variance.
double coefficient_stability(const std::vector<FitResult>& fits);

enum class SweepAxis { T, m, jump, omega };

std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& name);

struct SweepConfig {
  SweepAxis axis = SweepAxis::T;
  std::vector<double> values;
  GraphKind topology = GraphKind::path;
  double er_p = 0.1;
  FieldKind field = FieldKind::piecewise;
  double jump = 0.5;   // target max edge jump of beta
  double omega = 0.5;  // smooth field frequency
  int n_rep = 15;
  std::uint64_t base_seed = 1;
  std::vector<std::string> methods{"graph_tv", "ols_ind", "ols_pooled", "laplacian", "group_lasso"};
  int m = 64;          // used unless axis == m
  int T_train = 16;    // used unless axis == T
  int T_val = 4;
  int T_test = 8;
  int buffer = kSyntheticBuffer;
  int grid_size = kDefaultGridSize;
  int jobs = 1;
  bool record_timing = true;
  SolverOptions solver;
};

void validate(const SweepConfig& cfg);

struct AggregateRow {
  double sweep_value = 0.0;
  std::string method;
  double mean_param_mse = 0.0;
  double ci95_param = 0.0;
  double mean_pred_mse = 0.0;
  double ci95_pred = 0.0;
  int n_ok = 0;
};

struct SweepResult {
  std::vector<MetricRow> rows;  // (value, rep, method) order
  std::vector<AggregateRow> aggregate;
  std::vector<std::string> failures;
  int er_resamples = 0;
};

// Seed of one run; depends only on (base_seed, sweep_value, rep).
std::uint64_t run_seed(std::uint64_t base_seed, double sweep_value, int rep);

// One (sweep value, rep) cell: graph, ground truth, simulation, fits, scores.
std::vector<MetricRow> run_single(const SweepConfig& cfg, double value, int rep, int* er_resamples = nullptr);

SweepResult run_sweep(const SweepConfig& cfg);

// mean +- 1.96 * sample standard error per (value, method), survivors only.
std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

MeanSe mean_se(const std::vector<double>& xs);

}  // namespace gtvlds
