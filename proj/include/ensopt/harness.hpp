#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ensopt/archive.hpp"
#include "ensopt/cmaes.hpp"
#include "ensopt/estimators.hpp"
#include "ensopt/problems.hpp"

namespace ensopt {

enum class Strategy { MeanOfSamples, OneRealization, Neighborhood };
enum class VerifyPolicy { OnNewBest, EveryGeneration };

std::string to_string(Strategy s);
std::string to_string(VerifyPolicy p);
Strategy strategy_from_string(const std::string& s);
VerifyPolicy verify_policy_from_string(const std::string& s);

/// Fully determines the problem instance given a master seed.
struct ProblemSpec {
  std::string name = "shifted_sphere";  // or "npv_proxy"
  int dimension = 12;
  int n_realizations = 20;
  double shift_scale = 1.0;  // shifted_sphere only
  FieldParams field;         // npv_proxy only
  NpvEconomics economics;    // npv_proxy only

  bool operator==(const ProblemSpec&) const = default;
};

struct RunConfig {
  ProblemSpec problem;
  Strategy strategy = Strategy::Neighborhood;
  EstimatorConfig estimator;
  int lambda = 40;
  std::optional<Vector> m0;  // default: center of the bounding box
  double sigma0 = 0.0;       // <= 0: 0.3 * mean box extent
  long budget_simulations = 4000;
  int n_runs = 1;
  std::uint64_t master_seed = 1;
  VerifyPolicy verify = VerifyPolicy::OnNewBest;
  DistanceScaling distance_scaling = DistanceScaling::C;

  void validate() const;
};

struct TraceRow {
  int run_id = 0;
  long generation = 0;
  long cum_estimation_sims = 0;
  long cum_verification_sims = 0;
  double best_estimate = 0.0;
  std::optional<double> best_verified;
  double sigma = 0.0;
  double mean_neighbors = 0.0;
};

struct RunTrace {
  std::map<std::string, std::string> header;  // resolved config echo
  int run_id = 0;
  std::vector<TraceRow> rows;
  long archive_records = 0;  // simulation-conservation check
  Vector best_estimate_point;          // p_max,E
  double best_estimate_value = 0.0;
  std::optional<Vector> best_verified_point;  // p_max,R
  std::optional<double> best_verified_value;
  bool complete = true;

  long total_simulations() const {
    return rows.empty() ? 0
                        : rows.back().cum_estimation_sims +
                              rows.back().cum_verification_sims;
  }
};

/// Seed of the problem-generation substream for a given master seed.
std::uint64_t problem_seed(std::uint64_t master_seed);

/// Problem construction from its own substream of the master seed, so the
/// instance is identical across strategies and runs sharing that seed.
Problem build_problem(const ProblemSpec& spec, std::uint64_t master_seed);

RunTrace run_single(const RunConfig& config, int run_index);
std::vector<RunTrace> run_campaign(const RunConfig& config);

void write_trace(const RunTrace& trace, std::ostream& os);
void write_trace(const RunTrace& trace, const std::string& path);
RunTrace read_trace(std::istream& is);
RunTrace read_trace(const std::string& path);
std::vector<RunTrace> read_trace_dir(const std::string& dir);

struct ThresholdSummary {
  double threshold = 0.0;
  double fraction_reached = 0.0;
  double mean_sims_at_crossing = 0.0;  // NaN when no run crossed
};

struct StrategySummary {
  std::string label;
  int n_runs = 0;
  std::vector<ThresholdSummary> thresholds;
};

/// Per-run total simulations at first crossing of `threshold` on the
/// verified objective, or nullopt when never reached.
std::optional<long> sims_at_first_crossing(const RunTrace& trace, double threshold);

std::vector<StrategySummary> summarize_traces(
    const std::vector<std::pair<std::string, std::vector<RunTrace>>>& groups,
    const std::vector<double>& thresholds);

/// Runs each config as a campaign and summarizes crossings. All configs must
/// share the same problem.
std::vector<StrategySummary> compare_strategies(const std::vector<RunConfig>& configs,
                                                const std::vector<double>& thresholds);

void print_summary_table(const std::vector<StrategySummary>& summaries,
                         std::ostream& os);

// Flat key=value configuration files; unknown keys are rejected.
std::map<std::string, std::string> read_key_value_file(const std::string& path);
RunConfig config_from_keys(const std::map<std::string, std::string>& keys);
std::map<std::string, std::string> config_to_keys(const RunConfig& config);

}  // namespace ensopt
