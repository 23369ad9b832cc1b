#pragma once

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ensopt/archive.hpp"
#include "ensopt/cmaes.hpp"
#include "ensopt/problems.hpp"

namespace ensopt {

/// Uncertainty-handling parameters shared by all estimation strategies.
struct EstimatorConfig {
  int n_realizations = 20;      // N_r
  int bootstrap_threshold = 40; // N_sim; typical value 2 * N_r
  int bootstrap_samples = 1;    // N_s1, in [1, N_r]
  int main_samples = 1;         // N_s2, in [1, N_r]
  int max_neighbors = 40;       // N_n,max; typical value 2 * N_r
  double selection_distance = 4000.0;  // d_max
  double risk_factor = 0.0;     // r
  double percentile_weights[3] = {0.0, 1.0, 0.0};  // (r_10, r_50, r_90)
  bool use_std_term = false;
  bool intra_generation_visibility = true;

  void validate() const;
};

struct EstimateResult {
  double estimate = 0.0;
  int fresh_simulations = 0;
  int neighbors_used = 0;
  std::optional<double> std_estimate;  // sigma^E, only with use_std_term
};

// ---------------------------------------------------------------------------
// Aggregators over per-realization values.
// ---------------------------------------------------------------------------

/// Arithmetic mean. Throws on an empty list.
double aggregate_mean(std::span<const double> values);

/// mean + r * sigma, with sigma the population standard deviation (divisor N).
double aggregate_risk(std::span<const double> values, double risk_factor);

/// r10*q(0.1) + r50*q(0.5) + r90*q(0.9), with q the empirical quantile at
/// sorted position 1 + p*(N-1), linearly interpolated. Requires N >= 2.
double aggregate_percentile(std::span<const double> values, double r10,
                            double r50, double r90);

/// Neighbor weight (1 - (d/d_max)^2)^2; 1 at distance 0, 0 at d_max.
double neighbor_weight(double distance, double d_max);

// ---------------------------------------------------------------------------
// Estimation strategies. Each simulates the point on some realizations,
// inserts the results into the archive (or into `deferred` when given, for
// end-of-generation insertion), and returns the estimate plus its cost.
// ---------------------------------------------------------------------------

/// Reference strategy: simulate on all N_r realizations, return their mean.
EstimateResult estimate_mean_of_samples(const DesignPoint& point,
                                        const Problem& problem, Archive& archive,
                                        const EstimatorConfig& config,
                                        long generation,
                                        std::vector<EvaluationRecord>* deferred = nullptr);

/// Single simulation on one uniformly drawn realization.
EstimateResult estimate_one_realization(const DesignPoint& point,
                                        const Problem& problem, Archive& archive,
                                        const EstimatorConfig& config,
                                        std::mt19937_64& rng, long generation,
                                        std::vector<EvaluationRecord>* deferred = nullptr);

/// Two-phase neighborhood estimator. Bootstrap phase (archive count below
/// N_sim): mean of N_s1 fresh simulations on distinct random realizations.
/// Main phase: N_s2 fresh simulations plus a weighted average over at most
/// N_n,max archived neighbors within Mahalanobis distance d_max, fresh values
/// weighted 1 and neighbors by neighbor_weight. Optionally augments the
/// estimate with r * sigma^E from the weighted population spread.
EstimateResult estimate_neighborhood(const DesignPoint& point,
                                     const Problem& problem, Archive& archive,
                                     const EstimatorConfig& config,
                                     const CmaEs& optimizer,
                                     std::mt19937_64& rng, long generation,
                                     std::vector<EvaluationRecord>* deferred = nullptr);

/// N distinct realization ids drawn uniformly without replacement from [1, N_r].
std::vector<int> draw_realizations(int count, int n_realizations,
                                   std::mt19937_64& rng);

}  // namespace ensopt
