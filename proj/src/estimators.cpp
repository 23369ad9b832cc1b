#include "ensopt/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ensopt {

void EstimatorConfig::validate() const {
  if (n_realizations < 1)
    throw std::invalid_argument("estimator config: N_r must be >= 1");
  if (bootstrap_samples < 1 || bootstrap_samples > n_realizations)
    throw std::invalid_argument("estimator config: N_s1 must be in [1, N_r]");
  if (main_samples < 1 || main_samples > n_realizations)
    throw std::invalid_argument("estimator config: N_s2 must be in [1, N_r]");
  if (max_neighbors < 1)
    throw std::invalid_argument("estimator config: N_n,max must be >= 1");
  if (!(selection_distance > 0))
    throw std::invalid_argument("estimator config: d_max must be > 0");
  if (bootstrap_threshold < 1)
    throw std::invalid_argument("estimator config: N_sim must be >= 1");
}

double aggregate_mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("aggregate_mean: empty list");
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double aggregate_risk(std::span<const double> values, double risk_factor) {
  const double mean = aggregate_mean(values);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return mean + risk_factor * std::sqrt(var);
}

namespace {

// Empirical quantile at sorted position 1 + p*(N-1), linear interpolation.
double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double aggregate_percentile(std::span<const double> values, double r10,
                            double r50, double r90) {
  if (values.size() < 2)
    throw std::invalid_argument("aggregate_percentile: need at least 2 values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return r10 * quantile(sorted, 0.1) + r50 * quantile(sorted, 0.5) +
         r90 * quantile(sorted, 0.9);
}

double neighbor_weight(double distance, double d_max) {
  const double q = (distance / d_max) * (distance / d_max);
  const double w = 1.0 - q;
  return w * w;
}

std::vector<int> draw_realizations(int count, int n_realizations,
                                   std::mt19937_64& rng) {
  // Partial Fisher-Yates over [1, N_r].
  std::vector<int> ids(n_realizations);
  std::iota(ids.begin(), ids.end(), 1);
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, n_realizations - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(count);
  return ids;
}

namespace {

void store(Archive& archive, std::vector<EvaluationRecord>* deferred,
           const DesignPoint& point, int realization_id, double value,
           long generation) {
  EvaluationRecord rec;
  rec.point = point;
  rec.realization_id = realization_id;
  rec.value = value;
  rec.generation = generation;
  if (deferred)
    deferred->push_back(std::move(rec));
  else
    archive.insert(std::move(rec));
}

}  // namespace

EstimateResult estimate_mean_of_samples(const DesignPoint& point,
                                        const Problem& problem, Archive& archive,
                                        const EstimatorConfig& config,
                                        long generation,
                                        std::vector<EvaluationRecord>* deferred) {
  config.validate();
  std::vector<double> values(config.n_realizations);
#pragma omp parallel for schedule(static)
  for (int r = 1; r <= config.n_realizations; ++r)
    values[r - 1] = problem.evaluate(point, r);

  EstimateResult result;
  result.estimate = aggregate_mean(values);
  result.fresh_simulations = config.n_realizations;
  for (int r = 1; r <= config.n_realizations; ++r)
    store(archive, deferred, point, r, values[r - 1], generation);
  return result;
}

EstimateResult estimate_one_realization(const DesignPoint& point,
                                        const Problem& problem, Archive& archive,
                                        const EstimatorConfig& config,
                                        std::mt19937_64& rng, long generation,
                                        std::vector<EvaluationRecord>* deferred) {
  config.validate();
  std::uniform_int_distribution<int> pick(1, config.n_realizations);
  const int realization = pick(rng);
  const double value = problem.evaluate(point, realization);

  EstimateResult result;
  result.estimate = value;
  result.fresh_simulations = 1;
  store(archive, deferred, point, realization, value, generation);
  return result;
}

EstimateResult estimate_neighborhood(const DesignPoint& point,
                                     const Problem& problem, Archive& archive,
                                     const EstimatorConfig& config,
                                     const CmaEs& optimizer,
                                     std::mt19937_64& rng, long generation,
                                     std::vector<EvaluationRecord>* deferred) {
  config.validate();
  const bool bootstrap = archive.count_simulations() < config.bootstrap_threshold;
  const int n_fresh = bootstrap ? config.bootstrap_samples : config.main_samples;

  const auto realizations = draw_realizations(n_fresh, config.n_realizations, rng);
  std::vector<double> fresh(n_fresh);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_fresh; ++i)
    fresh[i] = problem.evaluate(point, realizations[i]);

  EstimateResult result;
  result.fresh_simulations = n_fresh;

  if (bootstrap) {
    result.estimate = aggregate_mean(fresh);
    if (config.use_std_term) {
      // Fresh-only degenerate form of the weighted spread.
      double var = 0.0;
      for (double v : fresh) var += (v - result.estimate) * (v - result.estimate);
      result.std_estimate = std::sqrt(var / n_fresh);
      result.estimate += config.risk_factor * *result.std_estimate;
    }
  } else {
    const NeighborSet neighbors = archive.nearest_within(
        point,
        [&](const DesignPoint& a, const DesignPoint& b) {
          return optimizer.mahalanobis(a, b);
        },
        config.selection_distance, config.max_neighbors);
    result.neighbors_used = static_cast<int>(neighbors.size());

    double weight_sum = 0.0;
    double weighted_value = 0.0;
    for (double v : fresh) {
      weight_sum += 1.0;
      weighted_value += v;
    }
    for (const auto& nb : neighbors) {
      const double w = neighbor_weight(nb.distance, config.selection_distance);
      weight_sum += w;
      weighted_value += w * nb.record.value;
    }
    const double mean = weighted_value / weight_sum;
    result.estimate = mean;

    if (config.use_std_term) {
      double weighted_sq = 0.0;
      for (double v : fresh) weighted_sq += (v - mean) * (v - mean);
      for (const auto& nb : neighbors) {
        const double w = neighbor_weight(nb.distance, config.selection_distance);
        weighted_sq += w * (nb.record.value - mean) * (nb.record.value - mean);
      }
      result.std_estimate = std::sqrt(weighted_sq / weight_sum);
      result.estimate = mean + config.risk_factor * *result.std_estimate;
    }
  }

  // Fresh results enter the archive only after the estimate is formed, so a
  // point never sees its own simulations as neighbors.
  for (int i = 0; i < n_fresh; ++i)
    store(archive, deferred, point, realizations[i], fresh[i], generation);
  return result;
}

}  // namespace ensopt
