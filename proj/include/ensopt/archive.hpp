#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ensopt/cmaes.hpp"

namespace ensopt {

// One archived simulation result. realization_id is whichever realization
// was actually simulated for this point.
struct EvaluationRecord {
  std::int64_t record_id = 0;  // unique, strictly increasing with insertion
  long generation = 0;
  int realization_id = 0;  // in [1, N_r]
  double value = 0.0;      // objective units
  DesignPoint point;
};

struct Neighbor {
  EvaluationRecord record;
  double distance;
};

// Ascending by distance, ties by record_id ascending.
using NeighborSet = std::vector<Neighbor>;

using DistanceFn = std::function<double(const DesignPoint&, const DesignPoint&)>;

/// Append-only training-set database of all performed simulations.
/// Retrieval is an exhaustive scan: the Mahalanobis metric changes every
/// generation, so no static spatial index applies.
class Archive {
 public:
  std::int64_t insert(const DesignPoint& point, int realization_id,
                      double value, long generation);
  std::int64_t insert(EvaluationRecord record);

  /// The at-most n_max closest records with distance <= d_max.
  /// Distance evaluation runs in parallel; selection order is deterministic.
  NeighborSet nearest_within(const DesignPoint& query, const DistanceFn& distance,
                             double d_max, int n_max) const;

  /// Serial reference implementation with identical semantics.
  NeighborSet nearest_within_serial(const DesignPoint& query,
                                    const DistanceFn& distance, double d_max,
                                    int n_max) const;

  std::int64_t count_simulations() const { return total_simulations_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<EvaluationRecord>& records() const { return records_; }

  void dump_csv(std::ostream& os) const;
  void dump_csv(const std::string& path) const;
  static Archive load_csv(std::istream& is);
  static Archive load_csv(const std::string& path);

 private:
  NeighborSet select(const DesignPoint& query, const std::vector<double>& dist,
                     double d_max, int n_max) const;

  std::vector<EvaluationRecord> records_;
  std::int64_t next_id_ = 0;
  std::int64_t total_simulations_ = 0;
};

}  // namespace ensopt
