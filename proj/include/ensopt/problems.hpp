#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ensopt/cmaes.hpp"

namespace ensopt {

/// Deterministic multi-realization test problem. evaluate(point, r) is
/// bit-identical for a fixed (point, r); r is 1-based.
struct Problem {
  int dimension = 0;
  std::vector<std::pair<double, double>> bounds;  // per-coordinate [low, high]
  int n_realizations = 0;
  std::function<double(const DesignPoint&, int)> evaluate;
  std::string name;
  std::uint64_t seed = 0;

  /// Exact ensemble mean: average of evaluate over all realizations.
  double ensemble_mean(const DesignPoint& point) const;
};

// ---------------------------------------------------------------------------
// Analytic family: f(x, i) = -|x - o_i|^2 with per-realization shifts o_i.
// The ensemble mean is -|x - o_bar|^2 - v_bar, optimum at the shift centroid.
// ---------------------------------------------------------------------------

struct ShiftedSphere {
  std::vector<Vector> shifts;
  Vector centroid;       // o_bar
  double shift_variance; // v_bar = mean |o_i - o_bar|^2
  Problem problem;

  double mean_closed_form(const DesignPoint& x) const {
    return -(x - centroid).squaredNorm() - shift_variance;
  }
};

ShiftedSphere make_shifted_sphere(int n, int n_realizations, double shift_scale,
                                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic permeability fields and the well-placement NPV proxy.
// ---------------------------------------------------------------------------

/// One lognormal permeability realization on a regular grid (millidarcy).
struct RealizationField {
  int nx = 0, ny = 0;
  double cell_size = 0.0;  // meters
  int realization_id = 0;
  std::vector<double> grid;  // row-major, nx*ny, all cells > 0

  double at(int i, int j) const { return grid[static_cast<std::size_t>(j) * nx + i]; }
  double extent_x() const { return nx * cell_size; }
  double extent_y() const { return ny * cell_size; }

  /// Bilinear sample at (x, y) in meters; cell centers at ((i+0.5)h, (j+0.5)h),
  /// clamped at the borders.
  double sample(double x, double y) const;
};

struct FieldParams {
  int nx = 19;
  int ny = 28;
  double cell_size = 180.0;       // meters; 19 x 28 cells -> 3420 m x 5040 m
  double correlation_cells = 3.0; // Gaussian kernel std dev, in cells
  double log_mean = 6.2146080984221914;  // ln(500 mD)
  double log_std = 1.0;

  bool operator==(const FieldParams&) const = default;
};

/// Smoothed lognormal field: white noise convolved (periodically) with a
/// truncated Gaussian kernel normalized to unit output variance, then
/// exponentiated. Deterministic per (seed, realization_id).
RealizationField generate_field(const FieldParams& params, std::uint64_t seed,
                                int realization_id);

/// Serial reference for the convolution kernel.
RealizationField generate_field_serial(const FieldParams& params,
                                       std::uint64_t seed, int realization_id);

void dump_field_csv(const RealizationField& field, std::ostream& os);

// Versioned economics defaults; acceptance numbers depend on these staying put.
struct NpvEconomics {
  double scale = 2e7;            // currency per (mD * dimensionless spacing term)
  double optimal_spacing = 1500; // D0, meters
  double well_cost = 5e8;        // currency per well
  double bound_penalty = 1e6;    // kappa, currency per m^2
  int path_samples = 32;

  bool operator==(const NpvEconomics&) const = default;
};

/// Injector/producer NPV proxy: with D the inter-well distance and k_path
/// the harmonic mean of the field along the inter-well path,
///   NPV = scale * k_path * (D/D0) * exp(1 - D/D0) - 2*well_cost
///         - kappa * |point - proj(point)|^2.
/// point is n = 4 (injector x,y; producer x,y) or n = 12 (two 3-D well
/// segments, folded by vertical projection). Symmetric under swapping the
/// injector and producer blocks.
double npv_proxy(const DesignPoint& point, const RealizationField& field,
                 const NpvEconomics& economics);

struct NpvProxyProblem {
  std::vector<std::shared_ptr<const RealizationField>> fields;
  NpvEconomics economics;
  Problem problem;
};

NpvProxyProblem make_npv_proxy(int n, int n_realizations,
                               const FieldParams& field_params,
                               const NpvEconomics& economics,
                               std::uint64_t seed);

/// Componentwise projection onto the problem's bounding box.
DesignPoint project_to_bounds(const DesignPoint& point,
                              const std::vector<std::pair<double, double>>& bounds);

}  // namespace ensopt
