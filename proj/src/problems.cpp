#include "ensopt/problems.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "ensopt/rng.hpp"

namespace ensopt {

namespace {

constexpr double kReservoirDepth = 90.0;  // 5 cells of 18 m

// Substream tags so problem generation never collides with other consumers
// of the same master seed.
constexpr std::uint64_t kShiftStreamTag = 0x73686966;  // "shif"
constexpr std::uint64_t kFieldStreamTag = 0x6669656c;  // "fiel"

}  // namespace

double Problem::ensemble_mean(const DesignPoint& point) const {
  std::vector<double> values(n_realizations);
#pragma omp parallel for schedule(static)
  for (int r = 1; r <= n_realizations; ++r)
    values[r - 1] = evaluate(point, r);
  return std::accumulate(values.begin(), values.end(), 0.0) / n_realizations;
}

// ---------------------------------------------------------------------------
// Shifted sphere
// ---------------------------------------------------------------------------

ShiftedSphere make_shifted_sphere(int n, int n_realizations, double shift_scale,
                                  std::uint64_t seed) {
  if (n < 1 || n_realizations < 1 || shift_scale < 0)
    throw std::invalid_argument("make_shifted_sphere: bad parameters");

  ShiftedSphere out;
  out.shifts.reserve(n_realizations);
  for (int r = 1; r <= n_realizations; ++r) {
    auto rng = substream(seed, kShiftStreamTag, static_cast<std::uint64_t>(r));
    std::uniform_real_distribution<double> uniform(-shift_scale, shift_scale);
    Vector shift(n);
    for (int j = 0; j < n; ++j) shift[j] = uniform(rng);
    out.shifts.push_back(shift);
  }

  out.centroid = Vector::Zero(n);
  for (const auto& s : out.shifts) out.centroid += s;
  out.centroid /= n_realizations;

  out.shift_variance = 0.0;
  for (const auto& s : out.shifts)
    out.shift_variance += (s - out.centroid).squaredNorm();
  out.shift_variance /= n_realizations;

  auto shifts = std::make_shared<std::vector<Vector>>(out.shifts);
  out.problem.dimension = n;
  out.problem.n_realizations = n_realizations;
  out.problem.name = "shifted_sphere";
  out.problem.seed = seed;
  const double box = std::max(1.0, 10.0 * shift_scale);
  out.problem.bounds.assign(n, {-box, box});
  out.problem.evaluate = [shifts](const DesignPoint& x, int r) {
    return -(x - (*shifts)[r - 1]).squaredNorm();
  };
  return out;
}

// ---------------------------------------------------------------------------
// Realization fields
// ---------------------------------------------------------------------------

double RealizationField::sample(double x, double y) const {
  const double u = std::clamp(x / cell_size - 0.5, 0.0, nx - 1.0);
  const double v = std::clamp(y / cell_size - 0.5, 0.0, ny - 1.0);
  const int i0 = static_cast<int>(u);
  const int j0 = static_cast<int>(v);
  const int i1 = std::min(i0 + 1, nx - 1);
  const int j1 = std::min(j0 + 1, ny - 1);
  const double fx = u - i0;
  const double fy = v - j0;
  const double row0 = at(i0, j0) + fx * (at(i1, j0) - at(i0, j0));
  const double row1 = at(i0, j1) + fx * (at(i1, j1) - at(i0, j1));
  return row0 + fy * (row1 - row0);
}

namespace {

// Truncated Gaussian taps, normalized so the squared taps sum to one: a
// periodic convolution with this kernel preserves unit white-noise variance.
std::vector<double> unit_variance_kernel(double sigma_cells) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_cells));
  std::vector<double> taps(2 * radius + 1);
  for (int t = -radius; t <= radius; ++t)
    taps[t + radius] = std::exp(-0.5 * (t * t) / (sigma_cells * sigma_cells));
  double sq = 0.0;
  for (double w : taps) sq += w * w;
  const double norm = 1.0 / std::sqrt(sq);
  for (double& w : taps) w *= norm;
  return taps;
}

RealizationField generate_field_impl(const FieldParams& params,
                                     std::uint64_t seed, int realization_id,
                                     bool parallel) {
  if (params.correlation_cells < 1.0)
    throw std::invalid_argument("generate_field: correlation_cells must be >= 1");

  const int nx = params.nx;
  const int ny = params.ny;
  auto rng = substream(seed, kFieldStreamTag,
                       static_cast<std::uint64_t>(realization_id));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(static_cast<std::size_t>(nx) * ny);
  for (double& v : noise) v = normal(rng);

  const auto taps = unit_variance_kernel(params.correlation_cells);
  const int radius = (static_cast<int>(taps.size()) - 1) / 2;
  const auto wrap = [](int i, int m) { return ((i % m) + m) % m; };

  std::vector<double> pass_x(noise.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t)
        acc += taps[t + radius] * noise[static_cast<std::size_t>(j) * nx + wrap(i + t, nx)];
      pass_x[static_cast<std::size_t>(j) * nx + i] = acc;
    }

  RealizationField field;
  field.nx = nx;
  field.ny = ny;
  field.cell_size = params.cell_size;
  field.realization_id = realization_id;
  field.grid.resize(noise.size());
#pragma omp parallel for schedule(static) if (parallel)
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t)
        acc += taps[t + radius] * pass_x[static_cast<std::size_t>(wrap(j + t, ny)) * nx + i];
      field.grid[static_cast<std::size_t>(j) * nx + i] =
          std::exp(params.log_mean + params.log_std * acc);
    }
  return field;
}

}  // namespace

RealizationField generate_field(const FieldParams& params, std::uint64_t seed,
                                int realization_id) {
  return generate_field_impl(params, seed, realization_id, true);
}

RealizationField generate_field_serial(const FieldParams& params,
                                       std::uint64_t seed, int realization_id) {
  return generate_field_impl(params, seed, realization_id, false);
}

void dump_field_csv(const RealizationField& field, std::ostream& os) {
  os << std::setprecision(17);
  for (int j = 0; j < field.ny; ++j) {
    for (int i = 0; i < field.nx; ++i) {
      if (i) os << ',';
      os << field.at(i, j);
    }
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// NPV proxy
// ---------------------------------------------------------------------------

DesignPoint project_to_bounds(const DesignPoint& point,
                              const std::vector<std::pair<double, double>>& bounds) {
  DesignPoint out = point;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] = std::clamp(out[i], bounds[i].first, bounds[i].second);
  return out;
}

namespace {

std::vector<std::pair<double, double>> proxy_bounds(int n,
                                                    const RealizationField& field) {
  std::vector<std::pair<double, double>> bounds;
  const int wells = 2;
  const int coords_per_well = n / wells;
  for (int w = 0; w < wells; ++w)
    for (int c = 0; c < coords_per_well; ++c) {
      switch (c % 3) {
        case 0: bounds.push_back({0.0, field.extent_x()}); break;
        case 1: bounds.push_back({0.0, field.extent_y()}); break;
        default: bounds.push_back({0.0, kReservoirDepth}); break;
      }
    }
  if (n == 4) {
    bounds.clear();
    bounds.push_back({0.0, field.extent_x()});
    bounds.push_back({0.0, field.extent_y()});
    bounds.push_back({0.0, field.extent_x()});
    bounds.push_back({0.0, field.extent_y()});
  }
  return bounds;
}

// Accumulates 1/k along a 2-D segment at m midpoint-rule samples.
void add_inverse_samples(const RealizationField& field, double ax, double ay,
                         double bx, double by, int m, double& inv_sum,
                         int& count) {
  for (int s = 0; s < m; ++s) {
    const double t = (s + 0.5) / m;
    inv_sum += 1.0 / field.sample(ax + t * (bx - ax), ay + t * (by - ay));
  }
  count += m;
}

}  // namespace

double npv_proxy(const DesignPoint& point, const RealizationField& field,
                 const NpvEconomics& economics) {
  const int n = static_cast<int>(point.size());
  if (n != 4 && n != 12)
    throw std::invalid_argument("npv_proxy: dimension must be 4 or 12");

  // Canonical well order makes injector/producer swap symmetry exact.
  const int half = n / 2;
  Vector a = point.head(half);
  Vector b = point.tail(half);
  if (std::lexicographical_compare(b.data(), b.data() + half, a.data(),
                                   a.data() + half))
    std::swap(a, b);

  const auto bounds = proxy_bounds(n, field);
  Vector canonical(n);
  canonical << a, b;
  const Vector feasible = project_to_bounds(canonical, bounds);
  const double penalty =
      economics.bound_penalty * (canonical - feasible).squaredNorm();

  double ax, ay, bx, by;
  double inv_sum = 0.0;
  int samples = 0;
  if (n == 4) {
    ax = feasible[0]; ay = feasible[1];
    bx = feasible[2]; by = feasible[3];
  } else {
    // Vertical projection: each well contributes its projected heel-toe
    // segment to the path average; spacing uses the segment midpoints.
    const double ahx = feasible[0], ahy = feasible[1];
    const double atx = feasible[3], aty = feasible[4];
    const double bhx = feasible[6], bhy = feasible[7];
    const double btx = feasible[9], bty = feasible[10];
    ax = 0.5 * (ahx + atx); ay = 0.5 * (ahy + aty);
    bx = 0.5 * (bhx + btx); by = 0.5 * (bhy + bty);
    add_inverse_samples(field, ahx, ahy, atx, aty, 8, inv_sum, samples);
    add_inverse_samples(field, bhx, bhy, btx, bty, 8, inv_sum, samples);
  }
  add_inverse_samples(field, ax, ay, bx, by, economics.path_samples, inv_sum,
                      samples);
  const double k_path = samples / inv_sum;

  const double spacing = std::hypot(bx - ax, by - ay) / economics.optimal_spacing;
  const double production = economics.scale * k_path * spacing * std::exp(1.0 - spacing);
  return production - 2.0 * economics.well_cost - penalty;
}

NpvProxyProblem make_npv_proxy(int n, int n_realizations,
                               const FieldParams& field_params,
                               const NpvEconomics& economics,
                               std::uint64_t seed) {
  if (n != 4 && n != 12)
    throw std::invalid_argument("make_npv_proxy: dimension must be 4 or 12");
  if (n_realizations < 1)
    throw std::invalid_argument("make_npv_proxy: n_realizations must be >= 1");

  NpvProxyProblem out;
  out.economics = economics;
  out.fields.reserve(n_realizations);
  for (int r = 1; r <= n_realizations; ++r)
    out.fields.push_back(std::make_shared<const RealizationField>(
        generate_field(field_params, seed, r)));

  auto fields = out.fields;
  auto econ = economics;
  out.problem.dimension = n;
  out.problem.n_realizations = n_realizations;
  out.problem.name = "npv_proxy";
  out.problem.seed = seed;
  out.problem.bounds = proxy_bounds(n, *out.fields.front());
  out.problem.evaluate = [fields, econ](const DesignPoint& x, int r) {
    return npv_proxy(x, *fields[r - 1], econ);
  };
  return out;
}

}  // namespace ensopt
