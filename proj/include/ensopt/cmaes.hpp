#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace ensopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A candidate solution: one n-dimensional real vector in problem units.
using DesignPoint = Vector;

// Metric used for neighbor selection. SigmaSqC divides squared distances by
// sigma^2, i.e. measures in sampling-distribution units instead of C units.
enum class DistanceScaling { C, SigmaSqC };

/// Generation-based CMA-ES with cumulative step-size adaptation and
/// rank-one plus rank-mu covariance update (Hansen & Ostermeier style
/// defaults, all constants derived from n and lambda).
///
/// Usage is a strict ask/tell alternation from a single logical thread.
/// The state is fully serializable for checkpoint/restart.
class CmaEs {
 public:
  CmaEs(int n, const Vector& m0, double sigma0, int lambda, std::uint64_t seed);

  /// Sample lambda points x_i = m + sigma * B * D * z_i from the seeded
  /// stream. Advances the generation RNG deterministically.
  std::vector<DesignPoint> ask();

  /// Rank the population and update mean, evolution paths, step-size and
  /// covariance. `points` must be the population returned by the matching
  /// ask() call. Ties in fitness are broken by sampling index, ascending.
  void tell(const std::vector<DesignPoint>& points,
            const std::vector<double>& fitnesses, bool maximize);

  /// Mahalanobis distance sqrt((a-b)^T C^-1 (a-b)) under the current
  /// covariance, computed through the maintained eigendecomposition.
  /// Throws if cond(C) exceeds 1e14.
  double mahalanobis(const DesignPoint& a, const DesignPoint& b) const;

  int dimension() const { return n_; }
  int population_size() const { return lambda_; }
  long generation() const { return generation_; }
  const Vector& mean() const { return mean_; }
  double sigma() const { return sigma_; }
  const Matrix& covariance() const { return cov_; }
  double smallest_eigenvalue() const { return eigvals_.minCoeff(); }
  const Vector& recombination_weights() const { return weights_; }

  /// Replace the covariance (e.g. a non-spherical initial distribution).
  /// The matrix must be symmetric; the eigendecomposition is refreshed.
  void set_covariance(const Matrix& cov);

  void set_distance_scaling(DistanceScaling s) { distance_scaling_ = s; }
  DistanceScaling distance_scaling() const { return distance_scaling_; }

  void serialize(std::ostream& os) const;
  std::string serialize() const;
  static CmaEs deserialize(std::istream& is);
  static CmaEs deserialize(const std::string& text);

  bool operator==(const CmaEs& other) const;

 private:
  CmaEs() = default;
  void refresh_eigendecomposition();

  int n_ = 0;
  int lambda_ = 0;
  int mu_ = 0;
  Vector weights_;       // mu entries, non-increasing, sum 1
  double mu_eff_ = 0;
  double c_sigma_ = 0, d_sigma_ = 0;
  double c_c_ = 0, c_1_ = 0, c_mu_ = 0;
  double chi_n_ = 0;

  Vector mean_;
  double sigma_ = 0;
  Matrix cov_;
  Vector path_sigma_;
  Vector path_c_;
  long generation_ = 0;

  Matrix eig_basis_;     // B
  Vector eigvals_;       // diag(D^2)

  std::mt19937_64 rng_;
  std::vector<DesignPoint> last_population_;
  bool awaiting_tell_ = false;
  DistanceScaling distance_scaling_ = DistanceScaling::C;
};

}  // namespace ensopt
