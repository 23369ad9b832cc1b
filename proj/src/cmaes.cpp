#include "ensopt/cmaes.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ensopt/rng.hpp"

namespace ensopt {

namespace {

constexpr double kSigmaFloor = 1e-300;
constexpr double kMaxCondition = 1e14;
constexpr double kEigenvalueFloorRel = 1e-20;

void write_scalar(std::ostream& os, const char* key, double v) {
  os << key << ' ' << std::setprecision(17) << v << '\n';
}

void write_vector(std::ostream& os, const char* key, const Vector& v) {
  os << key << ' ' << v.size();
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << v[i];
  os << '\n';
}

void write_matrix(std::ostream& os, const char* key, const Matrix& m) {
  os << key << ' ' << m.rows() << ' ' << m.cols();
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << ' ' << m(i, j);
  os << '\n';
}

void expect_key(std::istream& is, const char* key) {
  std::string k;
  is >> k;
  if (k != key)
    throw std::runtime_error("optimizer state parse error: expected '" +
                             std::string(key) + "', got '" + k + "'");
}

double read_scalar(std::istream& is, const char* key) {
  expect_key(is, key);
  double v;
  is >> v;
  return v;
}

Vector read_vector(std::istream& is, const char* key) {
  expect_key(is, key);
  Eigen::Index n;
  is >> n;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) is >> v[i];
  return v;
}

Matrix read_matrix(std::istream& is, const char* key) {
  expect_key(is, key);
  Eigen::Index r, c;
  is >> r >> c;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) is >> m(i, j);
  return m;
}

}  // namespace

CmaEs::CmaEs(int n, const Vector& m0, double sigma0, int lambda,
             std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("dimension must be >= 1");
  if (m0.size() != n) throw std::invalid_argument("m0 has wrong dimension");
  if (!m0.allFinite()) throw std::invalid_argument("m0 must be finite");
  if (!(sigma0 > 0)) throw std::invalid_argument("sigma0 must be > 0");
  if (lambda < 2) throw std::invalid_argument("lambda must be >= 2");

  n_ = n;
  lambda_ = lambda;
  mu_ = lambda / 2;

  // Standard default strategy parameters as functions of n and lambda:
  //   w_i  proportional to ln((lambda+1)/2) - ln(i),   i = 1..mu
  //   mu_eff = (sum w)^2 / sum w^2                     (= 1/sum w_i^2 here)
  //   c_sigma = (mu_eff + 2) / (n + mu_eff + 5)
  //   d_sigma = 1 + 2 max(0, sqrt((mu_eff-1)/(n+1)) - 1) + c_sigma
  //   c_c  = (4 + mu_eff/n) / (n + 4 + 2 mu_eff/n)
  //   c_1  = 2 / ((n + 1.3)^2 + mu_eff)
  //   c_mu = min(1 - c_1, 2 (mu_eff - 2 + 1/mu_eff) / ((n + 2)^2 + mu_eff))
  weights_.resize(mu_);
  for (int i = 0; i < mu_; ++i)
    weights_[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
  weights_ /= weights_.sum();
  mu_eff_ = 1.0 / weights_.squaredNorm();

  const double nd = static_cast<double>(n);
  c_sigma_ = (mu_eff_ + 2.0) / (nd + mu_eff_ + 5.0);
  d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (nd + 1.0)) - 1.0) +
             c_sigma_;
  c_c_ = (4.0 + mu_eff_ / nd) / (nd + 4.0 + 2.0 * mu_eff_ / nd);
  c_1_ = 2.0 / ((nd + 1.3) * (nd + 1.3) + mu_eff_);
  c_mu_ = std::min(1.0 - c_1_, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) /
                                   ((nd + 2.0) * (nd + 2.0) + mu_eff_));
  chi_n_ = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

  mean_ = m0;
  sigma_ = sigma0;
  cov_ = Matrix::Identity(n, n);
  path_sigma_ = Vector::Zero(n);
  path_c_ = Vector::Zero(n);
  generation_ = 0;
  rng_ = std::mt19937_64(mix64(seed));

  refresh_eigendecomposition();
}

void CmaEs::refresh_eigendecomposition() {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov_);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("covariance eigendecomposition failed");
  eig_basis_ = solver.eigenvectors();
  eigvals_ = solver.eigenvalues();
}

std::vector<DesignPoint> CmaEs::ask() {
  if (awaiting_tell_)
    throw std::logic_error("ask called twice without an intervening tell");

  Vector scale = eigvals_.cwiseMax(0.0).cwiseSqrt();
  std::normal_distribution<double> normal(0.0, 1.0);

  last_population_.clear();
  last_population_.reserve(lambda_);
  for (int i = 0; i < lambda_; ++i) {
    Vector z(n_);
    for (int j = 0; j < n_; ++j) z[j] = normal(rng_);
    last_population_.push_back(mean_ + sigma_ * (eig_basis_ * scale.cwiseProduct(z)));
  }
  awaiting_tell_ = true;
  return last_population_;
}

void CmaEs::tell(const std::vector<DesignPoint>& points,
                 const std::vector<double>& fitnesses, bool maximize) {
  if (!awaiting_tell_) throw std::logic_error("tell called without a matching ask");
  if (points.size() != static_cast<size_t>(lambda_) ||
      fitnesses.size() != static_cast<size_t>(lambda_))
    throw std::invalid_argument("tell: population/fitness size mismatch");
  for (double f : fitnesses)
    if (std::isnan(f)) throw std::invalid_argument("tell: NaN fitness");
  for (int i = 0; i < lambda_; ++i)
    if (points[i] != last_population_[i])
      throw std::invalid_argument("tell: points differ from the matching ask");

  // Rank best-first; stable sort ties on sampling index, ascending.
  std::vector<int> order(lambda_);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return maximize ? fitnesses[a] > fitnesses[b] : fitnesses[a] < fitnesses[b];
  });

  const Vector old_mean = mean_;
  Matrix selected_steps(n_, mu_);  // y_i = (x_i - m) / sigma, best mu
  for (int k = 0; k < mu_; ++k)
    selected_steps.col(k) = (points[order[k]] - old_mean) / sigma_;

  const Vector mean_step = selected_steps * weights_;  // (m' - m) / sigma
  mean_ = old_mean + sigma_ * mean_step;

  // C^{-1/2} (m' - m) / sigma through the maintained eigendecomposition.
  const Vector ev_floored =
      eigvals_.cwiseMax(kEigenvalueFloorRel * eigvals_.maxCoeff());
  const Vector whitened =
      eig_basis_ * (eig_basis_.transpose() * mean_step).cwiseQuotient(
                       ev_floored.cwiseSqrt());

  path_sigma_ = (1.0 - c_sigma_) * path_sigma_ +
                std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * whitened;

  const double path_sigma_norm = path_sigma_.norm();
  const double expected_decay =
      std::sqrt(1.0 - std::pow(1.0 - c_sigma_, 2.0 * (generation_ + 1)));
  const bool h_sigma =
      path_sigma_norm / expected_decay < (1.4 + 2.0 / (n_ + 1.0)) * chi_n_;

  path_c_ = (1.0 - c_c_) * path_c_;
  if (h_sigma)
    path_c_ += std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_) * mean_step;

  Matrix rank_mu = Matrix::Zero(n_, n_);
  for (int k = 0; k < mu_; ++k)
    rank_mu += weights_[k] * selected_steps.col(k) * selected_steps.col(k).transpose();

  const double h_correction = h_sigma ? 0.0 : c_c_ * (2.0 - c_c_);
  cov_ = (1.0 - c_1_ - c_mu_) * cov_ +
         c_1_ * (path_c_ * path_c_.transpose() + h_correction * cov_) +
         c_mu_ * rank_mu;
  cov_ = 0.5 * (cov_ + cov_.transpose().eval());

  sigma_ *= std::exp((c_sigma_ / d_sigma_) * (path_sigma_norm / chi_n_ - 1.0));
  sigma_ = std::max(sigma_, kSigmaFloor);

  ++generation_;
  awaiting_tell_ = false;
  last_population_.clear();
  refresh_eigendecomposition();
}

void CmaEs::set_covariance(const Matrix& cov) {
  if (cov.rows() != n_ || cov.cols() != n_)
    throw std::invalid_argument("set_covariance: dimension mismatch");
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < i; ++j)
      if (std::abs(cov(i, j) - cov(j, i)) >
          1e-12 * std::max(1.0, std::abs(cov(i, j))))
        throw std::invalid_argument("set_covariance: matrix not symmetric");
  cov_ = cov;
  refresh_eigendecomposition();
}

double CmaEs::mahalanobis(const DesignPoint& a, const DesignPoint& b) const {
  if (a.size() != n_ || b.size() != n_)
    throw std::invalid_argument("mahalanobis: dimension mismatch");
  const double ev_max = eigvals_.maxCoeff();
  const double ev_min = eigvals_.minCoeff();
  if (!(ev_min > 0.0) || ev_max / ev_min > kMaxCondition)
    throw std::runtime_error("mahalanobis: covariance condition number exceeds 1e14");

  const Vector ev = eigvals_.cwiseMax(kEigenvalueFloorRel * ev_max);
  const Vector rotated = eig_basis_.transpose() * (a - b);
  double d2 = rotated.cwiseQuotient(ev.cwiseSqrt()).squaredNorm();
  if (distance_scaling_ == DistanceScaling::SigmaSqC) d2 /= sigma_ * sigma_;
  return std::sqrt(d2);
}

void CmaEs::serialize(std::ostream& os) const {
  if (awaiting_tell_)
    throw std::logic_error("serialize only allowed between ask/tell cycles");
  os << "ensopt_cmaes_state_v1\n";
  os << "n " << n_ << '\n';
  os << "lambda " << lambda_ << '\n';
  os << "generation " << generation_ << '\n';
  write_scalar(os, "sigma", sigma_);
  write_vector(os, "mean", mean_);
  write_matrix(os, "cov", cov_);
  write_vector(os, "path_sigma", path_sigma_);
  write_vector(os, "path_c", path_c_);
  os << "distance_scaling " << (distance_scaling_ == DistanceScaling::C ? 0 : 1)
     << '\n';
  os << "rng " << rng_ << '\n';
}

std::string CmaEs::serialize() const {
  std::ostringstream os;
  serialize(os);
  return os.str();
}

CmaEs CmaEs::deserialize(std::istream& is) {
  std::string magic;
  is >> magic;
  if (magic != "ensopt_cmaes_state_v1")
    throw std::runtime_error("optimizer state parse error: bad magic");

  expect_key(is, "n");
  int n;
  is >> n;
  expect_key(is, "lambda");
  int lambda;
  is >> lambda;
  expect_key(is, "generation");
  long generation;
  is >> generation;
  const double sigma = read_scalar(is, "sigma");
  const Vector mean = read_vector(is, "mean");
  const Matrix cov = read_matrix(is, "cov");
  const Vector ps = read_vector(is, "path_sigma");
  const Vector pc = read_vector(is, "path_c");
  expect_key(is, "distance_scaling");
  int scaling;
  is >> scaling;
  expect_key(is, "rng");

  CmaEs opt(n, mean, sigma, lambda, 0);
  opt.generation_ = generation;
  opt.cov_ = cov;
  opt.path_sigma_ = ps;
  opt.path_c_ = pc;
  opt.distance_scaling_ = scaling == 0 ? DistanceScaling::C : DistanceScaling::SigmaSqC;
  is >> opt.rng_;
  if (!is) throw std::runtime_error("optimizer state parse error: truncated input");
  opt.refresh_eigendecomposition();
  return opt;
}

CmaEs CmaEs::deserialize(const std::string& text) {
  std::istringstream is(text);
  return deserialize(is);
}

bool CmaEs::operator==(const CmaEs& other) const {
  return n_ == other.n_ && lambda_ == other.lambda_ &&
         generation_ == other.generation_ && sigma_ == other.sigma_ &&
         mean_ == other.mean_ && cov_ == other.cov_ &&
         path_sigma_ == other.path_sigma_ && path_c_ == other.path_c_ &&
         rng_ == other.rng_ && distance_scaling_ == other.distance_scaling_;
}

}  // namespace ensopt
