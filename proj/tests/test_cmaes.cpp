#include <doctest.h>

#include <cmath>
#include <random>

#include "ensopt/cmaes.hpp"

using namespace ensopt;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

// -f(x) = |x|^2, maximized.
double neg_sq_norm(const Vector& x) { return -x.squaredNorm(); }

}  // namespace

TEST_CASE("initialization yields identity covariance and zero paths") {
  CmaEs opt(2, vec2(0, 0), 1.0, 6, 42);
  CHECK(opt.covariance() == Matrix::Identity(2, 2));
  CHECK(opt.generation() == 0);
  CHECK(opt.sigma() == 1.0);
}

TEST_CASE("initialization rejects invalid arguments") {
  CHECK_THROWS_AS(CmaEs(0, Vector::Zero(0), 1.0, 6, 0), std::invalid_argument);
  CHECK_THROWS_AS(CmaEs(2, vec2(0, std::nan("")), 1.0, 6, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(CmaEs(2, vec2(0, 0), 0.0, 6, 0), std::invalid_argument);
  CHECK_THROWS_AS(CmaEs(2, vec2(0, 0), -1.0, 6, 0), std::invalid_argument);
  CHECK_THROWS_AS(CmaEs(2, vec2(0, 0), 1.0, 1, 0), std::invalid_argument);
}

TEST_CASE("recombination weights are non-increasing and sum to 1") {
  for (int lambda : {2, 6, 40}) {
    CmaEs opt(5, Vector::Zero(5), 1.0, lambda, 1);
    const Vector& w = opt.recombination_weights();
    CHECK(w.size() == lambda / 2);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-14));
    for (Eigen::Index i = 1; i < w.size(); ++i) CHECK(w[i] <= w[i - 1]);
  }
}

TEST_CASE("same seed gives bit-identical first populations") {
  Vector m0(3);
  m0 << 1, 2, 3;
  CmaEs a(3, m0, 0.5, 8, 7);
  CmaEs b(3, m0, 0.5, 8, 7);
  const auto pa = a.ask();
  const auto pb = b.ask();
  REQUIRE(pa.size() == 8);
  for (int i = 0; i < 8; ++i) CHECK(pa[i] == pb[i]);
}

TEST_CASE("degenerate step size collapses the population onto the mean") {
  Vector m0 = vec2(1.0, -2.0);
  CmaEs opt(2, m0, 1e-300, 6, 3);
  for (const auto& x : opt.ask()) CHECK(x == m0);
}

TEST_CASE("sampling follows the distribution law") {
  const int lambda = 10000;

  SUBCASE("standard normal: C = I, sigma = 1, m = 0") {
    CmaEs opt(2, vec2(0, 0), 1.0, lambda, 99);
    const auto points = opt.ask();
    for (int coord = 0; coord < 2; ++coord) {
      double mean = 0, sq = 0;
      for (const auto& x : points) mean += x[coord];
      mean /= lambda;
      for (const auto& x : points) sq += (x[coord] - mean) * (x[coord] - mean);
      const double variance = sq / lambda;
      CHECK(std::abs(mean) <= 4.0 / std::sqrt(lambda));
      CHECK(variance == doctest::Approx(1.0).epsilon(0.10));
    }
  }

  SUBCASE("anisotropic covariance diag(4, 1)") {
    CmaEs opt(2, vec2(0, 0), 1.0, lambda, 17);
    Matrix cov = Matrix::Zero(2, 2);
    cov(0, 0) = 4.0;
    cov(1, 1) = 1.0;
    opt.set_covariance(cov);
    const auto points = opt.ask();
    double v0 = 0, v1 = 0;
    for (const auto& x : points) {
      v0 += x[0] * x[0];
      v1 += x[1] * x[1];
    }
    const double ratio = v0 / v1;
    CHECK(ratio >= 3.2);
    CHECK(ratio <= 4.8);
  }
}

TEST_CASE("tell validates its inputs") {
  CmaEs opt(2, vec2(0, 0), 1.0, 6, 5);
  auto points = opt.ask();
  std::vector<double> fitness(6, 1.0);

  SUBCASE("mismatched lengths") {
    fitness.pop_back();
    CHECK_THROWS_AS(opt.tell(points, fitness, true), std::invalid_argument);
  }
  SUBCASE("NaN fitness") {
    fitness[3] = std::nan("");
    CHECK_THROWS_AS(opt.tell(points, fitness, true), std::invalid_argument);
  }
  SUBCASE("foreign points") {
    points[0][0] += 1.0;
    CHECK_THROWS_AS(opt.tell(points, fitness, true), std::invalid_argument);
  }
}

TEST_CASE("equal fitnesses recombine in sampling-index order") {
  CmaEs opt(2, vec2(0, 0), 1.0, 6, 11);
  const auto points = opt.ask();
  opt.tell(points, std::vector<double>(6, 7.0), true);

  // Ties broken by sampling index: the mu best are points 0..mu-1.
  CmaEs ref(2, vec2(0, 0), 1.0, 6, 11);
  const Vector& w = ref.recombination_weights();
  Vector expected = Vector::Zero(2);
  for (Eigen::Index k = 0; k < w.size(); ++k) expected += w[k] * points[k];
  CHECK(opt.mean().isApprox(expected, 1e-14));
}

TEST_CASE("maximize flag with negated fitnesses gives an identical trajectory") {
  CmaEs max_opt(3, Vector::Constant(3, 2.0), 1.0, 8, 23);
  CmaEs min_opt(3, Vector::Constant(3, 2.0), 1.0, 8, 23);
  for (int g = 0; g < 15; ++g) {
    const auto pa = max_opt.ask();
    const auto pb = min_opt.ask();
    std::vector<double> fa, fb;
    for (const auto& x : pa) fa.push_back(neg_sq_norm(x));
    for (const auto& x : pb) fb.push_back(-neg_sq_norm(x));
    max_opt.tell(pa, fa, true);
    min_opt.tell(pb, fb, false);
  }
  CHECK(max_opt == min_opt);
}

TEST_CASE("translation invariance of the fitness trajectory") {
  Vector t(3);
  t << 5.0, -2.0, 0.5;
  CmaEs plain(3, Vector::Constant(3, 1.0), 0.7, 8, 31);
  CmaEs shifted(3, Vector::Constant(3, 1.0) + t, 0.7, 8, 31);
  for (int g = 0; g < 20; ++g) {
    const auto pa = plain.ask();
    const auto pb = shifted.ask();
    std::vector<double> fa, fb;
    for (const auto& x : pa) fa.push_back(neg_sq_norm(x));
    for (const auto& x : pb) fb.push_back(neg_sq_norm(x - t));
    for (int i = 0; i < 8; ++i)
      CHECK(fa[i] == doctest::Approx(fb[i]).epsilon(1e-9));
    // Identical rankings keep the two trajectories from drifting apart.
    plain.tell(pa, fa, true);
    shifted.tell(pb, fa, true);
  }
}

TEST_CASE("ask/tell determinism over many generations") {
  auto evolve = [] {
    CmaEs opt(4, Vector::Constant(4, 3.0), 2.0, 10, 77);
    for (int g = 0; g < 30; ++g) {
      const auto points = opt.ask();
      std::vector<double> fitness;
      for (const auto& x : points) fitness.push_back(neg_sq_norm(x));
      opt.tell(points, fitness, true);
    }
    return opt.serialize();
  };
  CHECK(evolve() == evolve());
}

TEST_CASE("covariance stays symmetric positive definite on a long sphere run") {
  CmaEs opt(12, Vector::Constant(12, 3.0), 2.0, 40, 5);
  for (int g = 0; g < 500; ++g) {
    const auto points = opt.ask();
    std::vector<double> fitness;
    for (const auto& x : points) fitness.push_back(neg_sq_norm(x));
    opt.tell(points, fitness, true);
  }
  const Matrix& cov = opt.covariance();
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      CHECK(std::abs(cov(i, j) - cov(j, i)) <=
            1e-12 * std::max(1.0, std::abs(cov(i, j))));
  CHECK(opt.smallest_eigenvalue() > 0.0);
}

TEST_CASE("mahalanobis distance") {
  CmaEs opt(2, vec2(0, 0), 1.0, 6, 13);

  SUBCASE("reduces to Euclidean under C = I") {
    CHECK(opt.mahalanobis(vec2(0, 0), vec2(3, 4)) == doctest::Approx(5.0).epsilon(1e-14));
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    for (int k = 0; k < 100; ++k) {
      const Vector a = vec2(normal(rng), normal(rng));
      const Vector b = vec2(normal(rng), normal(rng));
      CHECK(opt.mahalanobis(a, b) ==
            doctest::Approx((a - b).norm()).epsilon(1e-12));
    }
  }

  SUBCASE("identity of indiscernibles") {
    CHECK(opt.mahalanobis(vec2(1.5, -2.0), vec2(1.5, -2.0)) == 0.0);
  }

  SUBCASE("anisotropic hand value") {
    Matrix cov = Matrix::Zero(2, 2);
    cov(0, 0) = 4.0;
    cov(1, 1) = 1.0;
    opt.set_covariance(cov);
    CHECK(opt.mahalanobis(vec2(0, 0), vec2(2, 0)) ==
          doctest::Approx(1.0).epsilon(1e-14));
  }

  SUBCASE("symmetry and triangle inequality on random triples") {
    Matrix a = Matrix::Random(2, 2);
    Matrix cov = a * a.transpose() + 0.5 * Matrix::Identity(2, 2);
    opt.set_covariance(0.5 * (cov + cov.transpose()));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    for (int k = 0; k < 200; ++k) {
      const Vector x = vec2(normal(rng), normal(rng));
      const Vector y = vec2(normal(rng), normal(rng));
      const Vector z = vec2(normal(rng), normal(rng));
      CHECK(opt.mahalanobis(x, y) == opt.mahalanobis(y, x));
      CHECK(opt.mahalanobis(x, z) <=
            (opt.mahalanobis(x, y) + opt.mahalanobis(y, z)) * (1 + 1e-9));
    }
  }

  SUBCASE("signals an ill-conditioned covariance") {
    Matrix cov = Matrix::Identity(2, 2);
    cov(1, 1) = 1e-15;
    opt.set_covariance(cov);
    CHECK_THROWS_AS(opt.mahalanobis(vec2(0, 0), vec2(1, 1)), std::runtime_error);
  }

  SUBCASE("sigma^2 C scaling divides by sigma") {
    const double d_plain = opt.mahalanobis(vec2(0, 0), vec2(3, 4));
    opt.set_distance_scaling(DistanceScaling::SigmaSqC);
    CHECK(opt.mahalanobis(vec2(0, 0), vec2(3, 4)) ==
          doctest::Approx(d_plain / opt.sigma()).epsilon(1e-14));
  }
}

TEST_CASE("serialization round-trips exactly and preserves the trajectory") {
  CmaEs opt(3, Vector::Constant(3, 1.0), 0.8, 8, 41);
  for (int g = 0; g < 10; ++g) {
    const auto points = opt.ask();
    std::vector<double> fitness;
    for (const auto& x : points) fitness.push_back(neg_sq_norm(x));
    opt.tell(points, fitness, true);
  }
  CmaEs restored = CmaEs::deserialize(opt.serialize());
  CHECK(restored == opt);

  const auto pa = opt.ask();
  const auto pb = restored.ask();
  for (int i = 0; i < 8; ++i) CHECK(pa[i] == pb[i]);
}

TEST_CASE("strict ask/tell alternation is enforced") {
  CmaEs opt(2, vec2(0, 0), 1.0, 6, 1);
  std::vector<double> fitness(6, 0.0);
  CHECK_THROWS_AS(opt.tell({}, {}, true), std::logic_error);
  const auto points = opt.ask();
  CHECK_THROWS_AS(opt.ask(), std::logic_error);
  CHECK_THROWS_AS(opt.serialize(), std::logic_error);
  opt.tell(points, fitness, true);
}

TEST_CASE("converges on a small sphere problem") {
  CmaEs opt(4, Vector::Constant(4, 3.0), 2.0, 12, 2024);
  double best = -1e300;
  for (int g = 0; g < 300 && best < -1e-9; ++g) {
    const auto points = opt.ask();
    std::vector<double> fitness;
    for (const auto& x : points) fitness.push_back(neg_sq_norm(x));
    best = std::max(best, *std::max_element(fitness.begin(), fitness.end()));
    opt.tell(points, fitness, true);
  }
  CHECK(best >= -1e-9);
}
