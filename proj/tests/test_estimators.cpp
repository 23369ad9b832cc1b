#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "ensopt/estimators.hpp"
#include "ensopt/rng.hpp"

using namespace ensopt;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Problem constant_problem(double value, int n_realizations) {
  Problem p;
  p.dimension = 2;
  p.bounds = {{-100, 100}, {-100, 100}};
  p.n_realizations = n_realizations;
  p.name = "constant";
  p.evaluate = [value](const DesignPoint&, int) { return value; };
  return p;
}

EstimatorConfig basic_config(int n_realizations) {
  EstimatorConfig cfg;
  cfg.n_realizations = n_realizations;
  cfg.bootstrap_threshold = 2 * n_realizations;
  cfg.max_neighbors = 2 * n_realizations;
  cfg.selection_distance = 10.0;
  return cfg;
}

}  // namespace

TEST_CASE("aggregate_mean") {
  const std::vector<double> v{2, 4, 6};
  CHECK(aggregate_mean(v) == 4.0);
  const std::vector<double> single{17.5};
  CHECK(aggregate_mean(single) == 17.5);
  const std::vector<double> constant(20, 9e9);
  CHECK(aggregate_mean(constant) == 9e9);
  CHECK_THROWS_AS(aggregate_mean(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("aggregate_risk uses the population standard deviation") {
  const std::vector<double> v{1, 3};
  CHECK(aggregate_risk(v, 1.0) == 3.0);  // mean 2, population sigma 1
  const std::vector<double> w{5, -3, 2.5, 11, 0.25};
  CHECK(aggregate_risk(w, 0.0) == aggregate_mean(w));
  const std::vector<double> constant(7, -4.5);
  for (double r : {-2.0, 0.0, 3.0}) CHECK(aggregate_risk(constant, r) == -4.5);
}

TEST_CASE("aggregate_percentile quantile convention") {
  std::vector<double> v(20);
  for (int i = 0; i < 20; ++i) v[i] = i + 1;
  // positions 1 + p*(N-1): p=0.5 -> 10.5, p=0.1 -> 2.9
  CHECK(aggregate_percentile(v, 0, 1, 0) == doctest::Approx(10.5).epsilon(1e-14));
  CHECK(aggregate_percentile(v, 1, 0, 0) == doctest::Approx(2.9).epsilon(1e-14));

  const std::vector<double> constant(9, 42.0);
  CHECK(aggregate_percentile(constant, 0.25, 0.5, 0.75) ==
        doctest::Approx(1.5 * 42.0).epsilon(1e-14));

  // Risk-neutral weights on an odd-length list hit the middle order statistic.
  std::vector<double> odd{9, 1, 7, 3, 5};
  CHECK(aggregate_percentile(odd, 0, 1, 0) == 5.0);

  CHECK_THROWS_AS(aggregate_percentile(std::vector<double>{1.0}, 0, 1, 0),
                  std::invalid_argument);
}

TEST_CASE("neighbor weight function shape") {
  const double d_max = 4000.0;
  CHECK(neighbor_weight(0.0, d_max) == 1.0);
  CHECK(neighbor_weight(d_max, d_max) == 0.0);
  CHECK(neighbor_weight(d_max / 2, d_max) == 0.5625);
  double prev = 1.0 + 1e-12;
  for (int k = 0; k <= 1000; ++k) {
    const double w = neighbor_weight(k * d_max / 1000.0, d_max);
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
    CHECK(w < prev);
    prev = w;
  }
}

TEST_CASE("draw_realizations yields distinct uniform indices") {
  std::mt19937_64 rng = substream(31);
  for (int k = 0; k < 100; ++k) {
    auto ids = draw_realizations(5, 20, rng);
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
    CHECK(ids.front() >= 1);
    CHECK(ids.back() <= 20);
  }

  // Uniformity of the single draw used by the one-realization strategy.
  std::map<int, int> counts;
  for (int k = 0; k < 10000; ++k) counts[draw_realizations(1, 20, rng)[0]]++;
  for (int r = 1; r <= 20; ++r) {
    const double freq = counts[r] / 10000.0;
    CHECK(freq >= 0.03);
    CHECK(freq <= 0.07);
  }
}

TEST_CASE("mean-of-samples estimator") {
  auto cfg = basic_config(20);

  SUBCASE("degenerate ensemble equals the single value at full cost") {
    Archive archive;
    const Problem p = constant_problem(13.25, 20);
    const auto res = estimate_mean_of_samples(vec2(1, 1), p, archive, cfg, 0);
    CHECK(res.estimate == 13.25);
    CHECK(res.fresh_simulations == 20);
    CHECK(archive.count_simulations() == 20);
  }

  SUBCASE("inserts one record per realization") {
    Archive archive;
    const Problem p = constant_problem(1.0, 20);
    estimate_mean_of_samples(vec2(0, 0), p, archive, cfg, 3);
    std::vector<bool> seen(21, false);
    for (const auto& rec : archive.records()) {
      CHECK(rec.generation == 3);
      seen[rec.realization_id] = true;
    }
    for (int r = 1; r <= 20; ++r) CHECK(seen[r]);
  }
}

TEST_CASE("one-realization estimator") {
  SUBCASE("single realization is deterministic") {
    auto cfg = basic_config(1);
    Archive archive;
    const Problem p = constant_problem(-2.0, 1);
    std::mt19937_64 rng = substream(8);
    const auto res = estimate_one_realization(vec2(0, 0), p, archive, cfg, rng, 0);
    CHECK(res.estimate == -2.0);
    CHECK(res.fresh_simulations == 1);
    CHECK(archive.records().front().realization_id == 1);
  }

  SUBCASE("constant ensemble matches mean-of-samples at 1/N_r cost") {
    auto cfg = basic_config(20);
    Archive a1, a2;
    const Problem p = constant_problem(6.5, 20);
    std::mt19937_64 rng = substream(8);
    const auto one = estimate_one_realization(vec2(0, 0), p, a1, cfg, rng, 0);
    const auto all = estimate_mean_of_samples(vec2(0, 0), p, a2, cfg, 0);
    CHECK(one.estimate == all.estimate);
    CHECK(one.fresh_simulations * 20 == all.fresh_simulations);
  }
}

TEST_CASE("neighborhood estimator") {
  CmaEs optimizer(2, vec2(0, 0), 1.0, 6, 4);  // C = I: Euclidean distances
  const double d_max = 8.0;

  SUBCASE("bootstrap phase averages fresh simulations only") {
    auto cfg = basic_config(20);
    cfg.bootstrap_samples = 3;
    cfg.selection_distance = d_max;
    Archive archive;
    const Problem p = constant_problem(5.0, 20);
    std::mt19937_64 rng = substream(1);
    const auto res =
        estimate_neighborhood(vec2(0, 0), p, archive, cfg, optimizer, rng, 0);
    CHECK(res.estimate == 5.0);
    CHECK(res.fresh_simulations == 3);
    CHECK(res.neighbors_used == 0);
    CHECK(archive.count_simulations() == 3);
  }

  SUBCASE("no neighbors in range reduces to the fresh value") {
    auto cfg = basic_config(20);
    cfg.bootstrap_threshold = 1;
    cfg.selection_distance = d_max;
    Archive archive;
    archive.insert(vec2(100, 100), 1, -999.0, 0);  // out of range
    const Problem p = constant_problem(3.75, 20);
    std::mt19937_64 rng = substream(2);
    const auto res =
        estimate_neighborhood(vec2(0, 0), p, archive, cfg, optimizer, rng, 0);
    CHECK(res.estimate == 3.75);
    CHECK(res.neighbors_used == 0);
  }

  SUBCASE("hand-evaluated two-term weighted average") {
    auto cfg = basic_config(20);
    cfg.bootstrap_threshold = 1;
    cfg.selection_distance = d_max;
    Archive archive;
    archive.insert(vec2(d_max / 2, 0), 1, 2.0, 0);  // weight (1 - 0.25)^2
    const Problem p = constant_problem(10.0, 20);
    std::mt19937_64 rng = substream(3);
    const auto res =
        estimate_neighborhood(vec2(0, 0), p, archive, cfg, optimizer, rng, 0);
    CHECK(res.neighbors_used == 1);
    CHECK(res.estimate == doctest::Approx(7.12).epsilon(1e-12));
  }

  SUBCASE("neighbor at exactly d_max has zero weight") {
    auto cfg = basic_config(20);
    cfg.bootstrap_threshold = 1;
    cfg.selection_distance = d_max;
    Archive archive;
    archive.insert(vec2(d_max, 0), 1, -1e6, 0);
    const Problem p = constant_problem(4.5, 20);
    std::mt19937_64 rng = substream(4);
    const auto res =
        estimate_neighborhood(vec2(0, 0), p, archive, cfg, optimizer, rng, 0);
    CHECK(res.neighbors_used == 1);
    CHECK(res.estimate == 4.5);
  }

  SUBCASE("zero neighbors reduces to the bootstrap formula with equal samples") {
    auto cfg = basic_config(20);
    cfg.bootstrap_samples = 2;
    cfg.main_samples = 2;
    cfg.selection_distance = d_max;
    Problem p = constant_problem(0, 20);
    p.evaluate = [](const DesignPoint&, int r) { return 100.0 + r; };

    Archive a1;  // bootstrap phase: empty archive
    std::mt19937_64 rng1 = substream(5);
    const auto boot = estimate_neighborhood(vec2(0, 0), p, a1, cfg, optimizer, rng1, 0);

    Archive a2;  // main phase, nothing in range
    cfg.bootstrap_threshold = 1;
    a2.insert(vec2(50, 50), 1, 7.0, 0);
    std::mt19937_64 rng2 = substream(5);
    const auto main = estimate_neighborhood(vec2(0, 0), p, a2, cfg, optimizer, rng2, 0);
    CHECK(boot.estimate == main.estimate);
  }

  SUBCASE("estimate is a convex combination of contributing values") {
    auto cfg = basic_config(20);
    cfg.bootstrap_threshold = 1;
    cfg.selection_distance = d_max;
    Problem p = constant_problem(0, 20);
    p.evaluate = [](const DesignPoint& x, int r) { return x.sum() + 3.0 * r; };

    Archive archive;
    std::mt19937_64 seeder = substream(6);
    std::uniform_real_distribution<double> pos(-4, 4);
    for (int k = 0; k < 60; ++k)
      archive.insert(vec2(pos(seeder), pos(seeder)), 1 + k % 20,
                     pos(seeder) * 10, 0);

    for (int q = 0; q < 30; ++q) {
      const Vector query = vec2(pos(seeder), pos(seeder));
      const std::size_t before = archive.size();
      std::mt19937_64 rng = substream(7, q);
      const auto res =
          estimate_neighborhood(query, p, archive, cfg, optimizer, rng, 0);
      // Contributing values: own fresh simulation plus pre-query neighbors.
      double lo = p.evaluate(query, archive.records()[before].realization_id);
      double hi = lo;
      for (std::size_t i = 0; i < before; ++i) {
        lo = std::min(lo, archive.records()[i].value);
        hi = std::max(hi, archive.records()[i].value);
      }
      CHECK(res.estimate >= lo - 1e-12 * std::abs(lo));
      CHECK(res.estimate <= hi + 1e-12 * std::abs(hi));
    }
  }

  SUBCASE("scaling the objective by a power of two scales estimates exactly") {
    auto cfg = basic_config(20);
    cfg.bootstrap_threshold = 1;
    cfg.selection_distance = d_max;
    Problem p = constant_problem(0, 20);
    p.evaluate = [](const DesignPoint& x, int r) { return x.sum() + 3.0 * r; };
    Problem p4 = p;
    p4.evaluate = [](const DesignPoint& x, int r) {
      return 4.0 * (x.sum() + 3.0 * r);
    };

    Archive a1, a2;
    std::mt19937_64 seeder = substream(10);
    std::uniform_real_distribution<double> pos(-4, 4);
    std::vector<Vector> queries;
    for (int q = 0; q < 40; ++q) queries.push_back(vec2(pos(seeder), pos(seeder)));

    std::vector<double> est1, est4;
    for (int q = 0; q < 40; ++q) {
      std::mt19937_64 r1 = substream(11, q), r2 = substream(11, q);
      est1.push_back(
          estimate_neighborhood(queries[q], p, a1, cfg, optimizer, r1, 0).estimate);
      est4.push_back(
          estimate_neighborhood(queries[q], p4, a2, cfg, optimizer, r2, 0).estimate);
    }
    for (int q = 0; q < 40; ++q) CHECK(est4[q] == 4.0 * est1[q]);
  }

  SUBCASE("std term vanishes on equal values and the risk form returns them") {
    auto cfg = basic_config(20);
    cfg.bootstrap_threshold = 1;
    cfg.selection_distance = d_max;
    cfg.use_std_term = true;
    const Problem p = constant_problem(6.0, 20);
    for (double r : {-3.0, 0.0, 2.0}) {
      cfg.risk_factor = r;
      Archive archive;
      archive.insert(vec2(1, 0), 1, 6.0, 0);
      archive.insert(vec2(0, 1), 2, 6.0, 0);
      std::mt19937_64 rng = substream(12);
      const auto res =
          estimate_neighborhood(vec2(0, 0), p, archive, cfg, optimizer, rng, 0);
      REQUIRE(res.std_estimate.has_value());
      CHECK(*res.std_estimate == 0.0);
      CHECK(res.estimate == 6.0);
    }
  }

  SUBCASE("deferred insertion keeps the archive unchanged until flushed") {
    auto cfg = basic_config(20);
    Archive archive;
    std::vector<EvaluationRecord> deferred;
    const Problem p = constant_problem(1.0, 20);
    std::mt19937_64 rng = substream(13);
    estimate_neighborhood(vec2(0, 0), p, archive, cfg, optimizer, rng, 0, &deferred);
    CHECK(archive.size() == 0);
    CHECK(deferred.size() == 1);
  }
}

TEST_CASE("simulation accounting identity across mixed estimates") {
  auto cfg = basic_config(20);
  cfg.selection_distance = 8.0;
  CmaEs optimizer(2, vec2(0, 0), 1.0, 6, 14);
  Problem p = constant_problem(0, 20);
  p.evaluate = [](const DesignPoint& x, int r) { return x.squaredNorm() + r; };

  Archive archive;
  long fresh_total = 0;
  std::mt19937_64 seeder = substream(15);
  std::uniform_real_distribution<double> pos(-3, 3);
  for (int k = 0; k < 50; ++k) {
    const Vector query = vec2(pos(seeder), pos(seeder));
    std::mt19937_64 rng = substream(16, k);
    EstimateResult res;
    switch (k % 3) {
      case 0:
        res = estimate_mean_of_samples(query, p, archive, cfg, 0);
        break;
      case 1:
        res = estimate_one_realization(query, p, archive, cfg, rng, 0);
        break;
      default:
        res = estimate_neighborhood(query, p, archive, cfg, optimizer, rng, 0);
        break;
    }
    fresh_total += res.fresh_simulations;
  }
  CHECK(archive.count_simulations() == fresh_total);
}

TEST_CASE("estimator config validation") {
  auto cfg = basic_config(20);
  cfg.bootstrap_samples = 21;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = basic_config(20);
  cfg.main_samples = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = basic_config(20);
  cfg.selection_distance = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
