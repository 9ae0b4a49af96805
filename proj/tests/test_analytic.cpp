#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sdp/analytic.hpp"

using namespace sdp;

namespace {

// Closed-form single-provider profit under unit-uniform wages and reservations.
double closed_single(double p, double fee, double q = 1.0, int I = 50, int J = 200) {
  const double s = I * std::clamp(p, 0.0, 1.0);
  const double Q = q * std::log2(1.0 + s / I);
  const double share = Q > 0.0 ? std::clamp(1.0 - fee / Q, 0.0, 1.0) : 0.0;
  return fee * J * share - p * s;
}

// Two equal-quality providers bundled: P(u1 + u2 > b).
double two_sum_tail(double b) {
  if (b <= 0) return 1.0;
  if (b >= 2) return 0.0;
  return b <= 1 ? 1.0 - b * b / 2 : (2 - b) * (2 - b) / 2;
}

}  // namespace

TEST_CASE("expected supply") {
  const ReservationDistribution u{};
  CHECK(expected_supply(u, 0.486, 50) == doctest::Approx(24.3));
  CHECK(expected_supply(u, 0.0, 50) == 0.0);
  CHECK(expected_supply(u, 1.0, 50) == 50.0);
  CHECK(expected_supply(u, 1.7, 50) == 50.0);
  CHECK(expected_supply(u, -0.2, 50) == 0.0);
  const ReservationDistribution shifted{DistributionKind::uniform, 0.2, 0.6};
  CHECK(expected_supply(shifted, 0.3, 40) == doctest::Approx(10.0));
}

TEST_CASE("single demand") {
  const ReservationDistribution u{};
  CHECK(single_demand(0.571, 0.286, u, 200) == doctest::Approx(200 * (1 - 0.286 / 0.571)));
  CHECK(single_demand(0.571, 0.6, u, 200) == 0.0);
  CHECK(single_demand(0.571, 0.571, u, 200) == 0.0);
  CHECK(single_demand(0.0, 0.0, u, 200) == 0.0);  // strict: nobody gains from zero quality
  CHECK(single_demand(0.571, 0.0, u, 200) == doctest::Approx(200.0));

  for (double fee : {0.05, 0.2, 0.286, 0.5}) {
    const double share = oracle::sampled_share(0.571, fee, 1000000, 17);
    CHECK(std::abs(single_demand(0.571, fee, u, 200) / 200 - share) < 2e-3);
  }
}

TEST_CASE("bundle demand") {
  const std::vector<double> q{0.601695, 0.601695};
  CHECK(bundle_demand(q, 0.491282, 200) ==
        doctest::Approx(200 * two_sum_tail(0.491282 / 0.601695)).epsilon(1e-12));
  CHECK(bundle_demand(q, 0.9, 200) == doctest::Approx(200 * two_sum_tail(0.9 / 0.601695)));
  CHECK(bundle_demand(q, 0.0, 200) == 200.0);
  CHECK(bundle_demand(q, 2 * 0.601695, 200) == doctest::Approx(0.0).epsilon(1e-12));

  const std::vector<double> one_zero{0.6, 0.0};
  const std::vector<double> single{0.6};
  CHECK(bundle_demand(one_zero, 0.3, 200) == doctest::Approx(bundle_demand(single, 0.3, 200)));
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(bundle_demand(zeros, 0.0, 200) == 0.0);

  // Shifted reservation ranges against sampling.
  const std::vector<ReservationDistribution> dists{{DistributionKind::uniform, 0.2, 0.8},
                                                   {DistributionKind::uniform, 0.1, 1.3}};
  const std::vector<double> q2{0.5, 0.3};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> a(0.2, 0.8), b(0.1, 1.3);
  long hits = 0;
  const long n = 1000000;
  for (long i = 0; i < n; ++i)
    if (0.5 * a(rng) + 0.3 * b(rng) > 0.4) ++hits;
  CHECK(std::abs(bundle_demand(q2, dists, 0.4, 100) / 100 - static_cast<double>(hits) / n) < 2e-3);
}

TEST_CASE("uniform sum tail against numeric convolution") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> w(0.05, 2.0), frac(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + trial % 4;
    std::vector<double> weights(k);
    for (double& x : weights) x = w(rng);
    double total = 0;
    for (double x : weights) total += x;
    const double b = frac(rng) * total;
    CHECK(std::abs(weighted_uniform_sum_tail(weights, b) - oracle::convolution_tail(weights, b)) <
          1e-6);
  }
}

TEST_CASE("uniform sum tail edge cases") {
  const std::vector<double> w{0.3, 0.7};
  CHECK(weighted_uniform_sum_tail(w, -1.0) == 1.0);
  CHECK(weighted_uniform_sum_tail(w, 0.0) == 1.0);
  CHECK(weighted_uniform_sum_tail(w, 1.0) == 0.0);
  CHECK(weighted_uniform_sum_tail(w, 5.0) == 0.0);
  CHECK(weighted_uniform_sum_tail(w, 0.5) == doctest::Approx(0.5));
  const std::vector<double> none;
  CHECK(weighted_uniform_sum_tail(none, 0.0) == 0.0);
  CHECK(weighted_uniform_sum_tail(none, -0.1) == 1.0);
  const std::vector<double> bad{0.3, 0.0};
  CHECK_THROWS_AS(weighted_uniform_sum_tail(bad, 0.1), std::invalid_argument);
  const std::vector<double> nan{0.3, NAN};
  CHECK_THROWS_AS(weighted_uniform_sum_tail(nan, 0.1), std::invalid_argument);

  // A tiny weight barely perturbs the distribution of the others.
  const std::vector<double> tiny{1.0, 1e-9, 0.5};
  const std::vector<double> without{1.0, 0.5};
  for (double b : {0.2, 0.6, 0.75, 1.1, 1.4}) {
    const double t = weighted_uniform_sum_tail(tiny, b);
    CHECK(t >= 0.0);
    CHECK(t <= 1.0);
    CHECK(std::abs(t - weighted_uniform_sum_tail(without, b)) < 1e-8);
  }
}

TEST_CASE("uniform sum tail is non-increasing and symmetric") {
  const std::vector<double> w{0.4, 0.9, 0.25, 1.3, 0.6};
  double total = 0;
  for (double x : w) total += x;
  double prev = 1.0;
  for (int i = 0; i <= 400; ++i) {
    const double b = total * i / 400.0;
    const double t = weighted_uniform_sum_tail(w, b);
    CHECK(t <= prev + 1e-15);
    CHECK(std::abs(t + weighted_uniform_sum_tail(w, total - b) - 1.0) < 1e-12);
    prev = t;
  }
}

TEST_CASE("single profit examples") {
  const auto cfg = default_market();
  const auto zero = single_profit(cfg, 0, {0.0, 0.0});
  CHECK(zero.profit == 0.0);
  CHECK(zero.expected_demand == 0.0);
  CHECK(zero.expected_supply[0] == 0.0);

  // Fee just under Q(0.486): a thin slice of users still subscribe.
  const auto thin = single_profit(cfg, 0, {0.486, 0.571});
  CHECK(thin.profit == doctest::Approx(closed_single(0.486, 0.571)).epsilon(1e-12));
  CHECK(thin.profit == doctest::Approx(-11.724).epsilon(1e-4));
  const double share = oracle::sampled_share(std::log2(1.486), 0.571, 1000000, 3);
  CHECK(std::abs(thin.expected_demand / 200 - share) < 3e-4);

  // Fee equal to the quality: nobody subscribes, the sensor bill remains.
  const auto none = single_profit(cfg, 0, {0.486, std::log2(1.486)});
  CHECK(none.expected_demand == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(none.profit == doctest::Approx(-0.486 * 24.3));

  const auto best = single_profit(cfg, 0, {0.48556, 0.28550});
  CHECK(best.quality[0] == doctest::Approx(0.57101).epsilon(1e-4));
  CHECK(best.profit == doctest::Approx(16.7619).epsilon(1e-4));
}

TEST_CASE("single profit matches the closed form on a grid") {
  const auto cfg = default_market();
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) {
      const double p = i / 20.0, f = j / 20.0;
      const auto out = single_profit(cfg, 1, {p, f});
      CHECK(out.profit == doctest::Approx(closed_single(p, f)).epsilon(1e-10).scale(1.0));
      CHECK(out.profit == doctest::Approx(out.revenue - out.cost));
    }
}

TEST_CASE("bundle profit") {
  const auto cfg = default_market();
  const std::size_t both[] = {0, 1};
  const auto out = bundle_profit(cfg, both, {{0.517499, 0.517499}, 0.491282});
  CHECK(out.quality[0] == doctest::Approx(0.601695).epsilon(1e-5));
  CHECK(out.profit == doctest::Approx(38.7238).epsilon(1e-4));
  const double Q = std::log2(1.517499);
  const double expect = 0.491282 * 200 * two_sum_tail(0.491282 / Q) - 2 * 0.517499 * 50 * 0.517499;
  CHECK(out.profit == doctest::Approx(expect).epsilon(1e-12));
  CHECK(out.profit == doctest::Approx(out.revenue - out.cost));
  CHECK_THROWS_AS(bundle_profit(cfg, both, {{0.5}, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(bundle_profit(cfg, both, {{0.5, -0.1}, 0.4}), std::invalid_argument);
}

TEST_CASE("singleton bundle equals single profit") {
  const auto cfg = default_market();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double p = u(rng), f = u(rng);
    const std::size_t one[] = {1};
    CHECK(std::abs(bundle_profit(cfg, one, {{p}, f}).profit - single_profit(cfg, 1, {p, f}).profit) <=
          1e-9);
  }
}

TEST_CASE("profit surface") {
  const auto cfg = default_market();
  const std::size_t first[] = {0};
  const GridAxis axis{0.0, 1.0, 101};
  const auto surface = profit_surface(cfg, first, axis, axis);
  REQUIRE(surface.values.size() == 101 * 101);
  CHECK(surface.at(0, 0) == 0.0);
  CHECK(surface.at(49, 29) == doctest::Approx(closed_single(0.49, 0.29)).epsilon(1e-12));
  const auto it = std::max_element(surface.values.begin(), surface.values.end());
  const auto idx = static_cast<std::size_t>(it - surface.values.begin());
  CHECK(std::abs(axis.value(idx / 101) - 0.486) <= 0.01 + 1e-12);
  CHECK(std::abs(axis.value(idx % 101) - 0.286) <= 0.01 + 1e-12);

  auto flat = cfg;
  flat.providers[0].quality_factor = 0.0;
  const auto zero = profit_surface(flat, first, axis, axis);
  for (std::size_t i = 0; i < 101; ++i)
    for (std::size_t j = 0; j < 101; ++j)
      CHECK(zero.at(i, j) == doctest::Approx(-axis.value(i) * 50 * axis.value(i)));

  CHECK_THROWS_AS(profit_surface(cfg, first, GridAxis{0.0, 1.0, 1}, axis), std::invalid_argument);
  CHECK_THROWS_AS(profit_surface(cfg, first, GridAxis{0.5, 0.2, 11}, axis), std::invalid_argument);
  CHECK_THROWS_AS(profit_surface(cfg, first, GridAxis{-0.5, 0.2, 11}, axis), std::invalid_argument);
}

TEST_CASE("grid axis") {
  const GridAxis a{0.0, 1.0, 101};
  CHECK(a.value(0) == 0.0);
  CHECK(a.value(100) == 1.0);
  CHECK(a.value(37) == doctest::Approx(0.37));
  CHECK(GridAxis{0.3, 0.9, 1}.value(0) == 0.3);
  const auto s = GridAxis::with_step(0.0, 1.0, 0.001);
  CHECK(s.points == 1001);
  CHECK_THROWS_AS(check_axis(GridAxis{0.0, 1.0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(check_axis(GridAxis{NAN, 1.0, 3}), std::invalid_argument);
}

TEST_CASE("max fee") {
  const auto cfg = default_market();
  const std::size_t both[] = {0, 1};
  CHECK(max_fee(cfg, both) == doctest::Approx(2.0));
  const std::size_t one[] = {1};
  CHECK(max_fee(cfg, one) == doctest::Approx(1.0));
}
