#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sdp/analytic.hpp"
#include "sdp/optimizer.hpp"

using namespace sdp;

namespace {

double closed_single(double p, double fee, double q, int I, int J) {
  const double s = I * std::clamp(p, 0.0, 1.0);
  const double Q = q * std::log2(1.0 + s / I);
  const double share = Q > 0.0 ? std::clamp(1.0 - fee / Q, 0.0, 1.0) : 0.0;
  return fee * J * share - p * s;
}

// For fixed p the best fee is Q/2, so the grid only needs the buying price.
double best_closed_price(double q, int I, int J, double step) {
  double best = -1e300, arg = 0.0;
  for (int i = 0; i * step <= 1.0 + 1e-12; ++i) {
    const double p = i * step;
    const double Q = q * std::log2(1.0 + p);
    const double v = closed_single(p, Q / 2, q, I, J);
    if (v > best) {
      best = v;
      arg = p;
    }
  }
  return arg;
}

}  // namespace

TEST_CASE("golden-section search") {
  const auto quad = maximize_unimodal_1d([](double x) { return -(x - 0.3) * (x - 0.3); }, 0, 1, 1e-8);
  CHECK(quad.x == doctest::Approx(0.3).epsilon(1e-7));
  CHECK(quad.converged);
  CHECK(quad.evaluations > 2);

  const double Q = 0.571;
  const auto fee = maximize_unimodal_1d([&](double f) { return f * (1 - f / Q); }, 0, Q, 1e-7);
  CHECK(fee.x == doctest::Approx(Q / 2).epsilon(1e-6));
  CHECK(fee.value == doctest::Approx(Q / 4).epsilon(1e-9));

  const auto flat = maximize_unimodal_1d([](double) { return 2.0; }, 0.2, 0.9, 1e-6);
  CHECK(flat.x == 0.2);
  CHECK(flat.value == 2.0);

  const auto edge = maximize_unimodal_1d([](double x) { return x; }, 0, 1, 1e-6);
  CHECK(edge.x == doctest::Approx(1.0).epsilon(1e-5));

  CHECK_THROWS_AS(maximize_unimodal_1d([](double x) { return x; }, 1, 1, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(maximize_unimodal_1d([](double x) { return x; }, 0, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(maximize_unimodal_1d([](double) { return NAN; }, 0, 1, 1e-3), OptimizationError);
}

TEST_CASE("single provider optimum") {
  const auto cfg = default_market();
  const auto r = maximize_prices_single(cfg, 0);
  CHECK(r.converged);
  CHECK(std::abs(r.single().buying_price - 0.486) <= 0.002);
  CHECK(std::abs(r.single().fee - 0.286) <= 0.002);
  CHECK(std::abs(r.outcome.quality[0] - 0.571) <= 0.002);
  CHECK(r.profit() == doctest::Approx(16.7619).epsilon(1e-4));
  const auto r2 = maximize_prices_single(cfg, 1);
  CHECK(r.profit() + r2.profit() == doctest::Approx(33.524).epsilon(1e-4));
}

TEST_CASE("single optimum agrees with a fine closed-form grid") {
  for (auto [q, J] : std::vector<std::pair<double, int>>{{1.0, 200}, {1.0, 400}, {0.7, 200}, {1.5, 120}}) {
    auto cfg = default_market();
    cfg.providers[0].quality_factor = q;
    cfg.users.count = J;
    const auto r = maximize_prices_single(cfg, 0);
    CHECK(std::abs(r.single().buying_price - best_closed_price(q, 50, J, 0.001)) <= 0.002);
    CHECK(std::abs(r.single().fee - r.outcome.quality[0] / 2) <= 0.002);
  }
}

TEST_CASE("more users raise the buying price") {
  auto cfg = default_market();
  const double base = maximize_prices_single(cfg, 0).single().buying_price;
  cfg.users.count = 400;
  const auto more = maximize_prices_single(cfg, 0);
  CHECK(more.single().buying_price > base);
  CHECK(more.profit() > 2 * 16.7);
}

TEST_CASE("profit is monotone in users and quality factor") {
  auto cfg = default_market();
  double prev = -1.0;
  for (int J : {50, 100, 200, 300}) {
    cfg.users.count = J;
    const double v = maximize_prices_single(cfg, 0).profit();
    CHECK(v > prev);
    prev = v;
  }
  cfg = default_market();
  prev = -1.0;
  for (double q : {0.25, 0.5, 0.75, 1.0}) {
    cfg.providers[0].quality_factor = q;
    const double v = maximize_prices_single(cfg, 0).profit();
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("zero quality means no trade") {
  auto cfg = default_market();
  cfg.providers[0].quality_factor = 0.0;
  const auto r = maximize_prices_single(cfg, 0);
  CHECK(r.single().buying_price == doctest::Approx(0.0).epsilon(1e-3).scale(1));
  CHECK(r.profit() == doctest::Approx(0.0).scale(1));
}

TEST_CASE("bundle optimum") {
  const auto cfg = default_market();
  const std::size_t both[] = {0, 1};
  const auto r = maximize_prices_bundle(cfg, both);
  CHECK(r.converged);
  CHECK(r.sweeps >= 1);
  for (double p : r.prices.buying_prices) CHECK(std::abs(p - 0.517) <= 0.002);
  CHECK(std::abs(r.prices.bundle_fee - 0.491) <= 0.002);
  CHECK(r.profit() == doctest::Approx(38.7238).epsilon(1e-4));
  const double separate = maximize_prices_single(cfg, 0).profit() + maximize_prices_single(cfg, 1).profit();
  CHECK(r.profit() - separate >= 4.9);
  CHECK(r.profit() - separate <= 5.5);
}

TEST_CASE("singleton coalition delegates to the single optimizer") {
  const auto cfg = default_market();
  const std::size_t one[] = {1};
  const auto a = maximize_prices_bundle(cfg, one);
  const auto b = maximize_prices_single(cfg, 1);
  CHECK(a.prices.buying_prices == b.prices.buying_prices);
  CHECK(a.prices.bundle_fee == b.prices.bundle_fee);
  CHECK(a.profit() == b.profit());
}

TEST_CASE("asymmetric bundle") {
  auto cfg = default_market();
  cfg.providers[1].quality_factor = 0.7;
  const std::size_t both[] = {0, 1};
  const auto r = maximize_prices_bundle(cfg, both);
  CHECK(r.converged);
  // The optimal fee sits below both qualities, where demand depends on Q1 * Q2
  // only; that product is symmetric in the two buying prices.
  CHECK(r.prices.bundle_fee < r.outcome.quality[1]);
  CHECK(r.prices.buying_prices[1] == doctest::Approx(r.prices.buying_prices[0]).epsilon(1e-3));
  CHECK(r.outcome.quality[1] < r.outcome.quality[0]);

  const GridAxis axes[] = {GridAxis::with_step(0, 1, 0.02), GridAxis::with_step(0, 1, 0.02),
                           GridAxis::with_step(0, 1.7, 0.02)};
  const auto g = grid_oracle(
      [&](std::span<const double> x) {
        return bundle_profit(cfg, both, {{x[0], x[1]}, x[2]}).profit;
      },
      axes);
  CHECK(r.profit() >= g.value - 1e-9);
  CHECK(std::abs(r.prices.buying_prices[0] - g.point[0]) <= 0.03);
  CHECK(std::abs(r.prices.buying_prices[1] - g.point[1]) <= 0.03);

  // Refine with a 0.005 grid around the coarse optimum.
  const GridAxis fine[] = {GridAxis::with_step(g.point[0] - 0.05, g.point[0] + 0.05, 0.005),
                           GridAxis::with_step(g.point[1] - 0.05, g.point[1] + 0.05, 0.005),
                           GridAxis::with_step(g.point[2] - 0.05, g.point[2] + 0.05, 0.005)};
  const auto h = grid_oracle(
      [&](std::span<const double> x) {
        return bundle_profit(cfg, both, {{x[0], x[1]}, x[2]}).profit;
      },
      fine);
  CHECK(r.profit() >= h.value - 1e-9);
  CHECK(std::abs(r.prices.buying_prices[0] - h.point[0]) <= 0.005);
  CHECK(std::abs(r.prices.buying_prices[1] - h.point[1]) <= 0.005);
  CHECK(std::abs(r.prices.bundle_fee - h.point[2]) <= 0.005);
}

TEST_CASE("optimizer is deterministic") {
  const auto cfg = default_market();
  const std::size_t both[] = {0, 1};
  const auto a = maximize_prices_bundle(cfg, both);
  const auto b = maximize_prices_bundle(cfg, both);
  CHECK(a.prices.buying_prices == b.prices.buying_prices);
  CHECK(a.prices.bundle_fee == b.prices.bundle_fee);
  CHECK(a.evaluations == b.evaluations);
}

TEST_CASE("grid oracle") {
  SUBCASE("single point") {
    const GridAxis axes[] = {GridAxis{0.25, 0.25, 1}, GridAxis{0.5, 0.9, 1}};
    long calls = 0;
    const auto g = grid_oracle(
        [&](std::span<const double> x) {
          ++calls;
          return x[0] + x[1];
        },
        axes);
    CHECK(calls == 1);
    CHECK(g.evaluations == 1);
    CHECK(g.point == std::vector<double>{0.25, 0.5});
    CHECK(g.value == 0.75);
  }
  SUBCASE("ties go to the lexicographically smallest cell") {
    const GridAxis axes[] = {GridAxis{0, 1, 5}, GridAxis{0, 1, 5}};
    const auto g = grid_oracle([](std::span<const double>) { return 1.0; }, axes);
    CHECK(g.index == std::vector<std::size_t>{0, 0});
    CHECK(g.evaluations == 25);
  }
  SUBCASE("single provider surface") {
    const auto cfg = default_market();
    const GridAxis axes[] = {GridAxis::with_step(0, 1, 0.001), GridAxis::with_step(0, 1, 0.001)};
    const auto g = grid_oracle(
        [&](std::span<const double> x) { return closed_single(x[0], x[1], 1.0, 50, 200); }, axes);
    const auto r = maximize_prices_single(cfg, 0);
    CHECK(std::abs(g.point[0] - r.single().buying_price) <= 0.002);
    CHECK(std::abs(g.point[1] - r.single().fee) <= 0.002);
    CHECK(std::abs(g.value - r.profit()) <= 0.005);
  }
}
