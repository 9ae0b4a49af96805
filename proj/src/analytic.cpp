#include "sdp/analytic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sdp {

namespace {

using real = long double;

// Absolute error budget for the inclusion-exclusion sum before the
// integration fallback takes over.
constexpr real kCancellationBudget = 1e-13L;

// 6-point Gauss-Legendre on [-1, 1]; exact for polynomials up to degree 11,
// which covers the degree <= 9 pieces of a sum of at most 10 uniforms.
constexpr std::array<real, 6> kGaussNodes = {
    -0.932469514203152027812301554493994609L, -0.661209386466264513661399595019905347L,
    -0.238619186083196908630501721680711935L, 0.238619186083196908630501721680711935L,
    0.661209386466264513661399595019905347L,  0.932469514203152027812301554493994609L};
constexpr std::array<real, 6> kGaussWeights = {
    0.171324492379170345040296142172732894L, 0.360761573048138607569833513837716112L,
    0.467913934572691047389870343989550995L, 0.467913934572691047389870343989550995L,
    0.360761573048138607569833513837716112L, 0.171324492379170345040296142172732894L};

// P(sum w_k u_k <= x) for x in [0, W/2]; inclusion-exclusion over subsets.
real ie_cdf(std::span<const real> w, real x) {
  const std::size_t m = w.size();
  real norm = 1.0L;
  for (std::size_t k = 0; k < m; ++k) norm *= w[k] * static_cast<real>(k + 1);
  real acc = 0.0L;
  const std::size_t subsets = std::size_t{1} << m;
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    real shift = 0.0L;
    bool odd = false;
    for (std::size_t k = 0; k < m; ++k) {
      if (mask & (std::size_t{1} << k)) {
        shift += w[k];
        odd = !odd;
      }
    }
    const real d = x - shift;
    if (d <= 0.0L) continue;
    real term = 1.0L;
    for (std::size_t p = 0; p < m; ++p) term *= d;
    acc += odd ? -term : term;
  }
  return acc / norm;
}

real ie_tail(std::span<const real> w, real total, real x) {
  if (x <= 0.0L) return 1.0L;
  if (x >= total) return 0.0L;
  // sum and W - sum share a distribution, so evaluate whichever side of the
  // mean keeps x - w_S small.
  const real v = x > 0.5L * total ? ie_cdf(w, total - x) : 1.0L - ie_cdf(w, x);
  return std::clamp(v, 0.0L, 1.0L);
}

real ie_error_estimate(std::span<const real> w, real total) {
  const std::size_t m = w.size();
  real bound = std::numeric_limits<real>::epsilon() * static_cast<real>(std::size_t{1} << m);
  for (std::size_t k = 0; k < m; ++k) bound *= (0.5L * total) / (w[k] * static_cast<real>(k + 1));
  return bound;
}

// Tail of a sum whose first `closed_form` weights (largest first) go through
// inclusion-exclusion; each further weight is integrated piecewise:
//   F_j(x) = (1/w_j) * integral over [x - w_j, x] of F_{j-1}(t) dt.
class StableTail {
 public:
  explicit StableTail(std::vector<real> sorted_desc) : w_(std::move(sorted_desc)) {
    totals_.assign(w_.size() + 1, 0.0L);
    for (std::size_t k = 0; k < w_.size(); ++k) totals_[k + 1] = totals_[k] + w_[k];
    closed_form_ = 1;
    while (closed_form_ < w_.size() &&
           ie_error_estimate(std::span(w_).first(closed_form_ + 1), totals_[closed_form_ + 1]) <=
               kCancellationBudget)
      ++closed_form_;
    knots_.resize(w_.size() + 1);
    std::vector<real> sums{0.0L};
    for (std::size_t j = 1; j <= w_.size(); ++j) {
      const std::size_t n = sums.size();
      for (std::size_t i = 0; i < n; ++i) sums.push_back(sums[i] + w_[j - 1]);
      if (j >= closed_form_) {
        knots_[j] = sums;
        std::sort(knots_[j].begin(), knots_[j].end());
        knots_[j].erase(std::unique(knots_[j].begin(), knots_[j].end()), knots_[j].end());
      }
    }
  }

  real tail(real x) const { return tail(w_.size(), x); }

 private:
  real tail(std::size_t level, real x) const {
    if (x <= 0.0L) return 1.0L;
    if (x >= totals_[level]) return 0.0L;
    if (level == closed_form_) return ie_tail(std::span(w_).first(level), totals_[level], x);
    const real width = w_[level - 1];
    real a = x - width;
    real b = std::min(x, totals_[level - 1]);
    real integral = 0.0L;
    if (a < 0.0L) {
      integral += -a;  // the lower level is identically 1 below zero
      a = 0.0L;
    }
    if (a < b) {
      const auto& knots = knots_[level - 1];
      auto it = std::upper_bound(knots.begin(), knots.end(), a);
      real left = a;
      while (left < b) {
        const real right = (it != knots.end() && *it < b) ? *it++ : b;
        const real half = 0.5L * (right - left);
        const real mid = 0.5L * (right + left);
        for (std::size_t g = 0; g < kGaussNodes.size(); ++g)
          integral += half * kGaussWeights[g] * tail(level - 1, mid + half * kGaussNodes[g]);
        left = right;
      }
    }
    return std::clamp(integral / width, 0.0L, 1.0L);
  }

  std::vector<real> w_;
  std::vector<real> totals_;
  std::vector<std::vector<real>> knots_;
  std::size_t closed_form_ = 1;
};

}  // namespace

double GridAxis::value(std::size_t i) const {
  if (points <= 1) return lo;
  if (i + 1 == points) return hi;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
}

GridAxis GridAxis::with_step(double lo, double hi, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be > 0");
  const double intervals = std::max(1.0, std::round((hi - lo) / step));
  return GridAxis{lo, hi, static_cast<std::size_t>(intervals) + 1};
}

void check_axis(const GridAxis& axis) {
  if (!std::isfinite(axis.lo) || !std::isfinite(axis.hi))
    throw std::invalid_argument("grid bounds must be finite");
  if (axis.lo > axis.hi) throw std::invalid_argument("grid lower bound exceeds upper bound");
  if (axis.points == 0) throw std::invalid_argument("grid needs at least one point");
}

double expected_supply(const ReservationDistribution& wage_dist, double buying_price,
                       long long sensor_count) {
  return static_cast<double>(sensor_count) * wage_dist.cdf(buying_price);
}

double weighted_uniform_sum_tail(std::span<const double> weights, double threshold) {
  std::vector<real> w;
  w.reserve(weights.size());
  for (double x : weights) {
    if (!std::isfinite(x) || !(x > 0.0))
      throw std::invalid_argument("weights must be finite and > 0, got " + std::to_string(x));
    w.push_back(x);
  }
  if (std::isnan(threshold)) throw std::invalid_argument("threshold is NaN");
  if (threshold <= 0.0) return w.empty() && threshold == 0.0 ? 0.0 : 1.0;
  if (w.empty()) return 0.0;
  std::sort(w.begin(), w.end(), std::greater<>());
  return static_cast<double>(StableTail(std::move(w)).tail(threshold));
}

double single_demand(double service_quality, double fee,
                     const ReservationDistribution& reservation_dist, long long user_count) {
  const ReservationDistribution dists[] = {reservation_dist};
  const double qualities[] = {service_quality};
  return bundle_demand(qualities, dists, fee, user_count);
}

double bundle_demand(std::span<const double> qualities,
                     std::span<const ReservationDistribution> reservation_dists,
                     double bundle_fee, long long user_count) {
  if (qualities.size() != reservation_dists.size())
    throw std::invalid_argument("one reservation distribution per quality required");
  std::vector<double> weights;
  double shift = 0.0;
  for (std::size_t k = 0; k < qualities.size(); ++k) {
    if (qualities[k] < 0.0) throw std::invalid_argument("quality must be >= 0");
    if (qualities[k] == 0.0) continue;
    weights.push_back(qualities[k] * reservation_dists[k].width());
    shift += qualities[k] * reservation_dists[k].lower;
  }
  // With no weights the total reservation price is the constant `shift`.
  const double threshold = bundle_fee - shift;
  const double share =
      weights.empty() ? (threshold < 0.0 ? 1.0 : 0.0) : weighted_uniform_sum_tail(weights, threshold);
  return static_cast<double>(user_count) * share;
}

double bundle_demand(std::span<const double> qualities, double bundle_fee,
                     long long user_count) {
  const std::vector<ReservationDistribution> dists(qualities.size(), ReservationDistribution{});
  return bundle_demand(qualities, dists, bundle_fee, user_count);
}

MarketOutcome single_profit(const MarketConfig& cfg, std::size_t provider,
                            const PriceSchedule& prices) {
  const std::size_t coalition[] = {provider};
  return bundle_profit(cfg, coalition, BundlePriceSchedule{{prices.buying_price}, prices.fee});
}

MarketOutcome bundle_profit(const MarketConfig& cfg, std::span<const std::size_t> coalition,
                            const BundlePriceSchedule& prices) {
  check_coalition(cfg, coalition);
  check_prices(prices, coalition.size());
  MarketOutcome out;
  std::vector<ReservationDistribution> dists;
  for (std::size_t i = 0; i < coalition.size(); ++i) {
    const auto& provider = cfg.providers[coalition[i]];
    const double p = prices.buying_prices[i];
    const double supply = expected_supply(provider.wage_dist, p, provider.count);
    out.expected_supply.push_back(supply);
    out.quality.push_back(quality(provider.quality_factor, supply, provider.count, cfg.log_base));
    out.cost += p * supply;
    dists.push_back(cfg.users.reservation_dist_per_provider[coalition[i]]);
  }
  out.expected_demand = bundle_demand(out.quality, dists, prices.bundle_fee, cfg.users.count);
  out.revenue = prices.bundle_fee * out.expected_demand;
  out.profit = out.revenue - out.cost;
  return out;
}

ProfitSurface profit_surface(const MarketConfig& cfg, std::span<const std::size_t> coalition,
                             const GridAxis& buy_axis, const GridAxis& fee_axis) {
  check_coalition(cfg, coalition);
  for (const GridAxis* axis : {&buy_axis, &fee_axis}) {
    check_axis(*axis);
    if (axis->points < 2) throw std::invalid_argument("surface axes need at least 2 points");
    if (axis->lo < 0.0) throw std::invalid_argument("surface axes must start at >= 0");
    if (!(axis->lo < axis->hi)) throw std::invalid_argument("surface axis range is empty");
  }
  ProfitSurface surface{buy_axis, fee_axis, {}};
  surface.values.reserve(buy_axis.points * fee_axis.points);
  BundlePriceSchedule prices{std::vector<double>(coalition.size()), 0.0};
  for (std::size_t i = 0; i < buy_axis.points; ++i) {
    std::fill(prices.buying_prices.begin(), prices.buying_prices.end(), buy_axis.value(i));
    for (std::size_t j = 0; j < fee_axis.points; ++j) {
      prices.bundle_fee = fee_axis.value(j);
      surface.values.push_back(bundle_profit(cfg, coalition, prices).profit);
    }
  }
  return surface;
}

double max_fee(const MarketConfig& cfg, std::span<const std::size_t> coalition) {
  double total = 0.0;
  for (std::size_t k : coalition) {
    const auto& provider = cfg.providers.at(k);
    const double best_quality =
        quality(provider.quality_factor, static_cast<double>(provider.count), provider.count,
                cfg.log_base);
    total += best_quality * std::max(0.0, cfg.users.reservation_dist_per_provider.at(k).upper);
  }
  return total;
}

}  // namespace sdp
