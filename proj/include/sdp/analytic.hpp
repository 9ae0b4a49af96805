// Expected-value evaluation of the market. Indicator sums over sensors and
// users are replaced by their expectations, so supply, demand and profit are
// smooth functions of the prices.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sdp/market.hpp"

namespace sdp {

struct MarketOutcome {
  std::vector<double> expected_supply;  // one entry per coalition member
  std::vector<double> quality;
  double expected_demand = 0.0;
  double revenue = 0.0;
  double cost = 0.0;
  double profit = 0.0;
};

/// Evenly spaced points lo, ..., hi. A single point sits at lo.
struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t points = 101;

  double value(std::size_t i) const;
  /// Axis covering [lo, hi] with spacing as close to `step` as the range allows.
  static GridAxis with_step(double lo, double hi, double step);
};

/// Throws std::invalid_argument for non-finite bounds, lo > hi or zero points.
void check_axis(const GridAxis& axis);

/// Profit over a (buying price, fee) grid. Coalitions share one buying price.
struct ProfitSurface {
  GridAxis buy_axis;
  GridAxis fee_axis;
  std::vector<double> values;  // row-major: buy index major, fee index minor

  double at(std::size_t buy_index, std::size_t fee_index) const {
    return values[buy_index * fee_axis.points + fee_index];
  }
};

/// I * P(phi < p_buy).
double expected_supply(const ReservationDistribution& wage_dist, double buying_price,
                       long long sensor_count);

/// P(sum_k w_k * u_k > threshold) for independent u_k ~ uniform(0,1).
///
/// Evaluated with the closed-form inclusion-exclusion sum over subsets,
///   P(sum <= b) = sum_S (-1)^|S| (b - w_S)_+^K / (K! prod w),
/// reflected about the mean so the smaller tail is always the one computed.
/// When a weight is tiny relative to the rest that sum cancels badly; those
/// weights are then folded in by exact piecewise Gauss-Legendre integration
/// over the remaining distribution's knot intervals.
///
/// Throws std::invalid_argument on a non-positive or non-finite weight. An
/// empty weight list describes the constant 0.
double weighted_uniform_sum_tail(std::span<const double> weights, double threshold);

/// J * P(Q * theta > fee).
double single_demand(double service_quality, double fee,
                     const ReservationDistribution& reservation_dist, long long user_count);

/// J * P(sum_k Q_k * theta_k > fee), providers with zero quality dropped.
double bundle_demand(std::span<const double> qualities,
                     std::span<const ReservationDistribution> reservation_dists,
                     double bundle_fee, long long user_count);

/// Same with every theta_k ~ uniform(0,1).
double bundle_demand(std::span<const double> qualities, double bundle_fee,
                     long long user_count);

MarketOutcome single_profit(const MarketConfig& cfg, std::size_t provider,
                            const PriceSchedule& prices);

MarketOutcome bundle_profit(const MarketConfig& cfg, std::span<const std::size_t> coalition,
                            const BundlePriceSchedule& prices);

/// Profit of `coalition` (a single provider when it has one member) over the
/// grid; members of a larger coalition all use the row's buying price.
ProfitSurface profit_surface(const MarketConfig& cfg, std::span<const std::size_t> coalition,
                             const GridAxis& buy_axis, const GridAxis& fee_axis);

/// Upper end of the meaningful fee range: the largest total reservation price
/// any user can hold when every member buys from all of its sensors.
double max_fee(const MarketConfig& cfg, std::span<const std::size_t> coalition);

}  // namespace sdp
