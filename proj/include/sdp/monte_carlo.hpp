// Sampled markets: draws every sensor's reservation wage and every user's
// reservation prices, then counts participants with the strict indicator
// rules instead of taking expectations.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "sdp/market.hpp"

namespace sdp {

struct MarketRealization {
  std::vector<std::vector<double>> wages;  // wages[k][i], sensor i of provider k
  std::vector<double> reservations;        // row-major, user j of provider k at j * K + k
  std::size_t provider_count = 0;
  std::size_t user_count = 0;
  std::uint64_t seed = 0;

  double reservation(std::size_t user, std::size_t provider) const {
    return reservations[user * provider_count + provider];
  }
};

/// Which supply level feeds the quality function inside a sampled market.
enum class QualityBasis {
  realized_supply,  // Q(s) with s the sampled number of selling sensors
  expected_supply,  // Q(I * F(p_buy)), the average number of selling sensors
};

struct ProfitEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  long long replications = 0;
  double confidence = 0.95;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct SingleTarget {
  std::size_t provider = 0;
  PriceSchedule prices;
};

struct BundleTarget {
  std::vector<std::size_t> coalition;
  BundlePriceSchedule prices;
};

using ProfitTarget = std::variant<SingleTarget, BundleTarget>;

/// Seed of replication `index` under `master`; streams for different
/// indices are unrelated, so replications can be evaluated in any order.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

MarketRealization sample_market(const MarketConfig& cfg, std::uint64_t seed);

/// Number of sensors of provider k with p_buy > phi_i.
long long realized_supply(const MarketRealization& market, std::size_t provider,
                          double buying_price);

double realized_profit_single(const MarketConfig& cfg, const MarketRealization& market,
                              std::size_t provider, const PriceSchedule& prices,
                              QualityBasis basis = QualityBasis::realized_supply);

double realized_profit_bundle(const MarketConfig& cfg, const MarketRealization& market,
                              std::span<const std::size_t> coalition,
                              const BundlePriceSchedule& prices,
                              QualityBasis basis = QualityBasis::realized_supply);

/// Realized profit of each of `replications` independent markets, in
/// replication order. `workers` threads share the work (0 = hardware
/// concurrency); the output does not depend on it.
std::vector<double> simulate_profits(const MarketConfig& cfg, const ProfitTarget& target,
                                     long long replications, std::uint64_t seed,
                                     QualityBasis basis = QualityBasis::realized_supply,
                                     unsigned workers = 0);

/// Sample mean, standard error (unbiased variance) and 95% normal interval.
ProfitEstimate summarize(std::span<const double> samples);

/// Throws std::invalid_argument when replications < 2.
ProfitEstimate estimate_profit(const MarketConfig& cfg, const ProfitTarget& target,
                               long long replications, std::uint64_t seed,
                               QualityBasis basis = QualityBasis::realized_supply,
                               unsigned workers = 0);

}  // namespace sdp
