// Market description and pointwise utility / quality formulas for the
// sensing-data market: sensors sell data to providers at a buying price,
// providers sell a service (or a bundle of services) to users for a fee.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdp {

enum class DistributionKind { uniform };

/// Reservation wage (sensors) or reservation price (users).
struct ReservationDistribution {
  DistributionKind kind = DistributionKind::uniform;
  double lower = 0.0;
  double upper = 1.0;

  double width() const { return upper - lower; }
  double mean() const { return 0.5 * (lower + upper); }
  /// P(X < x).
  double cdf(double x) const;
  bool operator==(const ReservationDistribution&) const = default;
};

struct SensorPopulation {
  long long count = 50;
  ReservationDistribution wage_dist;
  double quality_factor = 1.0;
  bool operator==(const SensorPopulation&) const = default;
};

struct UserPopulation {
  long long count = 200;
  std::vector<ReservationDistribution> reservation_dist_per_provider;
  bool operator==(const UserPopulation&) const = default;
};

struct MarketConfig {
  std::vector<SensorPopulation> providers;
  UserPopulation users;
  double log_base = 2.0;
  /// Providers that bundle; empty means every provider.
  std::vector<std::size_t> coalition;
  double optimizer_tolerance = 1e-4;
  long long mc_replications = 10000;
  std::uint64_t mc_seed = 42;

  std::size_t provider_count() const { return providers.size(); }
  /// The configured coalition, or all providers when none is set.
  std::vector<std::size_t> coalition_or_all() const;
  bool operator==(const MarketConfig&) const = default;
};

/// Two providers, 50 sensors each, 200 users, everything uniform(0,1), q = 1.
MarketConfig default_market();

struct PriceSchedule {
  double buying_price = 0.0;
  double fee = 0.0;
};

struct BundlePriceSchedule {
  std::vector<double> buying_prices;
  double bundle_fee = 0.0;
};

struct ConfigViolation {
  std::string field;
  std::string constraint;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigViolation> violations);
  ConfigError(std::string field, std::string constraint);
  const std::vector<ConfigViolation>& violations() const { return violations_; }

 private:
  std::vector<ConfigViolation> violations_;
};

/// Every violated invariant of `cfg`; empty when the config is valid.
std::vector<ConfigViolation> find_violations(const MarketConfig& cfg);

/// Returns `cfg` unchanged, or throws ConfigError carrying the full list of
/// violations.
const MarketConfig& validate_config(const MarketConfig& cfg);

/// Throws std::invalid_argument unless both prices are finite and >= 0.
void check_prices(const PriceSchedule& prices);
void check_prices(const BundlePriceSchedule& prices, std::size_t coalition_size);

/// Throws unless the coalition is non-empty, duplicate-free and in range.
void check_coalition(const MarketConfig& cfg, std::span<const std::size_t> coalition);

// A sensor sells iff the result is > 0.
inline double sensor_utility(double buying_price, double reservation_wage) {
  return buying_price - reservation_wage;
}

/// q * log_base(1 + s / I). Throws std::invalid_argument for s < 0 or I < 1.
double quality(double quality_factor, double supply, long long sensor_count,
               double log_base = 2.0);

// A user subscribes iff the result is > 0.
inline double user_utility_single(double service_quality, double reservation_price,
                                  double fee) {
  return service_quality * reservation_price - fee;
}

/// sum_k Q_k * theta_k - bundle_fee. Throws std::invalid_argument on a length
/// mismatch or empty input.
double user_utility_bundle(std::span<const double> qualities,
                           std::span<const double> reservation_prices, double bundle_fee);

inline bool participates(double utility) { return utility > 0.0; }

}  // namespace sdp
