#include "sdp/market.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sdp {

namespace {

std::string join_violations(const std::vector<ConfigViolation>& violations) {
  std::ostringstream out;
  out << "invalid market configuration";
  for (const auto& v : violations) out << "\n  " << v.field << ": " << v.constraint;
  return out.str();
}

void check_distribution(const ReservationDistribution& d, const std::string& field,
                        std::vector<ConfigViolation>& out) {
  if (!std::isfinite(d.lower) || !std::isfinite(d.upper)) {
    out.push_back({field, "bounds must be finite"});
  } else if (!(d.lower < d.upper)) {
    out.push_back({field, "lower must be < upper"});
  }
}

}  // namespace

double ReservationDistribution::cdf(double x) const {
  if (x <= lower) return 0.0;
  if (x >= upper) return 1.0;
  return (x - lower) / (upper - lower);
}

std::vector<std::size_t> MarketConfig::coalition_or_all() const {
  if (!coalition.empty()) return coalition;
  std::vector<std::size_t> all(providers.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

MarketConfig default_market() {
  MarketConfig cfg;
  cfg.providers.assign(2, SensorPopulation{});
  cfg.users.count = 200;
  cfg.users.reservation_dist_per_provider.assign(2, ReservationDistribution{});
  return cfg;
}

ConfigError::ConfigError(std::vector<ConfigViolation> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

ConfigError::ConfigError(std::string field, std::string constraint)
    : ConfigError(std::vector<ConfigViolation>{{std::move(field), std::move(constraint)}}) {}

std::vector<ConfigViolation> find_violations(const MarketConfig& cfg) {
  std::vector<ConfigViolation> out;
  if (cfg.providers.empty()) out.push_back({"providers", "at least one provider required"});
  for (std::size_t k = 0; k < cfg.providers.size(); ++k) {
    const auto& p = cfg.providers[k];
    const std::string base = "providers[" + std::to_string(k) + "]";
    if (p.count < 1) out.push_back({base + ".sensors.count", "must be >= 1"});
    check_distribution(p.wage_dist, base + ".sensors.wage_dist", out);
    if (!std::isfinite(p.quality_factor) || p.quality_factor < 0.0)
      out.push_back({base + ".quality_factor", "must be finite and >= 0"});
  }
  if (cfg.users.count < 1) out.push_back({"users.count", "must be >= 1"});
  const auto& dists = cfg.users.reservation_dist_per_provider;
  if (dists.size() != cfg.providers.size())
    out.push_back({"users.reservation_dist",
                   "length " + std::to_string(dists.size()) + " must equal provider count " +
                       std::to_string(cfg.providers.size())});
  for (std::size_t k = 0; k < dists.size(); ++k)
    check_distribution(dists[k], "users.reservation_dist[" + std::to_string(k) + "]", out);
  if (!std::isfinite(cfg.log_base) || cfg.log_base <= 0.0 || cfg.log_base == 1.0)
    out.push_back({"log_base", "must be finite, > 0 and != 1"});
  if (!(cfg.optimizer_tolerance > 0.0) || !std::isfinite(cfg.optimizer_tolerance))
    out.push_back({"optimizer_tolerance", "must be > 0"});
  if (cfg.mc_replications < 1) out.push_back({"mc_replications", "must be >= 1"});
  std::vector<bool> seen(cfg.providers.size(), false);
  for (std::size_t idx : cfg.coalition) {
    if (idx >= cfg.providers.size()) {
      out.push_back({"coalition", "index " + std::to_string(idx) + " out of range"});
    } else if (seen[idx]) {
      out.push_back({"coalition", "duplicate index " + std::to_string(idx)});
    } else {
      seen[idx] = true;
    }
  }
  return out;
}

const MarketConfig& validate_config(const MarketConfig& cfg) {
  auto violations = find_violations(cfg);
  if (!violations.empty()) throw ConfigError(std::move(violations));
  return cfg;
}

void check_prices(const PriceSchedule& prices) {
  if (!std::isfinite(prices.buying_price) || prices.buying_price < 0.0)
    throw std::invalid_argument("buying price must be finite and >= 0");
  if (!std::isfinite(prices.fee) || prices.fee < 0.0)
    throw std::invalid_argument("subscription fee must be finite and >= 0");
}

void check_prices(const BundlePriceSchedule& prices, std::size_t coalition_size) {
  if (prices.buying_prices.size() != coalition_size)
    throw std::invalid_argument("expected " + std::to_string(coalition_size) +
                                " buying prices, got " +
                                std::to_string(prices.buying_prices.size()));
  for (double p : prices.buying_prices)
    check_prices(PriceSchedule{p, prices.bundle_fee});
  if (prices.buying_prices.empty()) check_prices(PriceSchedule{0.0, prices.bundle_fee});
}

void check_coalition(const MarketConfig& cfg, std::span<const std::size_t> coalition) {
  if (coalition.empty()) throw std::invalid_argument("coalition must be non-empty");
  std::vector<bool> seen(cfg.providers.size(), false);
  for (std::size_t k : coalition) {
    if (k >= cfg.providers.size())
      throw std::out_of_range("provider index " + std::to_string(k) + " out of range");
    if (seen[k]) throw std::invalid_argument("duplicate provider " + std::to_string(k));
    seen[k] = true;
  }
}

double quality(double quality_factor, double supply, long long sensor_count, double log_base) {
  if (!(supply >= 0.0)) throw std::invalid_argument("supply must be >= 0");
  if (sensor_count < 1) throw std::invalid_argument("sensor count must be >= 1");
  if (supply == 0.0) return 0.0;
  const double ratio = supply / static_cast<double>(sensor_count);
  if (log_base == 2.0) return quality_factor * std::log2(1.0 + ratio);
  return quality_factor * std::log1p(ratio) / std::log(log_base);
}

double user_utility_bundle(std::span<const double> qualities,
                           std::span<const double> reservation_prices, double bundle_fee) {
  if (qualities.size() != reservation_prices.size())
    throw std::invalid_argument("quality and reservation price lists differ in length");
  if (qualities.empty()) throw std::invalid_argument("bundle must contain a service");
  double total = 0.0;
  for (std::size_t k = 0; k < qualities.size(); ++k) total += qualities[k] * reservation_prices[k];
  return total - bundle_fee;
}

}  // namespace sdp
