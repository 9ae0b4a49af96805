#include "sdp/coalition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace sdp {

CoalitionValue::CoalitionValue(std::vector<std::size_t> players) : players_(std::move(players)) {
  if (players_.empty()) throw std::invalid_argument("a game needs at least one player");
  if (players_.size() > kMaxPlayers)
    throw std::invalid_argument("at most " + std::to_string(kMaxPlayers) + " players supported");
  values_.assign(std::size_t{1} << players_.size(), std::nullopt);
  values_[0] = 0.0;
}

void CoalitionValue::set(std::uint32_t mask, double value) {
  if (mask == 0 || mask > grand_mask()) throw std::out_of_range("coalition mask out of range");
  values_[mask] = value;
}

double CoalitionValue::operator()(std::uint32_t mask) const {
  if (mask > grand_mask()) throw std::out_of_range("coalition mask out of range");
  if (!values_[mask])
    throw std::invalid_argument("characteristic function undefined for mask " +
                                std::to_string(mask));
  return *values_[mask];
}

bool CoalitionValue::complete() const {
  return std::all_of(values_.begin(), values_.end(), [](const auto& v) { return v.has_value(); });
}

CoalitionValue characteristic_function(const MarketConfig& cfg,
                                       std::span<const std::size_t> players,
                                       const OptimizerSettings& settings) {
  validate_config(cfg);
  check_coalition(cfg, players);
  CoalitionValue v(std::vector<std::size_t>(players.begin(), players.end()));
  for (std::uint32_t mask = 1; mask <= v.grand_mask(); ++mask) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < players.size(); ++i)
      if (mask & (std::uint32_t{1} << i)) members.push_back(players[i]);
    const auto best = members.size() == 1 ? maximize_prices_single(cfg, members[0], settings)
                                          : maximize_prices_bundle(cfg, members, settings);
    if (!best.converged)
      throw OptimizationError("optimizer did not converge for a coalition of size " +
                              std::to_string(members.size()));
    v.set(mask, best.profit());
  }
  return v;
}

Allocation shapley(const CoalitionValue& v) {
  if (!v.complete()) throw std::invalid_argument("characteristic function is incomplete");
  const std::size_t n = v.size();
  // weight[s] = s! (n - s - 1)! / n!
  std::vector<double> factorial(n + 1, 1.0);
  for (std::size_t i = 1; i <= n; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) weight[s] = factorial[s] * factorial[n - s - 1] / factorial[n];

  Allocation out;
  out.players = v.players();
  out.method = SharingMethod::shapley;
  out.shares.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint32_t bit = std::uint32_t{1} << k;
    double share = 0.0;
    for (std::uint32_t s = 0; s <= v.grand_mask(); ++s) {
      if (s & bit) continue;
      share += weight[std::popcount(s)] * (v(s | bit) - v(s));
    }
    out.shares[k] = share;
  }
  return out;
}

Allocation nash_bargaining(double v_grand, std::span<const double> disagreement) {
  if (disagreement.empty()) throw std::invalid_argument("no bargaining players");
  double total = 0.0;
  for (double d : disagreement) total += d;
  if (v_grand < total)
    throw InfeasibleBargaining("grand coalition value " + std::to_string(v_grand) +
                               " is below the disagreement total " + std::to_string(total) +
                               "; cooperation is not beneficial");
  const double surplus_share = (v_grand - total) / static_cast<double>(disagreement.size());
  Allocation out;
  out.method = SharingMethod::nash_bargaining;
  for (std::size_t k = 0; k < disagreement.size(); ++k) {
    out.players.push_back(k);
    out.shares.push_back(disagreement[k] + surplus_share);
  }
  return out;
}

Allocation cooperation_gains(Allocation alloc, const CoalitionValue& v) {
  if (alloc.shares.size() != v.size())
    throw std::invalid_argument("allocation and game differ in player count");
  alloc.gains.resize(v.size());
  alloc.individually_rational = true;
  for (std::size_t k = 0; k < v.size(); ++k) {
    alloc.gains[k] = alloc.shares[k] - v.standalone(k);
    if (alloc.gains[k] < 0.0) alloc.individually_rational = false;
  }
  alloc.max_integration_cost = alloc.gains;
  return alloc;
}

std::vector<SweepRow> sweep_quality_factor(const MarketConfig& cfg, std::size_t provider,
                                           std::span<const double> quality_factors,
                                           const OptimizerSettings& settings) {
  validate_config(cfg);
  if (provider >= cfg.provider_count())
    throw std::out_of_range("provider index " + std::to_string(provider) + " out of range");
  const auto players = cfg.coalition_or_all();
  std::vector<SweepRow> rows;
  for (double q : quality_factors) {
    if (!std::isfinite(q) || q < 0.0)
      throw std::invalid_argument("quality factors must be finite and >= 0");
    MarketConfig varied = cfg;
    varied.providers[provider].quality_factor = q;
    const auto v = characteristic_function(varied, players, settings);
    const auto alloc = cooperation_gains(shapley(v), v);
    SweepRow row;
    row.quality_factor = q;
    for (std::size_t i = 0; i < v.size(); ++i) row.standalone.push_back(v.standalone(i));
    row.grand = v.grand();
    row.shares = alloc.shares;
    row.gains = alloc.gains;
    const auto grand = players.size() == 1 ? maximize_prices_single(varied, players[0], settings)
                                           : maximize_prices_bundle(varied, players, settings);
    row.grand_buying_prices = grand.prices.buying_prices;
    row.grand_fee = grand.prices.bundle_fee;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace sdp
