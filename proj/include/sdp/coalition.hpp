// Cooperative side of the market: the value of every provider subset, and
// how the grand coalition's bundled profit is split among its members.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdp/market.hpp"
#include "sdp/optimizer.hpp"

namespace sdp {

constexpr std::size_t kMaxPlayers = 10;

/// v(S) for subsets S of `players`, keyed by bitmask over positions in
/// `players` (bit i set means players[i] is in S). v(empty) = 0.
class CoalitionValue {
 public:
  explicit CoalitionValue(std::vector<std::size_t> players);

  std::size_t size() const { return players_.size(); }
  const std::vector<std::size_t>& players() const { return players_; }
  std::uint32_t grand_mask() const { return (std::uint32_t{1} << players_.size()) - 1; }

  void set(std::uint32_t mask, double value);
  /// Throws std::invalid_argument if the value was never set.
  double operator()(std::uint32_t mask) const;
  double standalone(std::size_t position) const { return (*this)(std::uint32_t{1} << position); }
  double grand() const { return (*this)(grand_mask()); }
  bool complete() const;

 private:
  std::vector<std::size_t> players_;
  std::vector<std::optional<double>> values_;
};

enum class SharingMethod { shapley, nash_bargaining };

struct Allocation {
  std::vector<std::size_t> players;
  std::vector<double> shares;
  SharingMethod method = SharingMethod::shapley;
  // Filled by cooperation_gains.
  std::vector<double> gains;
  /// Largest integration cost each member accepts before leaving; equals its gain.
  std::vector<double> max_integration_cost;
  bool individually_rational = false;
};

class InfeasibleBargaining : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Singletons take their standalone optimum, larger subsets the jointly
/// optimized bundle. At most kMaxPlayers providers.
CoalitionValue characteristic_function(const MarketConfig& cfg,
                                       std::span<const std::size_t> players,
                                       const OptimizerSettings& settings = {});

/// Exact Shapley value by enumerating every subset.
Allocation shapley(const CoalitionValue& v);

/// Equal split of the surplus over the disagreement point. Throws
/// InfeasibleBargaining when v_grand < sum of the disagreement payoffs.
Allocation nash_bargaining(double v_grand, std::span<const double> disagreement);

/// gains_k = share_k - v({k}); individually rational iff every gain >= 0.
Allocation cooperation_gains(Allocation alloc, const CoalitionValue& v);

struct SweepRow {
  double quality_factor = 0.0;
  std::vector<double> standalone;  // v({k}) per player
  double grand = 0.0;
  std::vector<double> shares;
  std::vector<double> gains;
  std::vector<double> grand_buying_prices;
  double grand_fee = 0.0;
};

/// Re-solves the market for each quality factor applied to `provider`,
/// splitting the coalition's profit with the Shapley value.
std::vector<SweepRow> sweep_quality_factor(const MarketConfig& cfg, std::size_t provider,
                                           std::span<const double> quality_factors,
                                           const OptimizerSettings& settings = {});

}  // namespace sdp
