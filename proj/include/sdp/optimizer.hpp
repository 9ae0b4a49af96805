// Derivative-free price optimization. Every search is comparison-based
// interval shrinking on unimodal slices; the exhaustive grid oracle is kept
// alongside for verification.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sdp/analytic.hpp"
#include "sdp/market.hpp"

namespace sdp {

class OptimizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScalarOptimum {
  double x = 0.0;
  double value = 0.0;
  long evaluations = 0;
  bool converged = false;
};

/// Golden-section search for the maximum of a unimodal `f` on [lo, hi].
/// Ties move the bracket left, so flat functions resolve to `lo`.
/// Throws std::invalid_argument unless lo < hi and tol > 0.
ScalarOptimum maximize_unimodal_1d(const std::function<double(double)>& f, double lo, double hi,
                                   double tol);

struct OptimizationResult {
  std::vector<std::size_t> coalition;
  BundlePriceSchedule prices;  // one buying price per coalition member
  MarketOutcome outcome;       // evaluated at `prices`
  long evaluations = 0;
  bool converged = false;
  int sweeps = 0;

  double profit() const { return outcome.profit; }
  PriceSchedule single() const { return {prices.buying_prices.at(0), prices.bundle_fee}; }
};

struct OptimizerSettings {
  double tolerance = 1e-4;
  int max_sweeps = 200;
};

/// Best (buying price, fee) for one provider selling alone. The fee is
/// optimized for every trial buying price (nested search).
OptimizationResult maximize_prices_single(const MarketConfig& cfg, std::size_t provider,
                                          const OptimizerSettings& settings = {});

/// Best buying prices and bundle fee for a coalition. Buying prices are
/// improved one coordinate at a time (each with the optimal fee profiled out)
/// until a full sweep moves no price by more than the tolerance.
OptimizationResult maximize_prices_bundle(const MarketConfig& cfg,
                                          std::span<const std::size_t> coalition,
                                          const OptimizerSettings& settings = {});

struct GridOptimum {
  std::vector<double> point;
  std::vector<std::size_t> index;
  double value = 0.0;
  std::size_t evaluations = 0;
};

/// Exhaustive maximization over the Cartesian product of `axes`. Cells are
/// visited in lexicographic order and only strict improvements replace the
/// incumbent, so ties go to the lexicographically smallest cell.
GridOptimum grid_oracle(const std::function<double(std::span<const double>)>& objective,
                        std::span<const GridAxis> axes);

}  // namespace sdp
