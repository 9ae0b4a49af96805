#include "sdp/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sdp {

namespace {

constexpr double kInvPhi = 0.6180339887498948482;  // (sqrt(5) - 1) / 2

double finite_or_throw(double v, double x) {
  if (!std::isfinite(v))
    throw OptimizationError("objective is not finite at x = " + std::to_string(x));
  return v;
}

// Optimal fee for fixed buying prices; the fee search covers
// [0, largest reservation price a user can hold at those prices].
class FeeProfile {
 public:
  FeeProfile(const MarketConfig& cfg, std::span<const std::size_t> coalition, double tol)
      : cfg_(cfg), coalition_(coalition.begin(), coalition.end()), tol_(tol) {}

  struct Best {
    double fee = 0.0;
    double profit = 0.0;
  };

  Best operator()(const std::vector<double>& buying_prices) {
    BundlePriceSchedule prices{buying_prices, 0.0};
    const MarketOutcome at_zero = evaluate(prices);
    ++evaluations_;
    double fee_hi = 0.0;
    for (std::size_t i = 0; i < coalition_.size(); ++i)
      fee_hi += at_zero.quality[i] *
                std::max(0.0, cfg_.users.reservation_dist_per_provider[coalition_[i]].upper);
    if (!(fee_hi > 0.0)) return {0.0, at_zero.profit};
    const auto fee = maximize_unimodal_1d(
        [&](double f) {
          prices.bundle_fee = f;
          return evaluate(prices).profit;
        },
        0.0, fee_hi, tol_);
    evaluations_ += fee.evaluations;
    return {fee.x, fee.value};
  }

  long evaluations() const { return evaluations_; }

 private:
  MarketOutcome evaluate(const BundlePriceSchedule& prices) {
    return bundle_profit(cfg_, coalition_, prices);
  }

  const MarketConfig& cfg_;
  std::vector<std::size_t> coalition_;
  double tol_;
  long evaluations_ = 0;
};

double buying_price_ceiling(const MarketConfig& cfg, std::size_t provider) {
  return std::max(0.0, cfg.providers[provider].wage_dist.upper);
}

// Golden-section search over one buying price with the fee profiled out.
ScalarOptimum search_buying_price(FeeProfile& profile, std::vector<double>& prices,
                                  std::size_t coordinate, double hi, double tol) {
  const double saved = prices[coordinate];
  auto objective = [&](double p) {
    prices[coordinate] = p;
    return profile(prices).profit;
  };
  ScalarOptimum best;
  if (hi > 0.0) {
    best = maximize_unimodal_1d(objective, 0.0, hi, tol);
  } else {
    best = {0.0, objective(0.0), 1, true};
  }
  prices[coordinate] = saved;
  return best;
}

OptimizationResult finish(const MarketConfig& cfg, std::span<const std::size_t> coalition,
                          std::vector<double> buying_prices, double fee, long evaluations,
                          bool converged, int sweeps) {
  OptimizationResult result;
  result.coalition.assign(coalition.begin(), coalition.end());
  result.prices = BundlePriceSchedule{std::move(buying_prices), fee};
  result.outcome = bundle_profit(cfg, coalition, result.prices);
  result.evaluations = evaluations + 1;
  result.converged = converged;
  result.sweeps = sweeps;
  return result;
}

}  // namespace

ScalarOptimum maximize_unimodal_1d(const std::function<double(double)>& f, double lo, double hi,
                                   double tol) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw std::invalid_argument("invalid bracket [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be > 0");

  ScalarOptimum out;
  auto eval = [&](double x) {
    ++out.evaluations;
    return finite_or_throw(f(x), x);
  };
  double a = lo;
  double b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      if (!(c > a && c < d)) break;  // bracket no longer representable
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      if (!(d > c && d < b)) break;
      fd = eval(d);
    }
  }
  out.converged = b - a <= tol;
  out.x = 0.5 * (a + b);
  out.value = eval(out.x);
  // The left end of the final bracket wins ties.
  const double fa = eval(a);
  if (fa >= out.value) {
    out.x = a;
    out.value = fa;
  }
  return out;
}

OptimizationResult maximize_prices_single(const MarketConfig& cfg, std::size_t provider,
                                          const OptimizerSettings& settings) {
  validate_config(cfg);
  if (provider >= cfg.provider_count())
    throw std::out_of_range("provider index " + std::to_string(provider) + " out of range");
  if (!(settings.tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  const std::size_t coalition[] = {provider};
  FeeProfile profile(cfg, coalition, settings.tolerance * 1e-3);
  std::vector<double> prices{0.0};
  const auto buy = search_buying_price(profile, prices, 0, buying_price_ceiling(cfg, provider),
                                       settings.tolerance);
  prices[0] = buy.x;
  const auto fee = profile(prices);
  return finish(cfg, coalition, prices, fee.fee, profile.evaluations(), buy.converged, 1);
}

OptimizationResult maximize_prices_bundle(const MarketConfig& cfg,
                                          std::span<const std::size_t> coalition,
                                          const OptimizerSettings& settings) {
  validate_config(cfg);
  check_coalition(cfg, coalition);
  if (coalition.size() == 1) return maximize_prices_single(cfg, coalition[0], settings);
  if (!(settings.tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");

  const double line_tol = settings.tolerance * 0.1;
  FeeProfile profile(cfg, coalition, settings.tolerance * 1e-3);
  std::vector<double> prices(coalition.size());
  std::vector<double> ceilings(coalition.size());
  for (std::size_t i = 0; i < coalition.size(); ++i) {
    ceilings[i] = buying_price_ceiling(cfg, coalition[i]);
    prices[i] = 0.5 * ceilings[i];
  }
  double current = profile(prices).profit;
  bool converged = false;
  int sweeps = 0;
  while (sweeps < settings.max_sweeps && !converged) {
    ++sweeps;
    const double start = current;
    double largest_move = 0.0;
    bool lines_converged = true;
    for (std::size_t i = 0; i < coalition.size(); ++i) {
      const auto line = search_buying_price(profile, prices, i, ceilings[i], line_tol);
      lines_converged = lines_converged && line.converged;
      // Only accept moves that do not lower the objective.
      if (line.value >= current) {
        largest_move = std::max(largest_move, std::abs(line.x - prices[i]));
        prices[i] = line.x;
        current = line.value;
      }
    }
    converged = lines_converged && largest_move <= settings.tolerance &&
                current - start < settings.tolerance;
  }
  const auto fee = profile(prices);
  return finish(cfg, coalition, prices, fee.fee, profile.evaluations(), converged, sweeps);
}

GridOptimum grid_oracle(const std::function<double(std::span<const double>)>& objective,
                        std::span<const GridAxis> axes) {
  if (axes.empty()) throw std::invalid_argument("grid oracle needs at least one axis");
  for (const auto& axis : axes) check_axis(axis);
  GridOptimum best;
  std::vector<std::size_t> index(axes.size(), 0);
  std::vector<double> point(axes.size());
  bool first = true;
  while (true) {
    for (std::size_t d = 0; d < axes.size(); ++d) point[d] = axes[d].value(index[d]);
    const double v = objective(point);
    ++best.evaluations;
    if (first || v > best.value) {
      best.value = v;
      best.point = point;
      best.index = index;
      first = false;
    }
    // odometer: last axis varies fastest, giving lexicographic order
    std::size_t d = axes.size();
    while (d > 0) {
      --d;
      if (++index[d] < axes[d].points) break;
      index[d] = 0;
      if (d == 0) return best;
    }
  }
}

}  // namespace sdp
