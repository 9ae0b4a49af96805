#include "sdp/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include "sdp/analytic.hpp"

namespace sdp {

namespace {

constexpr double kNormalQuantile975 = 1.959963984540054;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// 53 random bits mapped to [0, 1); fixed here rather than left to
// std::uniform_real_distribution so samples match across standard libraries.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double draw(const ReservationDistribution& d, std::mt19937_64& rng) {
  return d.lower + d.width() * unit_uniform(rng);
}

double supply_quality(const MarketConfig& cfg, const MarketRealization& market,
                      std::size_t provider, double buying_price, QualityBasis basis,
                      long long& sold) {
  const auto& pop = cfg.providers[provider];
  sold = realized_supply(market, provider, buying_price);
  const double s = basis == QualityBasis::realized_supply
                       ? static_cast<double>(sold)
                       : expected_supply(pop.wage_dist, buying_price, pop.count);
  return quality(pop.quality_factor, s, pop.count, cfg.log_base);
}

void check_realization(const MarketConfig& cfg, const MarketRealization& market) {
  if (market.provider_count != cfg.provider_count() ||
      market.wages.size() != cfg.provider_count() ||
      market.user_count != static_cast<std::size_t>(cfg.users.count) ||
      market.reservations.size() != market.user_count * market.provider_count)
    throw std::invalid_argument("realization does not match the market configuration");
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

MarketRealization sample_market(const MarketConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  std::mt19937_64 rng(seed);
  MarketRealization m;
  m.seed = seed;
  m.provider_count = cfg.provider_count();
  m.user_count = static_cast<std::size_t>(cfg.users.count);
  m.wages.resize(m.provider_count);
  for (std::size_t k = 0; k < m.provider_count; ++k) {
    const auto& pop = cfg.providers[k];
    m.wages[k].resize(static_cast<std::size_t>(pop.count));
    for (double& w : m.wages[k]) w = draw(pop.wage_dist, rng);
  }
  m.reservations.resize(m.user_count * m.provider_count);
  for (std::size_t j = 0; j < m.user_count; ++j)
    for (std::size_t k = 0; k < m.provider_count; ++k)
      m.reservations[j * m.provider_count + k] =
          draw(cfg.users.reservation_dist_per_provider[k], rng);
  return m;
}

long long realized_supply(const MarketRealization& market, std::size_t provider,
                          double buying_price) {
  const auto& wages = market.wages.at(provider);
  return std::count_if(wages.begin(), wages.end(), [&](double phi) {
    return participates(sensor_utility(buying_price, phi));
  });
}

double realized_profit_single(const MarketConfig& cfg, const MarketRealization& market,
                              std::size_t provider, const PriceSchedule& prices,
                              QualityBasis basis) {
  const std::size_t coalition[] = {provider};
  return realized_profit_bundle(cfg, market, coalition,
                                BundlePriceSchedule{{prices.buying_price}, prices.fee}, basis);
}

double realized_profit_bundle(const MarketConfig& cfg, const MarketRealization& market,
                              std::span<const std::size_t> coalition,
                              const BundlePriceSchedule& prices, QualityBasis basis) {
  check_coalition(cfg, coalition);
  check_prices(prices, coalition.size());
  check_realization(cfg, market);
  std::vector<double> qualities(coalition.size());
  double cost = 0.0;
  for (std::size_t i = 0; i < coalition.size(); ++i) {
    long long sold = 0;
    qualities[i] = supply_quality(cfg, market, coalition[i], prices.buying_prices[i], basis, sold);
    cost += prices.buying_prices[i] * static_cast<double>(sold);
  }
  std::vector<double> thetas(coalition.size());
  long long subscribers = 0;
  for (std::size_t j = 0; j < market.user_count; ++j) {
    for (std::size_t i = 0; i < coalition.size(); ++i)
      thetas[i] = market.reservation(j, coalition[i]);
    if (participates(user_utility_bundle(qualities, thetas, prices.bundle_fee))) ++subscribers;
  }
  return prices.bundle_fee * static_cast<double>(subscribers) - cost;
}

std::vector<double> simulate_profits(const MarketConfig& cfg, const ProfitTarget& target,
                                     long long replications, std::uint64_t seed,
                                     QualityBasis basis, unsigned workers) {
  validate_config(cfg);
  if (replications < 1) throw std::invalid_argument("replications must be >= 1");
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, SingleTarget>) {
          const std::size_t c[] = {t.provider};
          check_coalition(cfg, c);
          check_prices(t.prices);
        } else {
          check_coalition(cfg, t.coalition);
          check_prices(t.prices, t.coalition.size());
        }
      },
      target);

  std::vector<double> profits(static_cast<std::size_t>(replications));
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const auto market = sample_market(cfg, stream_seed(seed, r));
      profits[r] = std::visit(
          [&](const auto& t) {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, SingleTarget>)
              return realized_profit_single(cfg, market, t.provider, t.prices, basis);
            else
              return realized_profit_bundle(cfg, market, t.coalition, t.prices, basis);
          },
          target);
    }
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<long long>(workers, replications));
  if (workers <= 1) {
    run(0, profits.size());
    return profits;
  }
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (profits.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(profits.size(), begin + chunk);
      if (begin < end) pool.emplace_back(run, begin, end);
    }
  }
  return profits;
}

ProfitEstimate summarize(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("no samples to summarize");
  ProfitEstimate est;
  est.replications = static_cast<long long>(samples.size());
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (double x : samples) sum += x;
  est.mean = sum / n;
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - est.mean) * (x - est.mean);
    est.standard_error = std::sqrt(ss / (n - 1.0) / n);
  }
  est.ci_low = est.mean - kNormalQuantile975 * est.standard_error;
  est.ci_high = est.mean + kNormalQuantile975 * est.standard_error;
  return est;
}

ProfitEstimate estimate_profit(const MarketConfig& cfg, const ProfitTarget& target,
                               long long replications, std::uint64_t seed, QualityBasis basis,
                               unsigned workers) {
  if (replications < 2) throw std::invalid_argument("replications must be >= 2");
  const auto profits = simulate_profits(cfg, target, replications, seed, basis, workers);
  return summarize(profits);
}

}  // namespace sdp
