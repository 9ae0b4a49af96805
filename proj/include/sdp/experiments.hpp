// Config ingestion, user-region classification and the experiment runner
// behind the command-line tool.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdp/market.hpp"
#include "sdp/monte_carlo.hpp"
#include "sdp/report.hpp"

namespace sdp {

/// Parses either a JSON document or `key = value` lines such as
///   providers[1].quality_factor = 0.7
///   users.reservation_dist[0] = {"kind": "uniform", "lower": 0, "upper": 1}
/// Omitted fields take the two-provider default market. Blank input yields
/// the default market. Throws ConfigError with line/field diagnostics.
MarketConfig parse_config(std::string_view text);

/// Reads and parses `path`; unreadable files raise IoError.
MarketConfig load_config(const std::filesystem::path& path);

// --- user regions ----------------------------------------------------------

enum class SellingMode { separate, bundle };

struct UserRegion {
  SellingMode mode = SellingMode::separate;
  std::uint32_t services = 0;  // bit k set: subscribes to service k (bundle: all bits)
  std::size_t service_count = 0;

  /// none, service-<k>-only, both (two services), services-1+3, bundle.
  std::string label() const;
  bool operator==(const UserRegion&) const = default;
};

/// Separate selling: subscribe to service k iff Q_k * theta_k > fee_k.
UserRegion classify_user(std::span<const double> thetas, std::span<const double> qualities,
                         std::span<const double> fees);

/// Bundle: buy iff sum_k Q_k * theta_k > bundle_fee.
UserRegion classify_user(std::span<const double> thetas, std::span<const double> qualities,
                         double bundle_fee);

// --- experiments -------------------------------------------------------------

enum class ExperimentName { surface, solve_single, solve_bundle, regions, sweep_quality, simulate };

std::optional<ExperimentName> parse_experiment_name(std::string_view name);

struct ExperimentSpec {
  ExperimentName name = ExperimentName::solve_single;
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path out_dir = ".";
  TableFormat format = TableFormat::csv;
  std::optional<double> tolerance;
  std::size_t grid = 101;
  std::optional<long long> replications;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> provider;
  SellingMode mode = SellingMode::separate;  // surface and simulate
  std::vector<double> quality_values{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  QualityBasis quality_basis = QualityBasis::expected_supply;
};

/// Throws ConfigError on out-of-range overrides.
void check_spec(const ExperimentSpec& spec);

/// Runs one experiment, writes its files into spec.out_dir (created when
/// missing) and prints one `key=value` summary line to `summary`.
/// Throws ConfigError, OptimizationError or IoError.
void run_experiment(const ExperimentSpec& spec, std::ostream& summary);

/// Full command-line entry point; returns the process exit code
/// (0 ok, 1 I/O, 2 config/usage, 3 optimization failure).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdp
