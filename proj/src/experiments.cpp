#include "sdp/experiments.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sdp/analytic.hpp"
#include "sdp/coalition.hpp"
#include "sdp/optimizer.hpp"

namespace sdp {

using nlohmann::json;

// --- config ----------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

void reject_unknown_keys(const json& obj, const std::string& path,
                         std::initializer_list<std::string_view> allowed) {
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw ConfigError(path.empty() ? item.key() : path + "." + item.key(), "unknown key");
  }
}

const json& require_object(const json& node, const std::string& path) {
  if (!node.is_object()) throw ConfigError(path, "must be an object");
  return node;
}

double read_number(const json& node, const std::string& path) {
  if (!node.is_number()) throw ConfigError(path, "must be a number");
  return node.get<double>();
}

long long read_integer(const json& node, const std::string& path) {
  if (!node.is_number_integer()) throw ConfigError(path, "must be an integer");
  if (node.is_number_unsigned() && node.get<std::uint64_t>() > static_cast<std::uint64_t>(1LL << 40))
    throw ConfigError(path, "is too large");
  return node.get<long long>();
}

std::uint64_t read_unsigned(const json& node, const std::string& path) {
  if (!node.is_number_unsigned()) throw ConfigError(path, "must be a non-negative integer");
  return node.get<std::uint64_t>();
}

ReservationDistribution read_distribution(const json& node, const std::string& path) {
  ReservationDistribution d;
  if (node.is_null()) return d;
  require_object(node, path);
  reject_unknown_keys(node, path, {"kind", "lower", "upper"});
  if (node.contains("kind")) {
    const auto& kind = node["kind"];
    if (!kind.is_string() || kind.get<std::string>() != "uniform")
      throw ConfigError(path + ".kind", "only \"uniform\" is supported");
  }
  if (node.contains("lower")) d.lower = read_number(node["lower"], path + ".lower");
  if (node.contains("upper")) d.upper = read_number(node["upper"], path + ".upper");
  return d;
}

SensorPopulation read_provider(const json& node, const std::string& path) {
  SensorPopulation p;
  if (node.is_null()) return p;
  require_object(node, path);
  reject_unknown_keys(node, path, {"sensors", "quality_factor"});
  if (node.contains("sensors")) {
    const std::string spath = path + ".sensors";
    const auto& sensors = require_object(node["sensors"], spath);
    reject_unknown_keys(sensors, spath, {"count", "wage_dist"});
    if (sensors.contains("count")) p.count = read_integer(sensors["count"], spath + ".count");
    if (sensors.contains("wage_dist"))
      p.wage_dist = read_distribution(sensors["wage_dist"], spath + ".wage_dist");
  }
  if (node.contains("quality_factor"))
    p.quality_factor = read_number(node["quality_factor"], path + ".quality_factor");
  return p;
}

MarketConfig config_from_json(const json& doc) {
  MarketConfig cfg = default_market();
  if (doc.is_null()) return cfg;
  require_object(doc, "<root>");
  reject_unknown_keys(doc, "",
                      {"providers", "users", "log_base", "coalition", "optimizer_tolerance",
                       "mc_replications", "mc_seed"});
  if (doc.contains("providers")) {
    const auto& list = doc["providers"];
    if (!list.is_array()) throw ConfigError("providers", "must be an array");
    cfg.providers.clear();
    for (std::size_t i = 0; i < list.size(); ++i)
      cfg.providers.push_back(read_provider(list[i], index_path("providers", i)));
  }
  cfg.users.reservation_dist_per_provider.assign(cfg.providers.size(), ReservationDistribution{});
  if (doc.contains("users")) {
    const auto& users = require_object(doc["users"], "users");
    reject_unknown_keys(users, "users", {"count", "reservation_dist"});
    if (users.contains("count")) cfg.users.count = read_integer(users["count"], "users.count");
    if (users.contains("reservation_dist")) {
      const auto& list = users["reservation_dist"];
      if (!list.is_array()) throw ConfigError("users.reservation_dist", "must be an array");
      cfg.users.reservation_dist_per_provider.clear();
      for (std::size_t i = 0; i < list.size(); ++i)
        cfg.users.reservation_dist_per_provider.push_back(
            read_distribution(list[i], index_path("users.reservation_dist", i)));
    }
  }
  if (doc.contains("log_base")) cfg.log_base = read_number(doc["log_base"], "log_base");
  if (doc.contains("coalition")) {
    const auto& list = doc["coalition"];
    if (!list.is_array()) throw ConfigError("coalition", "must be an array of provider indices");
    if (list.empty()) throw ConfigError("coalition", "must name at least one provider");
    for (std::size_t i = 0; i < list.size(); ++i)
      cfg.coalition.push_back(read_unsigned(list[i], index_path("coalition", i)));
  }
  if (doc.contains("optimizer_tolerance"))
    cfg.optimizer_tolerance = read_number(doc["optimizer_tolerance"], "optimizer_tolerance");
  if (doc.contains("mc_replications"))
    cfg.mc_replications = read_integer(doc["mc_replications"], "mc_replications");
  if (doc.contains("mc_seed")) cfg.mc_seed = read_unsigned(doc["mc_seed"], "mc_seed");
  return cfg;
}

struct Assignment {
  std::string path;
  std::size_t line;
};

// Drops a trailing `#` comment that is not inside a string literal.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

// Walks `key` (e.g. providers[0].sensors.count) into `root`, creating nodes,
// and returns the node to assign along with the canonical path.
json& resolve_key(json& root, std::string_view key, std::size_t line, std::string& canonical) {
  const std::string where = "line " + std::to_string(line);
  json* node = &root;
  std::size_t i = 0;
  bool expect_name = true;
  while (i < key.size()) {
    if (key[i] == '.') {
      if (expect_name) throw ConfigError(where, "malformed key '" + std::string(key) + "'");
      expect_name = true;
      canonical += '.';
      ++i;
    } else if (key[i] == '[') {
      if (expect_name) throw ConfigError(where, "malformed key '" + std::string(key) + "'");
      const auto close = key.find(']', i);
      if (close == std::string_view::npos)
        throw ConfigError(where, "missing ']' in key '" + std::string(key) + "'");
      const auto digits = key.substr(i + 1, close - i - 1);
      if (digits.empty() || digits.size() > 4 ||
          !std::all_of(digits.begin(), digits.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        throw ConfigError(where, "bad index in key '" + std::string(key) + "'");
      const std::size_t idx = std::stoul(std::string(digits));
      if (node->is_null()) *node = json::array();
      if (!node->is_array())
        throw ConfigError(where, "'" + canonical + "' is not a list");
      while (node->size() <= idx) node->push_back(nullptr);
      node = &(*node)[idx];
      canonical += "[" + std::string(digits) + "]";
      i = close + 1;
    } else {
      if (!expect_name) throw ConfigError(where, "malformed key '" + std::string(key) + "'");
      std::size_t end = i;
      while (end < key.size() && key[end] != '.' && key[end] != '[') ++end;
      const auto name = key.substr(i, end - i);
      if (!is_identifier(name))
        throw ConfigError(where, "malformed key '" + std::string(key) + "'");
      if (node->is_null()) *node = json::object();
      if (!node->is_object())
        throw ConfigError(where, "'" + canonical + "' is not a table");
      node = &(*node)[std::string(name)];
      canonical += name;
      expect_name = false;
      i = end;
    }
  }
  if (expect_name) throw ConfigError(where, "malformed key '" + std::string(key) + "'");
  return *node;
}

json parse_key_values(std::string_view text, std::vector<Assignment>& assignments) {
  json root;  // null until something is assigned
  std::size_t line_no = 0;
  while (!text.empty() || line_no == 0) {
    const auto nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) {
      if (text.empty()) break;
      continue;
    }
    const std::string where = "line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value_text = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where, "missing key");
    if (value_text.empty()) throw ConfigError(where, "missing value for '" + std::string(key) + "'");
    json value;
    try {
      value = json::parse(value_text);
    } catch (const json::parse_error&) {
      if (!is_identifier(value_text))
        throw ConfigError(where, "cannot parse value '" + std::string(value_text) + "'");
      value = std::string(value_text);
    }
    std::string canonical;
    json& slot = resolve_key(root, key, line_no, canonical);
    if (!slot.is_null()) throw ConfigError(where, "'" + canonical + "' assigned twice");
    slot = std::move(value);
    assignments.push_back({canonical, line_no});
    if (text.empty()) break;
  }
  return root;
}

// Attaches the source line of the assignment that set (part of) each field.
ConfigError with_lines(const ConfigError& e, const std::vector<Assignment>& assignments) {
  auto violations = e.violations();
  for (auto& v : violations) {
    for (const auto& a : assignments) {
      const bool related = a.path == v.field ||
                           a.path.rfind(v.field + ".", 0) == 0 ||
                           a.path.rfind(v.field + "[", 0) == 0 ||
                           v.field.rfind(a.path + ".", 0) == 0 ||
                           v.field.rfind(a.path + "[", 0) == 0;
      if (related) {
        v.constraint += " (line " + std::to_string(a.line) + ")";
        break;
      }
    }
  }
  return ConfigError(std::move(violations));
}

}  // namespace

MarketConfig parse_config(std::string_view text) {
  const auto body = trim(text);
  if (!body.empty() && body.front() == '{') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      const auto upto = text.substr(0, std::min<std::size_t>(e.byte, text.size()));
      const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
      throw ConfigError("line " + std::to_string(line), "invalid JSON: " + std::string(e.what()));
    }
    return validate_config(config_from_json(doc));
  }
  std::vector<Assignment> assignments;
  const json doc = parse_key_values(text, assignments);
  try {
    return validate_config(config_from_json(doc));
  } catch (const ConfigError& e) {
    throw with_lines(e, assignments);
  }
}

MarketConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text(path));
}

// --- regions -------------------------------------------------------------------

std::string UserRegion::label() const {
  if (services == 0) return "none";
  if (mode == SellingMode::bundle) return "bundle";
  if (std::popcount(services) == 1)
    return "service-" + std::to_string(std::countr_zero(services) + 1) + "-only";
  const std::uint32_t all = (std::uint32_t{1} << service_count) - 1;
  if (services == all) return service_count == 2 ? "both" : "all";
  std::string out = "services-";
  bool first = true;
  for (std::size_t k = 0; k < service_count; ++k) {
    if (!(services & (std::uint32_t{1} << k))) continue;
    if (!first) out += '+';
    out += std::to_string(k + 1);
    first = false;
  }
  return out;
}

UserRegion classify_user(std::span<const double> thetas, std::span<const double> qualities,
                         std::span<const double> fees) {
  if (thetas.size() != qualities.size() || thetas.size() != fees.size())
    throw std::invalid_argument("thetas, qualities and fees differ in length");
  if (thetas.empty() || thetas.size() > 32) throw std::invalid_argument("need 1 to 32 services");
  UserRegion r{SellingMode::separate, 0, thetas.size()};
  for (std::size_t k = 0; k < thetas.size(); ++k)
    if (participates(user_utility_single(qualities[k], thetas[k], fees[k])))
      r.services |= std::uint32_t{1} << k;
  return r;
}

UserRegion classify_user(std::span<const double> thetas, std::span<const double> qualities,
                         double bundle_fee) {
  if (thetas.size() > 32) throw std::invalid_argument("need 1 to 32 services");
  UserRegion r{SellingMode::bundle, 0, thetas.size()};
  if (participates(user_utility_bundle(qualities, thetas, bundle_fee)))
    r.services = static_cast<std::uint32_t>((std::uint64_t{1} << thetas.size()) - 1);
  return r;
}

// --- experiments -----------------------------------------------------------------

std::optional<ExperimentName> parse_experiment_name(std::string_view name) {
  static const std::map<std::string_view, ExperimentName> names = {
      {"surface", ExperimentName::surface},
      {"solve-single", ExperimentName::solve_single},
      {"solve-bundle", ExperimentName::solve_bundle},
      {"regions", ExperimentName::regions},
      {"sweep-quality", ExperimentName::sweep_quality},
      {"simulate", ExperimentName::simulate}};
  const auto it = names.find(name);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

void check_spec(const ExperimentSpec& spec) {
  std::vector<ConfigViolation> v;
  if (spec.tolerance && !(std::isfinite(*spec.tolerance) && *spec.tolerance > 0.0))
    v.push_back({"--tol", "must be > 0"});
  if (spec.grid < 2) v.push_back({"--grid", "must be >= 2"});
  if (spec.grid > 5000) v.push_back({"--grid", "must be <= 5000"});
  if (spec.replications && *spec.replications < 2) v.push_back({"--replications", "must be >= 2"});
  if (spec.quality_values.empty()) v.push_back({"--q-values", "must list at least one value"});
  for (double q : spec.quality_values)
    if (!std::isfinite(q) || q < 0.0) v.push_back({"--q-values", "values must be finite and >= 0"});
  if (!v.empty()) throw ConfigError(std::move(v));
}

namespace {

std::string fixed(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x == 0.0 ? 0.0 : x);
  return buf;
}

template <class Range, class Fn>
std::string join(const Range& r, Fn fn) {
  std::string out;
  bool first = true;
  for (const auto& x : r) {
    if (!first) out += ',';
    out += fn(x);
    first = false;
  }
  return out;
}

std::string join_fixed(const std::vector<double>& xs) { return join(xs, fixed); }

std::string join_indices(const std::vector<std::size_t>& xs) {
  return join(xs, [](std::size_t k) { return std::to_string(k); });
}

struct Context {
  MarketConfig cfg;
  OptimizerSettings settings;
};

Context make_context(const ExperimentSpec& spec) {
  check_spec(spec);
  Context ctx{spec.config_path ? load_config(*spec.config_path) : default_market(), {}};
  if (spec.tolerance) ctx.cfg.optimizer_tolerance = *spec.tolerance;
  if (spec.replications) ctx.cfg.mc_replications = *spec.replications;
  if (spec.seed) ctx.cfg.mc_seed = *spec.seed;
  validate_config(ctx.cfg);
  ctx.settings.tolerance = ctx.cfg.optimizer_tolerance;
  return ctx;
}

std::size_t chosen_provider(const ExperimentSpec& spec, const MarketConfig& cfg,
                            std::size_t fallback = 0) {
  const std::size_t k = spec.provider.value_or(fallback);
  if (k >= cfg.provider_count())
    throw ConfigError("--provider", "index " + std::to_string(k) + " out of range for " +
                                        std::to_string(cfg.provider_count()) + " providers");
  return k;
}

void require_converged(const OptimizationResult& r) {
  if (!r.converged)
    throw OptimizationError("optimizer did not converge after " + std::to_string(r.sweeps) +
                            " sweeps");
}

json outcome_json(const MarketOutcome& o) {
  return {{"expected_supply", o.expected_supply}, {"quality", o.quality},
          {"expected_demand", o.expected_demand}, {"revenue", o.revenue},
          {"cost", o.cost},                       {"profit", o.profit}};
}

void run_surface(const ExperimentSpec& spec, const Context& ctx, std::ostream& summary) {
  const auto& cfg = ctx.cfg;
  std::vector<std::size_t> members;
  if (spec.mode == SellingMode::separate)
    members = {chosen_provider(spec, cfg)};
  else
    members = cfg.coalition_or_all();
  double buy_hi = 0.0;
  double reservation_hi = 0.0;
  for (std::size_t k : members) {
    buy_hi = std::max(buy_hi, cfg.providers[k].wage_dist.upper);
    reservation_hi += std::max(0.0, cfg.users.reservation_dist_per_provider[k].upper);
  }
  if (!(buy_hi > 0.0)) throw ConfigError("sensors.wage_dist", "upper bound must be > 0 for a surface");
  double fee_hi = max_fee(cfg, members);
  if (!(fee_hi > 0.0)) fee_hi = reservation_hi > 0.0 ? reservation_hi : 1.0;
  const auto surface = profit_surface(cfg, members, GridAxis{0.0, buy_hi, spec.grid},
                                      GridAxis{0.0, fee_hi, spec.grid});
  Table table{{"p_buy", "p_fee", "profit"}, {}};
  std::size_t best = 0;
  for (std::size_t i = 0; i < surface.buy_axis.points; ++i) {
    for (std::size_t j = 0; j < surface.fee_axis.points; ++j) {
      const std::size_t cell = i * surface.fee_axis.points + j;
      if (surface.values[cell] > surface.values[best]) best = cell;
      table.rows.push_back(
          {surface.buy_axis.value(i), surface.fee_axis.value(j), surface.values[cell]});
    }
  }
  write_table(table, spec.out_dir, "surface", spec.format);
  summary << "experiment=surface providers=" << join_indices(members)
          << " points=" << surface.values.size()
          << " best_p_buy=" << fixed(surface.buy_axis.value(best / surface.fee_axis.points))
          << " best_p_fee=" << fixed(surface.fee_axis.value(best % surface.fee_axis.points))
          << " best_profit=" << fixed(surface.values[best]) << "\n";
}

void run_solve_single(const ExperimentSpec& spec, const Context& ctx, std::ostream& summary) {
  std::vector<std::size_t> providers;
  if (spec.provider) {
    providers = {chosen_provider(spec, ctx.cfg)};
  } else {
    for (std::size_t k = 0; k < ctx.cfg.provider_count(); ++k) providers.push_back(k);
  }
  json list = json::array();
  std::vector<double> buy, fee, quality, profit;
  double total = 0.0;
  bool converged = true;
  const OptimizationResult* failed = nullptr;
  std::vector<OptimizationResult> results;
  for (std::size_t k : providers) results.push_back(maximize_prices_single(ctx.cfg, k, ctx.settings));
  for (std::size_t i = 0; i < providers.size(); ++i) {
    const auto& r = results[i];
    json entry = outcome_json(r.outcome);
    entry["provider"] = providers[i];
    entry["prices"] = {{"buying_price", r.single().buying_price}, {"fee", r.single().fee}};
    entry["evaluations"] = r.evaluations;
    entry["converged"] = r.converged;
    list.push_back(std::move(entry));
    buy.push_back(r.single().buying_price);
    fee.push_back(r.single().fee);
    quality.push_back(r.outcome.quality.at(0));
    profit.push_back(r.profit());
    total += r.profit();
    converged = converged && r.converged;
    if (!r.converged && !failed) failed = &r;
  }
  write_json({{"experiment", "solve-single"}, {"providers", list}, {"total_profit", total}},
             spec.out_dir / "solution.json");
  summary << "experiment=solve-single providers=" << join_indices(providers)
          << " p_buy=" << join_fixed(buy) << " p_fee=" << join_fixed(fee)
          << " quality=" << join_fixed(quality) << " profit=" << join_fixed(profit)
          << " total_profit=" << fixed(total) << " converged=" << (converged ? "true" : "false")
          << "\n";
  if (failed) require_converged(*failed);
}

void run_solve_bundle(const ExperimentSpec& spec, const Context& ctx, std::ostream& summary) {
  const auto coalition = ctx.cfg.coalition_or_all();
  const auto r = maximize_prices_bundle(ctx.cfg, coalition, ctx.settings);
  json doc = outcome_json(r.outcome);
  doc["experiment"] = "solve-bundle";
  doc["coalition"] = coalition;
  doc["prices"] = {{"buying_prices", r.prices.buying_prices},
                   {"bundle_fee", r.prices.bundle_fee}};
  doc["evaluations"] = r.evaluations;
  doc["converged"] = r.converged;
  doc["sweeps"] = r.sweeps;
  write_json(doc, spec.out_dir / "solution.json");
  summary << "experiment=solve-bundle coalition=" << join_indices(coalition)
          << " p_buy=" << join_fixed(r.prices.buying_prices)
          << " p_bun=" << fixed(r.prices.bundle_fee) << " quality=" << join_fixed(r.outcome.quality)
          << " profit=" << fixed(r.profit()) << " converged=" << (r.converged ? "true" : "false")
          << "\n";
  require_converged(r);
}

void run_regions(const ExperimentSpec& spec, const Context& ctx, std::ostream& summary) {
  const auto coalition = ctx.cfg.coalition_or_all();
  if (coalition.size() != 2)
    throw ConfigError("coalition", "the regions experiment needs exactly two providers");
  std::vector<double> sep_quality, sep_fee;
  for (std::size_t k : coalition) {
    const auto r = maximize_prices_single(ctx.cfg, k, ctx.settings);
    require_converged(r);
    sep_quality.push_back(r.outcome.quality.at(0));
    sep_fee.push_back(r.prices.bundle_fee);
  }
  const auto bundle = maximize_prices_bundle(ctx.cfg, coalition, ctx.settings);
  require_converged(bundle);

  const auto& d0 = ctx.cfg.users.reservation_dist_per_provider[coalition[0]];
  const auto& d1 = ctx.cfg.users.reservation_dist_per_provider[coalition[1]];
  const std::size_t n = spec.grid;
  Table separate{{"theta_1", "theta_2", "region"}, {}};
  Table bundled{{"theta_1", "theta_2", "region"}, {}};
  std::map<std::string, long long> counts;
  for (std::size_t i = 0; i < n; ++i) {
    const double t1 = d0.lower + d0.width() * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double t2 =
          d1.lower + d1.width() * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
      const double thetas[] = {t1, t2};
      const auto sep = classify_user(thetas, sep_quality, sep_fee).label();
      const auto bun = classify_user(thetas, bundle.outcome.quality, bundle.prices.bundle_fee).label();
      ++counts[sep];
      ++counts["bundle:" + bun];
      separate.rows.push_back({t1, t2, sep});
      bundled.rows.push_back({t1, t2, bun});
    }
  }
  write_table(separate, spec.out_dir, "regions", spec.format);
  write_table(bundled, spec.out_dir, "regions_bundle", spec.format);
  summary << "experiment=regions points=" << n * n << " fees=" << join_fixed(sep_fee)
          << " p_bun=" << fixed(bundle.prices.bundle_fee);
  for (const char* label : {"none", "service-1-only", "service-2-only", "both"})
    summary << " " << label << "=" << counts[label];
  summary << " bundle_none=" << counts["bundle:none"] << " bundle=" << counts["bundle:bundle"]
          << "\n";
}

void run_sweep(const ExperimentSpec& spec, const Context& ctx, std::ostream& summary) {
  const auto players = ctx.cfg.coalition_or_all();
  const std::size_t provider = chosen_provider(spec, ctx.cfg, ctx.cfg.provider_count() > 1 ? 1 : 0);
  const auto rows = sweep_quality_factor(ctx.cfg, provider, spec.quality_values, ctx.settings);
  Table table;
  table.columns.push_back("q" + std::to_string(provider + 1));
  std::string grand_name = "v";
  for (std::size_t k : players) {
    table.columns.push_back("v" + std::to_string(k + 1));
    grand_name += std::to_string(k + 1);
  }
  table.columns.push_back(grand_name);
  for (std::size_t k : players) table.columns.push_back("share_" + std::to_string(k + 1));
  for (std::size_t k : players) table.columns.push_back("gain_" + std::to_string(k + 1));
  double min_gain = std::numeric_limits<double>::infinity();
  for (const auto& row : rows) {
    std::vector<Cell> cells{row.quality_factor};
    for (double v : row.standalone) cells.emplace_back(v);
    cells.emplace_back(row.grand);
    for (double v : row.shares) cells.emplace_back(v);
    for (double v : row.gains) {
      cells.emplace_back(v);
      min_gain = std::min(min_gain, v);
    }
    table.rows.push_back(std::move(cells));
  }
  write_table(table, spec.out_dir, "sweep", spec.format);
  summary << "experiment=sweep-quality provider=" << provider << " rows=" << rows.size()
          << " min_gain=" << fixed(min_gain)
          << " individually_rational=" << (min_gain >= 0.0 ? "true" : "false") << "\n";
}

void run_simulate(const ExperimentSpec& spec, const Context& ctx, std::ostream& summary) {
  const auto& cfg = ctx.cfg;
  if (cfg.mc_replications < 2) throw ConfigError("--replications", "must be >= 2");
  ProfitTarget target;
  OptimizationResult optimum;
  std::string mode;
  if (spec.mode == SellingMode::separate) {
    const std::size_t k = chosen_provider(spec, cfg);
    optimum = maximize_prices_single(cfg, k, ctx.settings);
    target = SingleTarget{k, optimum.single()};
    mode = "single";
  } else {
    const auto coalition = cfg.coalition_or_all();
    optimum = maximize_prices_bundle(cfg, coalition, ctx.settings);
    target = BundleTarget{coalition, optimum.prices};
    mode = "bundle";
  }
  require_converged(optimum);
  const auto profits =
      simulate_profits(cfg, target, cfg.mc_replications, cfg.mc_seed, spec.quality_basis);
  const auto est = summarize(profits);
  Table table{{"replication", "profit"}, {}};
  for (std::size_t r = 0; r < profits.size(); ++r)
    table.rows.push_back({static_cast<long long>(r), profits[r]});
  write_table(table, spec.out_dir, "simulate", spec.format);
  const double z = est.standard_error > 0.0 ? (est.mean - optimum.profit()) / est.standard_error : 0.0;
  const std::string basis =
      spec.quality_basis == QualityBasis::expected_supply ? "expected" : "realized";
  write_json({{"mode", mode},
              {"coalition", optimum.coalition},
              {"prices",
               {{"buying_prices", optimum.prices.buying_prices},
                {"fee", optimum.prices.bundle_fee}}},
              {"quality_basis", basis},
              {"replications", est.replications},
              {"seed", cfg.mc_seed},
              {"mean", est.mean},
              {"std_error", est.standard_error},
              {"confidence", est.confidence},
              {"ci_low", est.ci_low},
              {"ci_high", est.ci_high},
              {"analytic_profit", optimum.profit()},
              {"z_score", z}},
             spec.out_dir / "estimate.json");
  summary << "experiment=simulate mode=" << mode << " quality_basis=" << basis
          << " replications=" << est.replications << " mean=" << fixed(est.mean)
          << " std_error=" << fixed(est.standard_error) << " ci_low=" << fixed(est.ci_low)
          << " ci_high=" << fixed(est.ci_high) << " analytic_profit=" << fixed(optimum.profit())
          << " z=" << fixed(z) << "\n";
}

}  // namespace

void run_experiment(const ExperimentSpec& spec, std::ostream& summary) {
  const Context ctx = make_context(spec);
  std::error_code ec;
  std::filesystem::create_directories(spec.out_dir, ec);
  if (ec || !std::filesystem::is_directory(spec.out_dir))
    throw IoError("cannot create output directory " + spec.out_dir.string());
  switch (spec.name) {
    case ExperimentName::surface: return run_surface(spec, ctx, summary);
    case ExperimentName::solve_single: return run_solve_single(spec, ctx, summary);
    case ExperimentName::solve_bundle: return run_solve_bundle(spec, ctx, summary);
    case ExperimentName::regions: return run_regions(spec, ctx, summary);
    case ExperimentName::sweep_quality: return run_sweep(spec, ctx, summary);
    case ExperimentName::simulate: return run_simulate(spec, ctx, summary);
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sensing-data market pricing experiments"};
  app.name("sdp-market");
  std::string experiment;
  std::string config, out_dir = ".", format = "csv", mode = "single", basis = "expected";
  double tol = 1e-4;
  std::size_t grid = 101;
  long long replications = 10000;
  std::uint64_t seed = 42;
  std::size_t provider = 0;
  std::vector<double> q_values;
  app.add_option("experiment", experiment,
                 "surface | solve-single | solve-bundle | regions | sweep-quality | simulate")
      ->required();
  auto* config_opt = app.add_option("--config", config, "market config file");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--format", format, "table format: csv | json")->capture_default_str();
  auto* tol_opt = app.add_option("--tol", tol, "optimizer tolerance")->capture_default_str();
  app.add_option("--grid", grid, "grid points per axis")->capture_default_str();
  auto* rep_opt =
      app.add_option("--replications", replications, "Monte Carlo replications")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Monte Carlo master seed")->capture_default_str();
  auto* provider_opt = app.add_option("--provider", provider, "provider index (single-provider runs)");
  app.add_option("--mode", mode, "surface/simulate target: single | bundle")->capture_default_str();
  app.add_option("--q-values", q_values, "quality factors for sweep-quality")->delimiter(',');
  app.add_option("--quality-basis", basis, "simulate: expected | realized supply in quality")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentSpec spec;
    const auto name = parse_experiment_name(experiment);
    if (!name) throw ConfigError("experiment", "unknown experiment '" + experiment + "'");
    spec.name = *name;
    if (config_opt->count()) spec.config_path = config;
    spec.out_dir = out_dir;
    if (format == "csv")
      spec.format = TableFormat::csv;
    else if (format == "json")
      spec.format = TableFormat::json;
    else
      throw ConfigError("--format", "must be csv or json");
    if (tol_opt->count()) spec.tolerance = tol;
    spec.grid = grid;
    if (rep_opt->count()) spec.replications = replications;
    if (seed_opt->count()) spec.seed = seed;
    if (provider_opt->count()) spec.provider = provider;
    if (mode == "single")
      spec.mode = SellingMode::separate;
    else if (mode == "bundle")
      spec.mode = SellingMode::bundle;
    else
      throw ConfigError("--mode", "must be single or bundle");
    if (!q_values.empty()) spec.quality_values = q_values;
    if (basis == "expected")
      spec.quality_basis = QualityBasis::expected_supply;
    else if (basis == "realized")
      spec.quality_basis = QualityBasis::realized_supply;
    else
      throw ConfigError("--quality-basis", "must be expected or realized");
    run_experiment(spec, out);
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const OptimizationError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace sdp
