#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xsam/errors.hpp"

namespace xsam {

enum class Rule { sgd, sam, xsam, wsam_fixed_alpha, msam, lsam, msam_plus, lsam_plus };
enum class ScaleStrategy { g_k, g_0, mean, max, slope_k, slope_m };
enum class LrSchedule { constant, cosine };

namespace detail {

template <typename E>
struct EnumName {
  E value;
  std::string_view name;
};

inline constexpr EnumName<Rule> kRuleNames[] = {
    {Rule::sgd, "sgd"},           {Rule::sam, "sam"},
    {Rule::xsam, "xsam"},         {Rule::wsam_fixed_alpha, "wsam_fixed_alpha"},
    {Rule::msam, "msam"},         {Rule::lsam, "lsam"},
    {Rule::msam_plus, "msam_plus"}, {Rule::lsam_plus, "lsam_plus"},
};
inline constexpr EnumName<ScaleStrategy> kScaleNames[] = {
    {ScaleStrategy::g_k, "g_k"},     {ScaleStrategy::g_0, "g_0"},
    {ScaleStrategy::mean, "mean"},   {ScaleStrategy::max, "max"},
    {ScaleStrategy::slope_k, "slope_k"}, {ScaleStrategy::slope_m, "slope_m"},
};
inline constexpr EnumName<LrSchedule> kScheduleNames[] = {
    {LrSchedule::constant, "constant"},
    {LrSchedule::cosine, "cosine"},
};

template <typename E, typename Table>
std::string_view name_of(E v, const Table& table) {
  for (const auto& entry : table) {
    if (entry.value == v) return entry.name;
  }
  return "?";
}

template <typename E, typename Table>
E parse_enum(std::string_view s, const Table& table, const char* what) {
  for (const auto& entry : table) {
    if (entry.name == s) return entry.value;
  }
  std::string known;
  for (const auto& entry : table) known += (known.empty() ? "" : ", ") + std::string(entry.name);
  throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "' (expected one of " +
                    known + ")");
}

}  // namespace detail

inline std::string to_string(Rule r) { return std::string(detail::name_of(r, detail::kRuleNames)); }
inline std::string to_string(ScaleStrategy s) { return std::string(detail::name_of(s, detail::kScaleNames)); }
inline std::string to_string(LrSchedule s) { return std::string(detail::name_of(s, detail::kScheduleNames)); }
inline Rule parse_rule(std::string_view s) { return detail::parse_enum<Rule>(s, detail::kRuleNames, "rule"); }
inline ScaleStrategy parse_scale(std::string_view s) {
  return detail::parse_enum<ScaleStrategy>(s, detail::kScaleNames, "scale strategy");
}
inline LrSchedule parse_schedule(std::string_view s) {
  return detail::parse_enum<LrSchedule>(s, detail::kScheduleNames, "lr schedule");
}

/// When XSAM re-runs the α* search.
struct AlphaRefresh {
  enum class Kind { per_epoch, every, never };
  Kind kind = Kind::per_epoch;
  std::int64_t period = 1;  // used by Kind::every

  static AlphaRefresh per_epoch() { return {Kind::per_epoch, 1}; }
  static AlphaRefresh every(std::int64_t n) { return {Kind::every, n}; }
  static AlphaRefresh never() { return {Kind::never, 0}; }

  friend bool operator==(const AlphaRefresh&, const AlphaRefresh&) = default;
};

struct OptimizerConfig {
  Rule rule = Rule::xsam;
  int k = 1;
  double rho = 0.05;             // per ascent step
  double rho_m = 0.1;            // probing radius
  double alpha_range_a = 2.0;    // α grid is [0, a]
  int alpha_samples = 21;
  AlphaRefresh t_alpha = AlphaRefresh::per_epoch();
  std::optional<double> initial_alpha;  // α* before the first search
  double fixed_alpha = 0.5;             // wsam_fixed_alpha only
  ScaleStrategy scale_strategy = ScaleStrategy::g_k;
  LrSchedule lr_schedule = LrSchedule::constant;
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError on invalid settings; returns soft warnings.
  std::vector<std::string> validate() const {
    std::vector<std::string> warnings;
    if (rule == Rule::sgd) {
      if (k < 0) throw ConfigError("optimizer.k must be >= 0");
    } else if (k < 1) {
      throw ConfigError("optimizer.k must be >= 1 for rule " + to_string(rule));
    }
    if (rule != Rule::sgd && !(rho > 0.0)) throw ConfigError("optimizer.rho must be > 0");
    if (rule == Rule::xsam) {
      if (!(rho_m > 0.0)) throw ConfigError("optimizer.rho_m must be > 0");
      if (alpha_samples < 2) throw ConfigError("optimizer.alpha_samples must be >= 2 for xsam");
      if (!std::isfinite(alpha_range_a)) throw ConfigError("optimizer.alpha_range_a must be finite");
      if (t_alpha.kind == AlphaRefresh::Kind::every && t_alpha.period < 1) {
        throw ConfigError("optimizer.t_alpha must be a positive integer");
      }
      if (rho_m < rho) warnings.push_back("rho_m < rho: probing radius inside the ascent radius");
    }
    if (scale_strategy == ScaleStrategy::slope_m && !(rho_m > 0.0)) {
      throw ConfigError("optimizer.rho_m must be > 0 for slope_m");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer.momentum must be in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
    if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw ConfigError("optimizer.lr0 must be finite and >= 0");
    return warnings;
  }
};

/// Multi-step configs with the per-step radius set to ρ*/k.
inline std::vector<OptimizerConfig> k_sweep(const OptimizerConfig& base, double rho_star,
                                            const std::vector<int>& ks) {
  std::vector<OptimizerConfig> out;
  out.reserve(ks.size());
  for (int k : ks) {
    if (k < 1) throw ConfigError("k_sweep: k must be >= 1");
    OptimizerConfig c = base;
    c.k = k;
    c.rho = rho_star / static_cast<double>(k);
    out.push_back(c);
  }
  return out;
}

}  // namespace xsam
