#pragma once

// JSON problem configuration. Every parse failure is a ConfigError carrying
// the dotted path of the offending field ("prices.rho", "dynamics[1].sigma").
// Layout is documented in docs/config_schema.md.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "harvest/errors.hpp"
#include "harvest/model.hpp"
#include "harvest/policy.hpp"
#include "harvest/sim.hpp"

namespace harvest {

using json = nlohmann::json;

struct VerifySettings {
  std::optional<std::vector<double>> lo;
  std::optional<std::vector<double>> hi;
  std::size_t points_per_axis = 50;
  double s = 0.0;
};

struct ProblemConfig {
  std::vector<ComponentDynamics> dynamics;
  std::vector<PriceFn> prices;
  double rho = 0.0;
  std::optional<ExtinctionRule> extinction;
  std::vector<double> x0;
  double s = 0.0;
  SimConfig sim;
  VerifySettings verify;

  Problem problem() const { return Problem(DiffusionSpec{dynamics}, PriceSpec{rho, prices}, extinction); }
};

namespace detail {

inline std::string at(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }
inline std::string at(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

inline void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  const std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError(at(path, it.key()), "unknown field");
}

inline const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  if (!j.contains(key)) throw ConfigError(at(path, key), "missing required field");
  return j.at(key);
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
  return v;
}

inline double number_at(const json& j, const std::string& path, const char* key) {
  return number(require(j, path, key), at(path, key));
}

inline double number_or(const json& j, const std::string& path, const char* key, double fallback) {
  return j.contains(key) ? number(j.at(key), at(path, key)) : fallback;
}

inline std::string string_at(const json& j, const std::string& path, const char* key) {
  const json& v = require(j, path, key);
  if (!v.is_string()) throw ConfigError(at(path, key), "expected a string");
  return v.get<std::string>();
}

inline std::vector<double> number_list(const json& j, const std::string& path) {
  if (j.is_number()) return {number(j, path)};
  if (!j.is_array()) throw ConfigError(path, "expected a number or an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], at(path, i)));
  return out;
}

inline std::uint64_t count_at(const json& j, const std::string& path, const char* key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  throw ConfigError(at(path, key), "expected a nonnegative integer");
}

// Polynomial c0 + c1 x + c2 x^2 + ...
inline std::function<double(double)> polynomial(std::vector<double> c) {
  return [c = std::move(c)](double x) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
    return v;
  };
}

inline ComponentDynamics parse_dynamics(const json& j, const std::string& path) {
  const std::string kind = string_at(j, path, "kind");
  ComponentDynamics d;
  if (kind == "bm") {
    only_keys(j, path, {"kind", "mu", "sigma"});
    d = ArithmeticBM{number_at(j, path, "mu"), number_at(j, path, "sigma")};
  } else if (kind == "logistic") {
    only_keys(j, path, {"kind", "mu", "K", "sigma"});
    d = Logistic{number_at(j, path, "mu"), number_at(j, path, "K"), number_at(j, path, "sigma")};
  } else if (kind == "general") {
    only_keys(j, path, {"kind", "drift", "vol"});
    d = GeneralDynamics{polynomial(number_list(require(j, path, "drift"), at(path, "drift"))),
                        polynomial(number_list(require(j, path, "vol"), at(path, "vol")))};
  } else {
    throw ConfigError(at(path, "kind"), "unknown dynamics kind '" + kind + "'");
  }
  try {
    validate(d);
  } catch (const InvalidParameter& e) {
    throw ConfigError(path, e.what());
  }
  return d;
}

inline PriceFn parse_price(const json& j, const std::string& path) {
  const std::string kind = string_at(j, path, "kind");
  PriceFn f;
  if (kind == "power_half") {
    only_keys(j, path, {"kind", "theta"});
    f = PowerHalf{number_at(j, path, "theta")};
  } else if (kind == "constant") {
    only_keys(j, path, {"kind", "p"});
    f = ConstantPrice{number_at(j, path, "p")};
  } else if (kind == "power") {
    // theta x^{-alpha}, handled by the general-price code paths.
    only_keys(j, path, {"kind", "theta", "alpha"});
    const double th = number_at(j, path, "theta"), al = number_at(j, path, "alpha");
    f = GeneralPrice{[th, al](double x) { return x > 0.0 ? th * std::pow(x, -al) : std::numeric_limits<double>::infinity(); },
                     [th, al](double x) { return -al * th * std::pow(x, -al - 1.0); }};
  } else {
    throw ConfigError(at(path, "kind"), "unknown price kind '" + kind + "'");
  }
  try {
    validate(f);
  } catch (const InvalidParameter& e) {
    throw ConfigError(path, e.what());
  }
  return f;
}

inline LumpPricing parse_lump_pricing(const std::string& v, const std::string& path) {
  if (v == "left") return LumpPricing::LeftPrice;
  if (v == "integral") return LumpPricing::IntegralPrice;
  throw ConfigError(path, "expected 'left' or 'integral'");
}

inline ExtinctionRule parse_extinction(const std::string& v, const std::string& path) {
  if (v == "joint") return ExtinctionRule::Joint;
  if (v == "per_component") return ExtinctionRule::PerComponent;
  throw ConfigError(path, "expected 'joint' or 'per_component'");
}

}  // namespace detail

inline ProblemConfig parse_config(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("$", "config must be a JSON object");
  only_keys(j, "", {"schema", "dynamics", "prices", "extinction", "x0", "s", "sim", "verify", "description"});
  if (j.contains("schema") && (!j["schema"].is_number_integer() || j["schema"].get<int>() != 1))
    throw ConfigError("schema", "only schema 1 is supported");

  ProblemConfig c;
  const json& dyn = require(j, "", "dynamics");
  if (!dyn.is_array() || dyn.empty()) throw ConfigError("dynamics", "expected a non-empty array");
  for (std::size_t i = 0; i < dyn.size(); ++i) c.dynamics.push_back(parse_dynamics(dyn[i], at("dynamics", i)));

  const json& pr = require(j, "", "prices");
  if (!pr.is_object()) throw ConfigError("prices", "expected an object");
  only_keys(pr, "prices", {"rho", "components"});
  c.rho = number_at(pr, "prices", "rho");
  if (!(c.rho > 0.0)) throw ConfigError("prices.rho", "must be positive");
  const json& pc = require(pr, "prices", "components");
  if (!pc.is_array()) throw ConfigError("prices.components", "expected an array");
  if (pc.size() != dyn.size())
    throw ConfigError("prices.components", "expected " + std::to_string(dyn.size()) + " entries, one per component");
  for (std::size_t i = 0; i < pc.size(); ++i) c.prices.push_back(parse_price(pc[i], at("prices.components", i)));

  if (j.contains("extinction")) {
    if (!j["extinction"].is_string()) throw ConfigError("extinction", "expected a string");
    c.extinction = parse_extinction(j["extinction"].get<std::string>(), "extinction");
  }

  c.x0 = number_list(require(j, "", "x0"), "x0");
  if (c.x0.size() != dyn.size()) throw ConfigError("x0", "expected " + std::to_string(dyn.size()) + " entries");
  for (std::size_t i = 0; i < c.x0.size(); ++i)
    if (c.x0[i] < 0.0) throw ConfigError(at("x0", i), "must be >= 0");
  c.s = number_or(j, "", "s", 0.0);

  if (j.contains("sim")) {
    const json& sm = j["sim"];
    if (!sm.is_object()) throw ConfigError("sim", "expected an object");
    only_keys(sm, "sim", {"dt", "t_max", "n_paths", "seed", "lump_pricing", "threads", "bridge_extinction"});
    c.sim.dt = number_or(sm, "sim", "dt", c.sim.dt);
    c.sim.t_max = number_or(sm, "sim", "t_max", c.sim.t_max);
    c.sim.n_paths = count_at(sm, "sim", "n_paths", c.sim.n_paths);
    c.sim.seed = count_at(sm, "sim", "seed", c.sim.seed);
    c.sim.threads = static_cast<unsigned>(count_at(sm, "sim", "threads", c.sim.threads));
    if (sm.contains("lump_pricing"))
      c.sim.lump_pricing = parse_lump_pricing(string_at(sm, "sim", "lump_pricing"), "sim.lump_pricing");
    if (sm.contains("bridge_extinction")) {
      if (!sm["bridge_extinction"].is_boolean()) throw ConfigError("sim.bridge_extinction", "expected true or false");
      c.sim.bridge_extinction = sm["bridge_extinction"].get<bool>();
    }
    if (!(c.sim.dt > 0.0)) throw ConfigError("sim.dt", "must be positive");
    if (!(c.sim.t_max > 0.0)) throw ConfigError("sim.t_max", "must be positive");
    if (c.sim.dt > c.sim.t_max) throw ConfigError("sim.dt", "must not exceed sim.t_max");
    if (c.sim.n_paths == 0) throw ConfigError("sim.n_paths", "must be positive");
  }

  if (j.contains("verify")) {
    const json& v = j["verify"];
    if (!v.is_object()) throw ConfigError("verify", "expected an object");
    only_keys(v, "verify", {"lo", "hi", "points_per_axis", "s"});
    auto axis = [&](const char* key) -> std::optional<std::vector<double>> {
      if (!v.contains(key)) return std::nullopt;
      auto vals = number_list(v[key], at("verify", key));
      if (vals.size() == 1 && dyn.size() > 1) vals.assign(dyn.size(), vals[0]);
      if (vals.size() != dyn.size()) throw ConfigError(at("verify", key), "expected one entry per component");
      for (std::size_t i = 0; i < vals.size(); ++i)
        if (!(vals[i] > 0.0)) throw ConfigError(at(at("verify", key), i), "must be positive");
      return vals;
    };
    c.verify.lo = axis("lo");
    c.verify.hi = axis("hi");
    c.verify.points_per_axis = count_at(v, "verify", "points_per_axis", c.verify.points_per_axis);
    c.verify.s = number_or(v, "verify", "s", 0.0);
    if (c.verify.points_per_axis < 1) throw ConfigError("verify.points_per_axis", "grid is empty");
    if (c.verify.lo && c.verify.hi)
      for (std::size_t i = 0; i < dyn.size(); ++i)
        if (!((*c.verify.lo)[i] < (*c.verify.hi)[i])) throw ConfigError(at("verify.hi", i), "must exceed verify.lo");
  }
  return c;
}

inline ProblemConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

}  // namespace harvest
