#pragma once

// Subcommands behind tools/harvest_cli: solve, simulate, verify, bounds and
// sweep. Each takes the config text plus options and returns the rendered
// output and an exit code; nothing here touches the filesystem.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <algorithm>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "harvest/analytic.hpp"
#include "harvest/bounds.hpp"
#include "harvest/config.hpp"
#include "harvest/errors.hpp"
#include "harvest/model.hpp"
#include "harvest/policy.hpp"
#include "harvest/sim.hpp"

namespace harvest::cli {

inline constexpr const char* kToolName = "harvest_cli";
inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kConfigError = 1, kUnsupported = 2, kNumericFailure = 3 };

struct Options {
  /// "json" or "csv"; empty picks the command default (csv for simulate and
  /// sweep, json otherwise).
  std::string format;
  bool no_meta = false;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> policies;
  bool with_mc = false;
  /// sweep: parameter path and "lo:hi:n".
  std::string param;
  std::string range;
  /// verify: keep per-point rows for the grid CSV.
  bool grid_csv = false;
  /// verify: multiply every solved threshold.
  double threshold_scale = 1.0;
  /// simulate: "joint", "per_component" or "both"; empty keeps the config's
  /// rule and adds the other one for multi-component problems.
  std::string extinction;
};

struct Result {
  int exit_code = kOk;
  std::string output;
  std::string error;
  std::string grid_csv;
};

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json meta() { return {{"tool", kToolName}, {"version", kToolVersion}, {"generated_at", timestamp()}}; }

inline std::string render_json(json j, const std::string& command, const Options& opt) {
  j["schema"] = kSchemaVersion;
  j["command"] = command;
  if (!opt.no_meta) j["meta"] = meta();
  return j.dump(2) + "\n";
}

inline std::string csv_preamble(const Options& opt) {
  if (opt.no_meta) return "";
  return std::string("# ") + kToolName + " " + kToolVersion + " generated_at=" + timestamp() + "\n";
}

inline json residuals_json(const ThresholdResiduals& r) {
  return {{"value_matching", r.value_matching},
          {"first_derivative", r.first_derivative},
          {"second_derivative", r.second_derivative},
          {"reduced_equation", r.reduced_equation}};
}

inline json component_solution(const ValueFunction& vf, const Problem& pb, std::size_t i, double x) {
  json c = {{"index", i}, {"dynamics", std::string(kind_name(pb.dynamics(i)))},
            {"regime", std::string(to_string(vf.regime(i)))}, {"value", num(vf.component(i, x))}};
  const auto& part = vf.part(i);
  if (const auto* ch = std::get_if<ChatterValue>(&part)) {
    c["theta"] = ch->theta;
    if (const auto* bm = std::get_if<ArithmeticBM>(&pb.dynamics(i))) {
      const auto l = lambda_roots(bm->mu, bm->sigma, pb.rho());
      c["lambda1"] = l.lambda1;
      c["lambda2"] = l.lambda2;
    }
  } else if (const auto* b = std::get_if<BmThresholdValue>(&part)) {
    const auto& s = b->sol;
    c["theta"] = s.theta;
    c["lambda1"] = s.lambda.lambda1;
    c["lambda2"] = s.lambda.lambda2;
    c["x_star"] = s.x_star;
    c["C"] = s.C;
    c["A"] = s.A;
    c["residuals"] = residuals_json(s.residuals);
    c["reduced_roots"] = s.reduced_roots;
  } else if (const auto* lg = std::get_if<LogisticThresholdValue>(&part)) {
    c["theta"] = lg->theta;
    c["x_star"] = lg->x_star;
    c["psi"] = {{"theta", lg->psi.theta_exp}, {"b", lg->psi.b_param}, {"z_scale", lg->psi.z_scale}};
    const auto d = psi_derivs(lg->x_star, lg->psi);
    c["residuals"] = {{"threshold_equation", std::abs(lg->x_star * d.d2 + 0.5 * d.d1)},
                      {"branch_gap", std::abs(vf.branch(i, lg->x_star, Branch::Lower) -
                                              vf.branch(i, lg->x_star, Branch::Upper))}};
  }
  return c;
}

// Per-component optimal policy: reflection at x* where there is a threshold,
// fine chattering to 0 otherwise.
inline Policy optimal_policy(const std::string& id, const ValueFunction& vf, double scale) {
  Policy p{id, {}};
  for (std::size_t i = 0; i < vf.size(); ++i) {
    if (const auto k = vf.threshold(i))
      p.components.emplace_back(Barrier{*k * scale});
    else
      p.components.emplace_back(Chattering{10000, 0.0});
  }
  return p;
}

inline double parse_double(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError(what, "not a number: '" + s + "'");
  }
  if (pos != s.size() || !std::isfinite(v)) throw ConfigError(what, "not a number: '" + s + "'");
  return v;
}

/// take_all, no_harvest, chatter[:m[:eta]], barrier / optimal, barrier*F,
/// barrier@X.
inline Policy parse_policy(const std::string& name, const Problem& pb,
                           const std::function<const ValueFunction&()>& solved) {
  const std::size_t n = pb.size();
  if (name == "take_all") return uniform_policy(name, TakeAll{}, n);
  if (name == "no_harvest") return uniform_policy(name, NoHarvest{}, n);
  if (name.rfind("chatter", 0) == 0) {
    Chattering c{10000, 0.0};
    std::stringstream ss(name);
    std::string head, m, eta;
    std::getline(ss, head, ':');
    if (head != "chatter") throw ConfigError("--policy", "unknown policy '" + name + "'");
    if (std::getline(ss, m, ':')) {
      const double mv = parse_double(m, "--policy");
      if (!(mv >= 1.0) || mv != std::floor(mv) || mv > 4e9) throw ConfigError("--policy", "chatter m must be a positive integer");
      c.m = static_cast<std::uint32_t>(mv);
    }
    if (std::getline(ss, eta, ':')) c.eta = parse_double(eta, "--policy");
    if (!(c.eta >= 0.0)) throw ConfigError("--policy", "chatter eta must be >= 0");
    return uniform_policy(name, c, n);
  }
  if (name.rfind("barrier@", 0) == 0) {
    const double x = parse_double(name.substr(8), "--policy");
    if (!(x > 0.0)) throw ConfigError("--policy", "barrier level must be positive");
    return uniform_policy(name, Barrier{x}, n);
  }
  if (name == "barrier" || name == "optimal") return optimal_policy(name, solved(), 1.0);
  if (name.rfind("barrier*", 0) == 0) {
    const double f = parse_double(name.substr(8), "--policy");
    if (!(f > 0.0)) throw ConfigError("--policy", "barrier scale must be positive");
    return optimal_policy(name, solved(), f);
  }
  throw ConfigError("--policy", "unknown policy '" + name + "'");
}

inline std::vector<double> default_verify_bounds(const ValueFunction& vf, const ProblemConfig& c, bool upper) {
  std::vector<double> out(vf.size());
  for (std::size_t i = 0; i < vf.size(); ++i) {
    const auto k = vf.threshold(i);
    const double ref = k ? *k : std::max(c.x0[i], 1.0);
    out[i] = upper ? 3.0 * ref : 1e-2 * ref;
  }
  return out;
}

inline json summary_json(const ConditionSummary& s) {
  return {{"pass", s.pass},           {"checked", s.checked},          {"violations", s.violations},
          {"worst_ratio", num(s.worst_ratio)}, {"worst_value", num(s.worst_value)}, {"worst_x", s.worst_x}};
}

}  // namespace detail

inline Result cmd_solve(const ProblemConfig& c, const Options& opt) {
  const Problem pb = c.problem();
  const auto vf = solve_value_function(pb);
  Result r;
  const double phi = vf(c.s, c.x0);
  if (opt.format == "csv") {
    std::string out = detail::csv_preamble(opt) + "component,dynamics,regime,x_star,C,A,component_value,value\n";
    for (std::size_t i = 0; i < pb.size(); ++i) {
      const auto js = detail::component_solution(vf, pb, i, c.x0[i]);
      auto get = [&](const char* k) { return js.contains(k) && js[k].is_number() ? js[k].get<double>() : NAN; };
      out += std::to_string(i) + "," + js["dynamics"].get<std::string>() + "," + js["regime"].get<std::string>() +
             "," + detail::fmt(get("x_star")) + "," + detail::fmt(get("C")) + "," + detail::fmt(get("A")) + "," +
             detail::fmt(get("value")) + "," + detail::fmt(phi) + "\n";
    }
    r.output = out;
    return r;
  }
  json j = {{"rho", pb.rho()}, {"s", c.s}, {"x0", c.x0}, {"value", phi}, {"components", json::array()}};
  for (std::size_t i = 0; i < pb.size(); ++i) j["components"].push_back(detail::component_solution(vf, pb, i, c.x0[i]));
  r.output = detail::render_json(std::move(j), "solve", opt);
  return r;
}

inline Result cmd_simulate(const ProblemConfig& c, const Options& opt) {
  for (std::size_t i = 0; i < c.x0.size(); ++i)
    if (!(c.x0[i] > 0.0)) throw ConfigError("x0[" + std::to_string(i) + "]", "must be positive to simulate");
  SimConfig cfg = c.sim;
  if (opt.seed) cfg.seed = *opt.seed;

  const Problem base = c.problem();
  std::optional<ValueFunction> vf;
  std::optional<double> analytic;
  if (base.has_closed_form()) {
    vf = solve_value_function(base);
    analytic = (*vf)(c.s, c.x0);
  }
  auto solved = [&]() -> const ValueFunction& {
    if (!vf) throw UnsupportedError("no analytic solution: barrier policies need solved thresholds");
    return *vf;
  };
  std::vector<std::string> names = opt.policies;
  if (names.empty()) {
    names = {"take_all", "chatter", "no_harvest"};
    if (vf) names.insert(names.begin() + 2, "barrier");
  }
  std::vector<Policy> policies;
  for (const auto& nm : names) policies.push_back(detail::parse_policy(nm, base, solved));

  std::vector<ExtinctionRule> rules;
  if (opt.extinction == "joint")
    rules = {ExtinctionRule::Joint};
  else if (opt.extinction == "per_component")
    rules = {ExtinctionRule::PerComponent};
  else if (opt.extinction == "both" || (opt.extinction.empty() && base.size() > 1))
    rules = {base.extinction(),
             base.extinction() == ExtinctionRule::Joint ? ExtinctionRule::PerComponent : ExtinctionRule::Joint};
  else if (opt.extinction.empty())
    rules = {base.extinction()};
  else
    throw ConfigError("--extinction", "expected joint, per_component or both");

  struct Row {
    PolicyRun run;
    ExtinctionRule rule;
    ExtinctionDiscount disc;
  };
  std::vector<Row> rows;
  for (const auto rule : rules) {
    const Problem pb(base.dynamics(), base.prices(), rule);
    auto runs = monte_carlo_crn(pb, policies, c.x0, c.s, cfg);
    for (auto& run : runs) {
      auto d = extinction_discount_from(run, pb.rho(), cfg.t_max);
      rows.push_back({std::move(run), rule, d});
    }
  }

  Result r;
  if (opt.format == "json") {
    json j = {{"analytic_value", analytic ? json(*analytic) : json(nullptr)},
              {"dt", cfg.dt},
              {"t_max", cfg.t_max},
              {"seed", cfg.seed},
              {"lump_pricing", std::string(to_string(cfg.lump_pricing))},
              {"rows", json::array()}};
    for (const auto& row : rows) {
      const auto& y = row.run.yield;
      j["rows"].push_back({{"policy", row.run.id},
                           {"extinction_rule", std::string(to_string(row.rule))},
                           {"mean", y.mean},
                           {"std_error", y.std_error},
                           {"ci_lo", y.ci_lo},
                           {"ci_hi", y.ci_hi},
                           {"n_paths", y.n_paths},
                           {"n_invalid", y.n_invalid},
                           {"n_extinct", row.run.extinction.n_extinct},
                           {"n_censored", row.run.extinction.n_censored},
                           {"mean_extinction_time", detail::num(row.run.extinction.mean_time)},
                           {"discount_lo", row.disc.lo()},
                           {"discount_hi", row.disc.hi()},
                           {"mean_harvest", row.run.mean_harvest}});
    }
    r.output = detail::render_json(std::move(j), "simulate", opt);
    return r;
  }
  std::string out = detail::csv_preamble(opt) +
                    "policy,extinction_rule,mean,std_error,ci_lo,ci_hi,n_paths,n_invalid,dt,t_max,seed,lump_pricing,"
                    "n_extinct,n_censored,mean_extinction_time,discount_lo,discount_hi,analytic_value\n";
  for (const auto& row : rows) {
    const auto& y = row.run.yield;
    out += row.run.id + "," + std::string(to_string(row.rule)) + "," + detail::fmt(y.mean) + "," +
           detail::fmt(y.std_error) + "," + detail::fmt(y.ci_lo) + "," + detail::fmt(y.ci_hi) + "," +
           std::to_string(y.n_paths) + "," + std::to_string(y.n_invalid) + "," + detail::fmt(cfg.dt) + "," +
           detail::fmt(cfg.t_max) + "," + std::to_string(cfg.seed) + "," + std::string(to_string(cfg.lump_pricing)) +
           "," + std::to_string(row.run.extinction.n_extinct) + "," + std::to_string(row.run.extinction.n_censored) +
           "," + detail::fmt(row.run.extinction.mean_time) + "," + detail::fmt(row.disc.lo()) + "," +
           detail::fmt(row.disc.hi()) + "," + (analytic ? detail::fmt(*analytic) : std::string()) + "\n";
  }
  r.output = out;
  return r;
}

inline Result cmd_verify(const ProblemConfig& c, const Options& opt) {
  const Problem pb = c.problem();
  ValueOptions vo;
  vo.threshold_scale = opt.threshold_scale;
  const auto vf = solve_value_function(pb, vo);
  VerifyGrid g;
  g.lo = c.verify.lo.value_or(detail::default_verify_bounds(vf, c, false));
  g.hi = c.verify.hi.value_or(detail::default_verify_bounds(vf, c, true));
  for (std::size_t i = 0; i < g.lo.size(); ++i)
    if (!(g.lo[i] < g.hi[i])) throw ConfigError("verify.hi[" + std::to_string(i) + "]", "must exceed verify.lo");
  g.points_per_axis = c.verify.points_per_axis;
  g.s = c.verify.s;
  g.keep_points = opt.grid_csv;
  const auto rep = verify_conditions(vf, pb, g);

  Result r;
  json j = {{"pass", rep.all_pass()},
            {"threshold_scale", opt.threshold_scale},
            {"grid", {{"lo", g.lo}, {"hi", g.hi}, {"points_per_axis", g.points_per_axis}, {"s", g.s}}},
            {"n_points", rep.n_points},
            {"n_in_d", rep.n_in_d},
            {"max_abs_generator_in_d", rep.max_abs_generator_in_d},
            {"conditions",
             {{"i", detail::summary_json(rep.cond_i)},
              {"ii", detail::summary_json(rep.cond_ii)},
              {"iii", detail::summary_json(rep.cond_iii)}}},
            {"pasting_pass", rep.pasting_pass},
            {"pasting", json::array()}};
  for (const auto& p : rep.pasting)
    j["pasting"].push_back({{"component", p.component},
                            {"x_star", p.x_star},
                            {"value_gap", p.value_gap},
                            {"d1_left", p.d1_left},
                            {"d1_right", p.d1_right},
                            {"d1_gap", p.d1_gap},
                            {"d2_left", p.d2_left},
                            {"d2_right", p.d2_right},
                            {"d2_gap", p.d2_gap},
                            {"pass", p.pass}});
  r.output = detail::render_json(std::move(j), "verify", opt);
  if (opt.grid_csv) {
    const std::size_t n = pb.size();
    std::string csv;
    for (std::size_t i = 0; i < n; ++i) csv += "x" + std::to_string(i) + ",";
    csv += "phi,generator,";
    for (std::size_t i = 0; i < n; ++i) csv += "margin" + std::to_string(i) + ",";
    csv += "in_d\n";
    for (const auto& p : rep.points) {
      for (double v : p.x) csv += detail::fmt(v) + ",";
      csv += detail::fmt(p.phi) + "," + detail::fmt(p.generator) + ",";
      for (double v : p.margin) csv += detail::fmt(v) + ",";
      csv += std::string(p.in_d ? "1" : "0") + "\n";
    }
    r.grid_csv = csv;
  }
  return r;
}

inline Result cmd_bounds(const ProblemConfig& c, const Options& opt) {
  const Problem pb = c.problem();
  std::optional<ExtinctionDiscount> disc;
  if (opt.with_mc) {
    for (std::size_t i = 0; i < c.x0.size(); ++i)
      if (!(c.x0[i] > 0.0)) throw ConfigError("x0[" + std::to_string(i) + "]", "must be positive for --with-mc");
    SimConfig cfg = c.sim;
    if (opt.seed) cfg.seed = *opt.seed;
    // No harvesting gives the latest extinction, hence the largest 1 - E[e^{-rho T}].
    disc = estimate_extinction_discount(pb, uniform_policy("no_harvest", NoHarvest{}, pb.size()), c.x0, cfg);
  }
  const auto rep = bounds_report(pb, c.x0, disc ? std::optional<double>(disc->lo()) : std::nullopt);
  std::optional<double> analytic;
  if (pb.has_closed_form()) analytic = solve_value_function(pb)(0.0, c.x0);

  json j = {{"lower", rep.lower},
            {"upper_conservative", rep.upper_conservative},
            {"upper_mc", rep.upper_mc ? json(*rep.upper_mc) : json(nullptr)},
            {"analytic_value", analytic ? json(*analytic) : json(nullptr)},
            {"per_component", json::array()}};
  for (const auto& pc : rep.per_component)
    j["per_component"].push_back({{"Pi", pc.Pi}, {"M", pc.M}, {"x_tilde", detail::num(pc.x_tilde)}});
  if (disc)
    j["extinction_discount"] = {{"lo", disc->lo()},
                                {"hi", disc->hi()},
                                {"n_paths", disc->censored_as_is.n_paths},
                                {"policy", "no_harvest"}};
  Result r;
  r.output = detail::render_json(std::move(j), "bounds", opt);
  return r;
}

namespace detail {

// Applies value v to the named parameter of a config copy.
inline ProblemConfig with_param(ProblemConfig c, const std::string& name, double v) {
  auto set_dyn = [&](std::size_t i, const std::string& field) {
    auto& d = c.dynamics.at(i);
    if (auto* b = std::get_if<ArithmeticBM>(&d)) {
      if (field == "mu") return void(b->mu = v);
      if (field == "sigma") return void(b->sigma = v);
    } else if (auto* l = std::get_if<Logistic>(&d)) {
      if (field == "mu") return void(l->mu = v);
      if (field == "sigma") return void(l->sigma = v);
      if (field == "K") return void(l->K = v);
    }
    throw ConfigError("--param", "component " + std::to_string(i) + " has no parameter '" + field + "'");
  };
  auto set_theta = [&](std::size_t i) {
    auto* p = std::get_if<PowerHalf>(&c.prices.at(i));
    if (!p) throw ConfigError("--param", "component " + std::to_string(i) + " price has no theta");
    p->theta = v;
  };
  if (name == "rho") {
    c.rho = v;
    return c;
  }
  if (name == "mu" || name == "sigma" || name == "K") {
    for (std::size_t i = 0; i < c.dynamics.size(); ++i) set_dyn(i, name);
    return c;
  }
  if (name == "theta") {
    for (std::size_t i = 0; i < c.prices.size(); ++i) set_theta(i);
    return c;
  }
  // dynamics[i].field, prices.components[i].theta, x0[i]
  auto index = [&](const std::string& prefix) -> std::optional<std::pair<std::size_t, std::string>> {
    if (name.rfind(prefix + "[", 0) != 0) return std::nullopt;
    const auto close = name.find(']', prefix.size());
    if (close == std::string::npos) throw ConfigError("--param", "malformed parameter '" + name + "'");
    const auto i = static_cast<std::size_t>(parse_double(name.substr(prefix.size() + 1, close - prefix.size() - 1), "--param"));
    std::string rest = name.substr(close + 1);
    if (!rest.empty() && rest[0] == '.') rest.erase(0, 1);
    if (i >= c.dynamics.size()) throw ConfigError("--param", "component index out of range in '" + name + "'");
    return std::make_pair(i, rest);
  };
  if (auto p = index("dynamics")) {
    set_dyn(p->first, p->second);
    return c;
  }
  if (auto p = index("prices.components")) {
    if (p->second != "theta") throw ConfigError("--param", "only theta can be swept in prices");
    set_theta(p->first);
    return c;
  }
  if (auto p = index("x0")) {
    c.x0.at(p->first) = v;
    return c;
  }
  throw ConfigError("--param", "unknown parameter '" + name + "'");
}

// Signed distance to the regime boundary; <= 0 means chatter to zero.
inline double regime_margin(const ComponentDynamics& d, double rho) {
  if (const auto* b = std::get_if<ArithmeticBM>(&d)) return b->mu * std::abs(b->mu) - 2.0 * rho * b->sigma * b->sigma;
  if (const auto* l = std::get_if<Logistic>(&d)) return l->mu - 2.0 * rho - 0.25 * l->sigma * l->sigma;
  throw UnsupportedError("no analytic solution for general dynamics");
}

}  // namespace detail

inline Result cmd_sweep(const ProblemConfig& c, const Options& opt) {
  if (opt.param.empty()) throw ConfigError("--param", "missing parameter name");
  std::vector<double> parts;
  {
    std::stringstream ss(opt.range);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(detail::parse_double(tok, "--range"));
  }
  if (parts.size() != 3 || !(parts[2] >= 1.0) || parts[2] != std::floor(parts[2]))
    throw ConfigError("--range", "expected lo:hi:n with integer n >= 1");
  const auto npts = static_cast<std::size_t>(parts[2]);
  if (npts > 1 && !(parts[1] > parts[0])) throw ConfigError("--range", "hi must exceed lo");
  std::vector<std::pair<double, bool>> values;
  for (double v : numerics::linear_grid(parts[0], parts[1], npts)) values.emplace_back(v, false);

  // Insert each component's regime boundary inside the range.
  const std::size_t n = c.dynamics.size();
  if (npts > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      auto margin = [&](double v) {
        const auto cc = detail::with_param(c, opt.param, v);
        return detail::regime_margin(cc.dynamics[i], cc.rho);
      };
      numerics::Bracket br{values.front().first, values.back().first, margin(values.front().first),
                           margin(values.back().first)};
      if (br.f_lo == 0.0 || br.f_hi == 0.0 || (br.f_lo < 0.0) == (br.f_hi < 0.0)) continue;
      double root = numerics::bisect(margin, br, 1e-15 * std::max(1.0, std::abs(br.hi)));
      // Land on the chatter side so the boundary row carries the closed regime.
      const double towards = br.f_lo <= 0.0 ? br.lo : br.hi;
      while (margin(root) > 0.0) root = std::nextafter(root, towards);
      values.emplace_back(root, true);
    }
    std::stable_sort(values.begin(), values.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  std::string out = detail::csv_preamble(opt) +
                    "param,value,boundary,component,regime,x_star,component_value,value_total,lower,"
                    "upper_conservative,mc_mean,mc_std_error\n";
  for (const auto& [v, boundary] : values) {
    const auto cc = detail::with_param(c, opt.param, v);
    const Problem pb = cc.problem();
    const auto vf = solve_value_function(pb);
    const double total = vf(cc.s, cc.x0);
    const auto b = bounds_report(pb, cc.x0);
    double mc_mean = NAN, mc_se = NAN;
    if (opt.with_mc) {
      SimConfig cfg = cc.sim;
      if (opt.seed) cfg.seed = *opt.seed;
      const auto est = monte_carlo(pb, detail::optimal_policy("optimal", vf, 1.0), cc.x0, cc.s, cfg);
      mc_mean = est.mean;
      mc_se = est.std_error;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = vf.threshold(i);
      out += opt.param + "," + detail::fmt(v) + "," + (boundary ? "1" : "0") + "," + std::to_string(i) + "," +
             std::string(to_string(vf.regime(i))) + "," + (k ? detail::fmt(*k) : std::string()) + "," +
             detail::fmt(vf.component(i, cc.x0[i])) + "," + detail::fmt(total) + "," + detail::fmt(b.lower) + "," +
             detail::fmt(b.upper_conservative) + "," + detail::fmt(mc_mean) + "," + detail::fmt(mc_se) + "\n";
    }
  }
  Result r;
  r.output = out;
  return r;
}

/// Parses the config and dispatches, mapping errors to exit codes.
inline Result run(const std::string& command, const std::string& config_text, const Options& opt) {
  Result r;
  try {
    if (!opt.format.empty() && opt.format != "json" && opt.format != "csv")
      throw ConfigError("--format", "expected json or csv");
    Options o = opt;
    if (o.format.empty()) o.format = command == "simulate" || command == "sweep" ? "csv" : "json";
    if (command == "sweep" && o.format != "csv") throw ConfigError("--format", "sweep writes csv only");
    if ((command == "verify" || command == "bounds") && o.format != "json")
      throw ConfigError("--format", command + " writes json only");
    const auto cfg = parse_config_text(config_text);
    if (command == "solve") return cmd_solve(cfg, o);
    if (command == "simulate") return cmd_simulate(cfg, o);
    if (command == "verify") return cmd_verify(cfg, o);
    if (command == "bounds") return cmd_bounds(cfg, o);
    if (command == "sweep") return cmd_sweep(cfg, o);
    throw ConfigError("command", "unknown command '" + command + "'");
  } catch (const ConfigError& e) {
    r.exit_code = kConfigError;
    r.error = std::string("config error: ") + e.what();
  } catch (const InvalidParameter& e) {
    r.exit_code = kConfigError;
    r.error = std::string("invalid parameter: ") + e.what();
  } catch (const UnsupportedError& e) {
    r.exit_code = kUnsupported;
    r.error = std::string("unsupported: ") + e.what();
  } catch (const Error& e) {
    r.exit_code = kNumericFailure;
    r.error = std::string("numeric failure: ") + e.what();
  } catch (const std::exception& e) {
    r.exit_code = kNumericFailure;
    r.error = std::string("numeric failure: ") + e.what();
  }
  return r;
}

}  // namespace harvest::cli
