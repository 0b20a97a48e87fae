#pragma once

// Euler-Maruyama simulation of harvested diffusions with extinction detection
// and discounted-yield accumulation, plus Monte Carlo estimators.
//
// Several policies can be run on one path at once: every policy sees the same
// Gaussian increments (common random numbers). Path k's increments depend only
// on (seed, k), so estimates do not depend on thread count or path order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "harvest/errors.hpp"
#include "harvest/model.hpp"
#include "harvest/numerics.hpp"
#include "harvest/policy.hpp"
#include "harvest/rng.hpp"

namespace harvest {

struct SimConfig {
  double dt = 1e-3;
  /// Horizon measured from s; paths alive at s + t_max are censored.
  double t_max = 100.0;
  std::uint64_t n_paths = 10000;
  std::uint64_t seed = 1;
  LumpPricing lump_pricing = LumpPricing::LeftPrice;
  /// 0 picks the hardware concurrency.
  unsigned threads = 0;
  /// Record the state every this many steps in simulate_path; 0 disables.
  std::size_t trajectory_stride = 0;
  /// Also kill a component whose Brownian bridge between two positive grid
  /// values would have touched 0.
  bool bridge_extinction = true;
};

inline void validate(const SimConfig& c) {
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw InvalidParameter("sim: dt must be positive");
  if (!(c.t_max > 0.0) || !std::isfinite(c.t_max)) throw InvalidParameter("sim: t_max must be positive");
  if (c.dt > c.t_max) throw InvalidParameter("sim: dt must not exceed t_max");
  if (c.n_paths == 0) throw InvalidParameter("sim: n_paths must be positive");
  if (c.t_max / c.dt >= 4.0e9) throw InvalidParameter("sim: more than 4e9 steps per path");
}

struct TrajectorySample {
  double t;
  std::vector<double> x;
  std::vector<double> harvested;
};

struct PathResult {
  double discounted_yield = 0.0;
  /// Absolute time; empty when censored at s + t_max.
  std::optional<double> extinction_time;
  std::vector<double> cumulative_harvest;
  bool valid = true;
  std::vector<TrajectorySample> trajectory;
};

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t n_paths = 0;
  std::uint64_t n_invalid = 0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct ExtinctionStats {
  std::uint64_t n_extinct = 0;
  std::uint64_t n_censored = 0;
  /// Mean of T - s over extinct paths; NaN when none died.
  double mean_time = std::numeric_limits<double>::quiet_NaN();
};

/// One policy's outcome over all paths of a run.
struct PolicyRun {
  std::string id;
  MCEstimate yield;
  ExtinctionStats extinction;
  /// Per-path discounted yields in path order; NaN marks an invalid path.
  std::vector<double> per_path;
  /// Per-path T - s; +inf when censored, NaN when invalid.
  std::vector<double> per_path_time;
  std::vector<double> mean_harvest;
};

inline constexpr double kZ975 = 1.959963984540054;

/// Mean, standard error (sample sd / sqrt n) and 95% interval of the finite
/// entries, summed in index order.
inline MCEstimate summarize(std::span<const double> v) {
  MCEstimate e;
  numerics::CompensatedSum sum;
  for (double y : v) {
    if (std::isfinite(y)) {
      sum.add(y);
      ++e.n_paths;
    } else {
      ++e.n_invalid;
    }
  }
  if (e.n_paths == 0) throw NumericError("monte carlo: every path is invalid");
  e.mean = sum.value() / static_cast<double>(e.n_paths);
  if (e.n_paths > 1) {
    numerics::CompensatedSum ss;
    for (double y : v)
      if (std::isfinite(y)) ss.add((y - e.mean) * (y - e.mean));
    const double var = ss.value() / static_cast<double>(e.n_paths - 1);
    e.std_error = std::sqrt(var / static_cast<double>(e.n_paths));
  }
  e.ci_lo = e.mean - kZ975 * e.std_error;
  e.ci_hi = e.mean + kZ975 * e.std_error;
  return e;
}

/// Estimate of E[a - b] over paths valid under both policies.
inline MCEstimate paired_difference(const PolicyRun& a, const PolicyRun& b) {
  if (a.per_path.size() != b.per_path.size()) throw InvalidParameter("paired_difference: runs differ in size");
  std::vector<double> d(a.per_path.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = a.per_path[k] - b.per_path[k];
  return summarize(d);
}

namespace detail {

enum class DynKind { Bm, Logistic, General };

struct Coef {
  DynKind kind;
  double mu = 0.0;
  double sigma = 0.0;
  double K = 1.0;
  const GeneralDynamics* general = nullptr;

  double drift(double x) const {
    switch (kind) {
      case DynKind::Bm: return mu;
      case DynKind::Logistic: return mu * x * (1.0 - x / K);
      default: return general->drift(x);
    }
  }
  double vol(double x) const {
    switch (kind) {
      case DynKind::Bm: return sigma;
      case DynKind::Logistic: return sigma * x;
      default: return general->vol(x);
    }
  }
};

inline std::vector<Coef> coefficients(const Problem& pb) {
  std::vector<Coef> out;
  for (std::size_t i = 0; i < pb.size(); ++i) {
    const auto& d = pb.dynamics(i);
    if (const auto* b = std::get_if<ArithmeticBM>(&d))
      out.push_back({DynKind::Bm, b->mu, b->sigma, 1.0, nullptr});
    else if (const auto* l = std::get_if<Logistic>(&d))
      out.push_back({DynKind::Logistic, l->mu, l->sigma, l->K, nullptr});
    else
      out.push_back({DynKind::General, 0.0, 0.0, 1.0, &std::get<GeneralDynamics>(d)});
  }
  return out;
}

// Per-step rule of one component after the opening harvest. Passive never
// harvests again; Barrier projects; General defers to ComponentPolicyState.
struct StepRule {
  enum Kind { Passive, Barrier, General } kind = General;
  double b = 0.0;
  double sqrt_b = 0.0;
  double two_theta = 0.0;  // 0 unless the price is theta x^{-1/2}
};

inline StepRule step_rule(const ComponentPolicy& cp, const PriceFn& pf) {
  StepRule r;
  if (std::holds_alternative<NoHarvest>(cp) || std::holds_alternative<TakeAll>(cp)) r.kind = StepRule::Passive;
  if (const auto* c = std::get_if<Chattering>(&cp); c && c->eta == 0.0) r.kind = StepRule::Passive;
  if (const auto* b = std::get_if<Barrier>(&cp)) {
    r.kind = StepRule::Barrier;
    r.b = b->x_star;
    r.sqrt_b = std::sqrt(b->x_star);
  }
  if (const auto* ph = std::get_if<PowerHalf>(&pf)) r.two_theta = 2.0 * ph->theta;
  return r;
}

struct PathSetup {
  const Problem* pb;
  std::vector<Coef> coef;
  double rho;
  double s;
  SimConfig cfg;
  std::uint64_t n_steps;
  double step_discount;
};

inline PathSetup make_setup(const Problem& pb, std::span<const Policy> policies, std::span<const double> x0, double s,
                            const SimConfig& cfg) {
  validate(cfg);
  if (x0.size() != pb.size()) throw InvalidParameter("sim: x0 has the wrong dimension");
  for (double v : x0)
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("sim: x0 must be componentwise positive");
  if (!std::isfinite(s)) throw InvalidParameter("sim: s must be finite");
  if (policies.empty()) throw InvalidParameter("sim: no policies");
  for (const auto& p : policies) validate(p, pb.size());
  const auto n_steps = static_cast<std::uint64_t>(std::ceil(cfg.t_max / cfg.dt - 1e-9));
  return {&pb, coefficients(pb), pb.rho(), s, cfg, n_steps, std::exp(-pb.rho() * cfg.dt)};
}

// Single-component lane after the opening harvest, for passive and barrier
// rules. Same arithmetic and draw order as the general loop in run_lane.
struct ScalarLane {
  double x;
  double yield;
  double harvested;
  double disc;
  double death_time = 0.0;
  bool extinct = false;
  bool valid = true;
};

inline void run_scalar(const PathSetup& st, const StepRule& rule, const PriceFn& pf, rng::PathNormalStream& normals,
                       std::uint64_t path, ScalarLane& ln) {
  const Coef c = st.coef[0];
  const double dt = st.cfg.dt, sqdt = std::sqrt(dt), s = st.s, step_discount = st.step_discount;
  const std::uint64_t n_steps = st.n_steps, seed = st.cfg.seed;
  const bool bridge = st.cfg.bridge_extinction, barrier = rule.kind == StepRule::Barrier;
  const double b = rule.b, sqrt_b = rule.sqrt_b, two_theta = rule.two_theta;
  double x = ln.x, yield = ln.yield, harvested = ln.harvested, disc = ln.disc;
  for (std::uint64_t k = 0; k < n_steps; ++k) {
    const double t0 = s + static_cast<double>(k) * dt;
    disc *= step_discount;
    const double z = normals.next();
    const double v = c.vol(x);
    const double xn = x + c.drift(x) * dt + v * sqdt * z;
    if (!std::isfinite(xn)) {
      ln.valid = false;
      break;
    }
    double tc = std::numeric_limits<double>::infinity();
    if (xn <= 0.0) {
      tc = t0 + dt * x / (x - xn);
    } else if (bridge && 2.0 * x * xn < 40.0 * v * v * dt) {
      if (rng::keyed_uniform(seed, path, static_cast<std::uint32_t>(k), 0u) < std::exp(-2.0 * x * xn / (v * v * dt)))
        tc = t0 + 0.5 * dt;
    }
    if (tc <= t0 + dt) {
      ln.extinct = true;
      ln.death_time = tc;
      x = 0.0;
      break;
    }
    x = xn;
    if (barrier && x > b) {
      yield += disc * (two_theta > 0.0 ? two_theta * (std::sqrt(x) - sqrt_b) : chattering_lump_value(pf, x, b));
      harvested += x - b;
      x = b;
    }
  }
  ln.x = x;
  ln.yield = yield;
  ln.harvested = harvested;
  ln.disc = disc;
}

// One policy along path `path`. Every call for the same path replays the same
// Gaussian stream, which is what makes runs of different policies share
// their random numbers.
inline PathResult run_lane(const PathSetup& st, const Policy& policy, std::span<const double> x0, std::uint64_t path,
                           bool record) {
  const Problem& pb = *st.pb;
  const std::size_t n = pb.size();
  const double dt = st.cfg.dt, sqdt = std::sqrt(dt), rho = st.rho, s = st.s;
  const double step_discount = st.step_discount;
  const std::uint64_t n_steps = st.n_steps;
  const bool joint = pb.extinction() == ExtinctionRule::Joint;
  const LumpPricing pricing = st.cfg.lump_pricing;
  const std::size_t stride = record ? st.cfg.trajectory_stride : 0;
  const bool bridge = st.cfg.bridge_extinction;
  const std::uint64_t seed = st.cfg.seed;
  const Coef* coef = st.coef.data();

  std::vector<double> x(x0.begin(), x0.end()), harvested(n, 0.0), z(n);
  std::vector<char> alive(n, 1);
  std::vector<StepRule> rule(n);
  std::vector<ComponentPolicyState> states;
  states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    states.emplace_back(policy.components[i], s);
    rule[i] = step_rule(policy.components[i], pb.price_fn(i));
  }
  PathResult out;
  double yield = 0.0, death_time = 0.0;
  bool running = true, extinct = false, valid = true;

  // Joint rule: the path ends at the first death. Per component: it ends
  // with the last one.
  auto kill = [&](std::size_t i, double t) {
    alive[i] = 0;
    x[i] = 0.0;
    death_time = std::max(death_time, t);
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) any = any || alive[j];
    if (joint || !any) {
      running = false;
      extinct = true;
      if (joint) {
        death_time = t;
        std::fill(alive.begin(), alive.end(), 0);
        std::fill(x.begin(), x.end(), 0.0);
      }
    }
  };

  // Lumps from the policy state machine, valued per the pricing mode.
  auto harvest = [&](std::size_t i, double disc_now, double t_start, bool opening) {
    const double t_now = opening ? t_start : t_start + dt;
    const PriceFn& pf = pb.price_fn(i);
    auto sink = [&](double from, double to, double t_event, LumpKind kind) {
      const double v = kind == LumpKind::Discrete && pricing == LumpPricing::LeftPrice
                           ? price(pf, from) * (from - to)
                           : chattering_lump_value(pf, from, to);
      const double disc = t_event == t_now ? disc_now : std::exp(-rho * t_event);
      yield += disc * v;
      harvested[i] += from - to;
    };
    x[i] = opening ? states[i].initial(x[i], sink) : states[i].step(x[i], t_start, dt, sink);
  };

  auto snapshot = [&](double t) { out.trajectory.push_back({t, x, harvested}); };

  // Harvests at one instant all happen before anyone is declared dead, so
  // under the joint rule emptying one component does not cancel the others.
  const double disc_s = std::exp(-rho * s);
  for (std::size_t i = 0; i < n; ++i) harvest(i, disc_s, s, true);
  for (std::size_t i = 0; i < n && running; ++i)
    if (x[i] <= 0.0) kill(i, s);
  if (stride) snapshot(s);

  rng::PathNormalStream normals(seed, path);
  double disc = disc_s;
  if (n == 1 && !stride && running && rule[0].kind != StepRule::General) {
    ScalarLane ln{x[0], yield, harvested[0], disc};
    run_scalar(st, rule[0], pb.price_fn(0), normals, path, ln);
    out.discounted_yield = ln.valid ? ln.yield : std::numeric_limits<double>::quiet_NaN();
    out.valid = ln.valid;
    if (ln.extinct) out.extinction_time = ln.death_time;
    out.cumulative_harvest = {ln.harvested};
    return out;
  }
  for (std::uint64_t k = 0; k < n_steps && running; ++k) {
    const double t0 = s + static_cast<double>(k) * dt;
    const double t1 = t0 + dt;
    disc *= step_discount;
    // One draw per component per step, dead or alive, so that the stream
    // stays aligned across policies.
    for (std::size_t i = 0; i < n; ++i) z[i] = normals.next();
    // Diffusion, then extinction with the crossing time interpolated
    // linearly inside the step, then harvest on the survivors.
    double first_death = std::numeric_limits<double>::infinity();
    std::size_t first_i = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      const double xi = x[i];
      const double v = coef[i].vol(xi);
      const double xn = xi + coef[i].drift(xi) * dt + v * sqdt * z[i];
      if (!std::isfinite(xn)) {
        valid = false;
        running = false;
        break;
      }
      x[i] = xn;
      double tc = std::numeric_limits<double>::infinity();
      if (xn <= 0.0) {
        tc = t0 + dt * xi / (xi - xn);
      } else if (bridge && 2.0 * xi * xn < 40.0 * v * v * dt) {
        // P(bridge from xi to xn touches 0) = exp(-2 xi xn / (v^2 dt)).
        if (rng::keyed_uniform(seed, path, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(i)) <
            std::exp(-2.0 * xi * xn / (v * v * dt)))
          tc = t0 + 0.5 * dt;
      }
      if (tc <= t1) {
        if (!joint) {
          kill(i, tc);
        } else if (tc < first_death) {
          first_death = tc;
          first_i = i;
        }
      }
    }
    if (valid && first_i < n) kill(first_i, first_death);
    bool emptied = false;
    for (std::size_t i = 0; i < n && running; ++i) {
      if (!alive[i] || rule[i].kind == StepRule::Passive) continue;
      if (rule[i].kind == StepRule::Barrier) {
        const double xi = x[i], b = rule[i].b;
        if (xi > b) {
          const double v = rule[i].two_theta > 0.0 ? rule[i].two_theta * (std::sqrt(xi) - rule[i].sqrt_b)
                                                   : chattering_lump_value(pb.price_fn(i), xi, b);
          yield += disc * v;
          harvested[i] += xi - b;
          x[i] = b;
        }
        continue;
      }
      harvest(i, disc, t0, false);
      emptied = emptied || x[i] <= 0.0;
    }
    for (std::size_t i = 0; emptied && i < n && running; ++i)
      if (alive[i] && x[i] <= 0.0) kill(i, t1);
    if (stride && (k + 1) % stride == 0) snapshot(t1);
  }

  out.discounted_yield = valid ? yield : std::numeric_limits<double>::quiet_NaN();
  out.valid = valid;
  if (extinct) out.extinction_time = death_time;
  out.cumulative_harvest = std::move(harvested);
  return out;
}

}  // namespace detail

/// One path under one policy. path_index selects the Gaussian stream.
inline PathResult simulate_path(const Problem& pb, const Policy& policy, std::span<const double> x0, double s,
                                const SimConfig& cfg, std::uint64_t path_index) {
  const auto st = detail::make_setup(pb, std::span<const Policy>(&policy, 1), x0, s, cfg);
  return detail::run_lane(st, policy, x0, path_index, true);
}

/// All policies over paths 0..n_paths-1 with common random numbers.
inline std::vector<PolicyRun> monte_carlo_crn(const Problem& pb, std::span<const Policy> policies,
                                              std::span<const double> x0, double s, const SimConfig& cfg) {
  const auto st = detail::make_setup(pb, policies, x0, s, cfg);
  const std::size_t np = policies.size(), n = pb.size();
  const std::uint64_t paths = cfg.n_paths;
  std::vector<PolicyRun> runs(np);
  for (std::size_t p = 0; p < np; ++p) {
    runs[p].id = policies[p].id;
    runs[p].per_path.assign(paths, 0.0);
    runs[p].per_path_time.assign(paths, 0.0);
  }
  // Harvest totals per (policy, path, component), reduced in path order below.
  std::vector<double> harvest(np * paths * n, 0.0);

  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, paths));
  auto work = [&](std::uint64_t begin, std::uint64_t end) {
    for (std::uint64_t k = begin; k < end; ++k) {
      for (std::size_t p = 0; p < np; ++p) {
        const auto r = detail::run_lane(st, policies[p], x0, k, false);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        runs[p].per_path[k] = r.valid ? r.discounted_yield : nan;
        runs[p].per_path_time[k] =
            !r.valid ? nan : r.extinction_time ? *r.extinction_time - s : std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) harvest[(p * paths + k) * n + i] = r.valid ? r.cumulative_harvest[i] : nan;
      }
    }
  };
  if (threads <= 1) {
    work(0, paths);
  } else {
    std::vector<std::thread> pool;
    const std::uint64_t chunk = (paths + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::uint64_t b = std::min<std::uint64_t>(paths, w * chunk), e = std::min<std::uint64_t>(paths, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t p = 0; p < np; ++p) {
    auto& run = runs[p];
    run.yield = summarize(run.per_path);
    numerics::CompensatedSum tsum;
    for (double t : run.per_path_time) {
      if (std::isnan(t)) continue;
      if (std::isinf(t)) {
        ++run.extinction.n_censored;
      } else {
        ++run.extinction.n_extinct;
        tsum.add(t);
      }
    }
    if (run.extinction.n_extinct > 0) run.extinction.mean_time = tsum.value() / static_cast<double>(run.extinction.n_extinct);
    run.mean_harvest.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      numerics::CompensatedSum h;
      for (std::uint64_t k = 0; k < paths; ++k) {
        const double v = harvest[(p * paths + k) * n + i];
        if (std::isfinite(v)) h.add(v);
      }
      run.mean_harvest[i] = h.value() / static_cast<double>(run.yield.n_paths);
    }
  }
  return runs;
}

/// Monte Carlo estimate of J(s, x0) for one policy.
inline MCEstimate monte_carlo(const Problem& pb, const Policy& policy, std::span<const double> x0, double s,
                              const SimConfig& cfg) {
  return monte_carlo_crn(pb, std::span<const Policy>(&policy, 1), x0, s, cfg).front().yield;
}

/// E[exp(-rho T)] at s = 0, bracketed by the treatment of censored paths:
/// counting them as never dying (discount 0) gives the low end, counting them
/// as dying at t_max gives the high end.
struct ExtinctionDiscount {
  MCEstimate censored_as_zero;
  MCEstimate censored_as_is;

  double lo() const { return censored_as_zero.mean; }
  double hi() const { return censored_as_is.mean; }
};

inline ExtinctionDiscount extinction_discount_from(const PolicyRun& run, double rho, double t_max) {
  std::vector<double> as_zero(run.per_path_time.size()), as_is(run.per_path_time.size());
  for (std::size_t k = 0; k < as_zero.size(); ++k) {
    const double t = run.per_path_time[k];
    if (std::isnan(t)) {
      as_zero[k] = as_is[k] = t;
    } else if (std::isinf(t)) {
      as_zero[k] = 0.0;
      as_is[k] = std::exp(-rho * t_max);
    } else {
      as_zero[k] = as_is[k] = std::exp(-rho * t);
    }
  }
  return {summarize(as_zero), summarize(as_is)};
}

inline ExtinctionDiscount estimate_extinction_discount(const Problem& pb, const Policy& policy,
                                                       std::span<const double> x0, const SimConfig& cfg) {
  const auto runs = monte_carlo_crn(pb, std::span<const Policy>(&policy, 1), x0, 0.0, cfg);
  return extinction_discount_from(runs.front(), pb.rho(), cfg.t_max);
}


}  // namespace harvest
