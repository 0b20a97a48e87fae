#pragma once

// Harvesting strategies consumed by the simulator. A Policy is an immutable
// per-component description; the mutable progress of one path (next chatter
// lump, whether the opening harvest ran) lives in ComponentPolicyState.

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "harvest/errors.hpp"
#include "harvest/model.hpp"

namespace harvest {

/// Empty the stock at t = s.
struct TakeAll {};

/// m lumps at t_k = s + (k/m) eta, k = 0..m-1. Lump k removes X(t_k-)/(m-k),
/// so with no growth in between the lumps are equal and the last one empties
/// the stock.
struct Chattering {
  std::uint32_t m = 1;
  double eta = 0.0;
};

/// Chatter down to x_star at s, then keep the state at or below x_star.
struct Barrier {
  double x_star;
};

struct NoHarvest {};

using ComponentPolicy = std::variant<TakeAll, Chattering, Barrier, NoHarvest>;

struct Policy {
  std::string id;
  std::vector<ComponentPolicy> components;
};

/// How discrete lumps (TakeAll, Chattering) are priced. Reflection at a barrier
/// is always priced by the integral of the price over the removed interval.
enum class LumpPricing { LeftPrice, IntegralPrice };

inline std::string_view to_string(LumpPricing p) { return p == LumpPricing::LeftPrice ? "left" : "integral"; }

enum class LumpKind { Discrete, Reflection };

inline void validate(const ComponentPolicy& p) {
  if (const auto* c = std::get_if<Chattering>(&p)) {
    if (c->m == 0) throw InvalidParameter("chattering: m must be positive");
    if (!(c->eta >= 0.0) || !std::isfinite(c->eta)) throw InvalidParameter("chattering: eta must be >= 0");
  }
  if (const auto* b = std::get_if<Barrier>(&p))
    if (!(b->x_star > 0.0) || !std::isfinite(b->x_star)) throw InvalidParameter("barrier: x_star must be positive");
}

inline void validate(const Policy& p, std::size_t n_components) {
  if (p.components.size() != n_components)
    throw InvalidParameter("policy '" + p.id + "': expected " + std::to_string(n_components) + " components");
  for (const auto& c : p.components) validate(c);
}

inline Policy uniform_policy(std::string id, const ComponentPolicy& c, std::size_t n) {
  return {std::move(id), std::vector<ComponentPolicy>(n, c)};
}

/// Integral of the price over [x_to, x_from]: the value of chattering from
/// x_from down to x_to at frozen time, undiscounted.
inline double chattering_lump_value(const PriceFn& price, double x_from, double x_to) {
  if (!(x_to >= 0.0) || !std::isfinite(x_from)) throw DomainError("chattering_lump_value: need 0 <= x_to <= x_from");
  if (x_to > x_from) throw DomainError("chattering_lump_value: x_to > x_from");
  if (x_to == x_from) return 0.0;
  if (const auto* p = std::get_if<PowerHalf>(&price)) return 2.0 * p->theta * (std::sqrt(x_from) - std::sqrt(x_to));
  if (const auto* p = std::get_if<ConstantPrice>(&price)) return p->p * (x_from - x_to);
  const auto& g = std::get<GeneralPrice>(price);
  boost::math::quadrature::tanh_sinh<double> q;
  double err = 0.0;
  const double v = q.integrate([&g](double u) { return g.pi(u); }, x_to, x_from, 1e-10, &err);
  if (!std::isfinite(v)) throw DomainError("chattering_lump_value: price is not integrable on the interval");
  return v;
}

/// Progress of one component's policy along one path.
class ComponentPolicyState {
 public:
  ComponentPolicyState(const ComponentPolicy& policy, double s) : policy_(&policy), s_(s) {}

  bool started() const noexcept { return started_; }

  /// Harvest at t = s before any diffusion. sink(from, to, t, kind) is called
  /// once per lump; returns the post-harvest state.
  template <class Sink>
  double initial(double x, Sink&& sink) {
    started_ = true;
    return std::visit(detail::overloaded{
                          [&](const TakeAll&) {
                            if (x > 0.0) sink(x, 0.0, s_, LumpKind::Discrete);
                            return 0.0;
                          },
                          [&](const Chattering& c) { return chatter_until(c, x, s_, sink); },
                          [&](const Barrier& b) {
                            if (x > b.x_star) {
                              sink(x, b.x_star, s_, LumpKind::Reflection);
                              return b.x_star;
                            }
                            return x;
                          },
                          [&](const NoHarvest&) { return x; },
                      },
                      *policy_);
  }

  /// Harvest in (t, t + dt] applied to the post-diffusion state x.
  template <class Sink>
  double step(double x, double t, double dt, Sink&& sink) {
    return std::visit(detail::overloaded{
                          [&](const TakeAll&) { return x; },
                          [&](const Chattering& c) { return chatter_until(c, x, t + dt, sink); },
                          [&](const Barrier& b) {
                            if (x > b.x_star) {
                              sink(x, b.x_star, t + dt, LumpKind::Reflection);
                              return b.x_star;
                            }
                            return x;
                          },
                          [&](const NoHarvest&) { return x; },
                      },
                      *policy_);
  }

 private:
  // Every lump with t_k <= t_end not yet taken.
  template <class Sink>
  double chatter_until(const Chattering& c, double x, double t_end, Sink&& sink) {
    while (next_lump_ < c.m) {
      const double tk = s_ + c.eta * static_cast<double>(next_lump_) / static_cast<double>(c.m);
      if (tk > t_end) break;
      const std::uint32_t left = c.m - next_lump_;
      ++next_lump_;
      if (x <= 0.0) continue;
      const double to = left == 1 ? 0.0 : x - x / static_cast<double>(left);
      sink(x, to, c.eta == 0.0 ? s_ : t_end, LumpKind::Discrete);
      x = to;
    }
    return x;
  }

  const ComponentPolicy* policy_;
  double s_;
  bool started_ = false;
  std::uint32_t next_lump_ = 0;
};

/// Total harvest of one component in one step. The first call on a state is
/// the opening harvest at t = s; later calls cover (t, t + dt].
inline double policy_events(ComponentPolicyState& state, double x, double t, double dt) {
  double taken = 0.0;
  auto sink = [&taken](double from, double to, double, LumpKind) { taken += from - to; };
  if (!state.started()) {
    state.initial(x, sink);
    return taken;
  }
  state.step(x, t, dt, sink);
  return taken;
}

}  // namespace harvest
