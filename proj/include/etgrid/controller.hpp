#pragma once

// Per-DG secondary frequency / active-power consensus controllers with the
// asynchronous periodic integral-type event trigger. Everything here is a
// pure function over small value types; the simulation engine owns the state
// and drives these in simulated-time order.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "etgrid/graph.hpp"

namespace etgrid {

struct InactiveAgent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NegativeSegment : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotACheckInstant : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Channel { frequency, power };

inline const char* channel_name(Channel c) {
  return c == Channel::frequency ? "frequency" : "power";
}

// independent: each channel fires on its own condition (default).
// joint: a DG broadcasts both values only when both conditions hold.
enum class TriggerMode { independent, joint };

struct ControllerParams {
  double c_omega{};     // frequency control gain (1/s)
  double c_p{};         // active-power control gain (1/s)
  double sigma_omega{}; // frequency trigger threshold; 0 = broadcast every check
  double sigma_p{};     // power trigger threshold
  double omega_ref{};   // reference angular frequency (rad/s)
  double h{};           // event-checking period (s)
  TriggerMode trigger_mode{TriggerMode::independent};

  double sigma(Channel c) const { return c == Channel::frequency ? sigma_omega : sigma_p; }
  double gain(Channel c) const { return c == Channel::frequency ? c_omega : c_p; }

  void validate() const {
    if (!(c_omega > 0.0)) throw std::invalid_argument("controller: c_omega must be > 0");
    if (!(c_p > 0.0)) throw std::invalid_argument("controller: c_p must be > 0");
    if (!(h > 0.0)) throw std::invalid_argument("controller: h must be > 0");
    if (!(sigma_omega >= 0.0)) throw std::invalid_argument("controller: sigma_omega must be >= 0");
    if (!(sigma_p >= 0.0)) throw std::invalid_argument("controller: sigma_p must be >= 0");
    if (!(omega_ref > 0.0)) throw std::invalid_argument("controller: omega_ref must be > 0");
  }
};

// Event-trigger bookkeeping for one DG and one channel.
struct TriggerState {
  Channel channel{Channel::frequency};
  double last_event_value{};   // value sampled at the last own event
  double window_integral{};    // exact integral of the squared neighbourhood
                               // error over the current inter-check window
  double segment_start{};      // time the current constant-broadcast segment began
  double next_check{};         // t0 + k h of the next trigger evaluation
  long checks_since_event{};   // p
};

// Latest broadcast values, piecewise constant between events. active_since(i)
// is the instant of DG i's initial broadcast (+inf until it happens); edges
// between two DGs carry no weight until both have broadcast.
struct BroadcastTable {
  Eigen::VectorXd omega_hat;     // rad/s
  Eigen::VectorXd mp_hat;        // m_p * P, rad/s
  Eigen::VectorXd active_since;  // s

  static BroadcastTable empty(int n) {
    BroadcastTable t;
    t.omega_hat = Eigen::VectorXd::Zero(n);
    t.mp_hat = Eigen::VectorXd::Zero(n);
    t.active_since = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    return t;
  }

  bool active(int i, double t) const { return t >= active_since(i); }
};

// e_i = sum_j a_ij (w^_i - w^_j) + g_i (w^_i - w_ref), with edge terms masked
// until both endpoints have produced their initial broadcast.
inline double neighborhood_error_freq(int i, const BroadcastTable& table, const CommGraph& graph,
                                      double omega_ref, double t) {
  if (!table.active(i, t))
    throw InactiveAgent("neighborhood_error_freq: agent has not broadcast yet");
  double e = graph.pinning(i) * (table.omega_hat(i) - omega_ref);
  for (int j = 0; j < graph.size(); ++j) {
    if (graph.adjacency(i, j) > 0.0 && table.active(j, t))
      e += graph.adjacency(i, j) * (table.omega_hat(i) - table.omega_hat(j));
  }
  return e;
}

// e_i = sum_j a_ij (m_pi P^_i - m_pj P^_j); pure consensus, no reference term.
inline double neighborhood_error_power(int i, const BroadcastTable& table, const CommGraph& graph,
                                       double t) {
  if (!table.active(i, t))
    throw InactiveAgent("neighborhood_error_power: agent has not broadcast yet");
  double e = 0.0;
  for (int j = 0; j < graph.size(); ++j) {
    if (graph.adjacency(i, j) > 0.0 && table.active(j, t))
      e += graph.adjacency(i, j) * (table.mp_hat(i) - table.mp_hat(j));
  }
  return e;
}

inline double control_input_freq(double e_omega, const ControllerParams& params, bool active) {
  return active ? -params.c_omega * e_omega : 0.0;
}

// Negative feedback on the power consensus error.
inline double control_input_power(double e_p, const ControllerParams& params, bool active) {
  return active ? -params.c_p * e_p : 0.0;
}

// The broadcast table is piecewise constant, so the trigger integrand is
// constant between table changes; one call per constant segment keeps the
// window integral exact.
inline TriggerState accumulate_window_integral(TriggerState state, double error_value,
                                               double segment_length) {
  if (segment_length < 0.0)
    throw NegativeSegment("accumulate_window_integral: segment length must be >= 0");
  state.window_integral += error_value * error_value * segment_length;
  state.segment_start += segment_length;
  return state;
}

struct TriggerDecision {
  bool fired{};
  double lhs{};  // |current - last event value|
  double rhs{};  // sigma * sqrt(window integral / h)
};

// Trigger evaluation at a check instant. sigma == 0 degenerates to
// time-triggered operation (every check broadcasts); for sigma > 0 the
// comparison is strict.
inline TriggerDecision evaluate_trigger(const TriggerState& state, double t, double current_value,
                                        const ControllerParams& params) {
  if (std::abs(t - state.next_check) > 1e-9)
    throw NotACheckInstant("evaluate_trigger: t does not match the scheduled check instant");
  const double sigma = params.sigma(state.channel);
  TriggerDecision d;
  d.lhs = std::abs(current_value - state.last_event_value);
  d.rhs = sigma * std::sqrt(state.window_integral / params.h);
  d.fired = sigma == 0.0 ? true : d.lhs > d.rhs;
  return d;
}

// Post-check bookkeeping: the window integral resets at every check; p
// increments, or resets with a fresh sample when the trigger fired.
inline void commit_check(TriggerState& state, double t, double current_value, bool fired,
                         const ControllerParams& params) {
  state.window_integral = 0.0;
  state.segment_start = t;
  state.next_check += params.h;
  if (fired) {
    state.last_event_value = current_value;
    state.checks_since_event = 0;
  } else {
    ++state.checks_since_event;
  }
}

inline TriggerDecision check_trigger(TriggerState& state, double t, double current_value,
                                     const ControllerParams& params) {
  const TriggerDecision d = evaluate_trigger(state, t, current_value, params);
  commit_check(state, t, current_value, d.fired, params);
  return d;
}

// Broadcast of one value: the table entry changes at t and is delivered to
// all out-neighbours instantaneously.
inline BroadcastTable on_event(int i, double t, Channel channel, double current_value,
                               BroadcastTable table) {
  if (channel == Channel::frequency)
    table.omega_hat(i) = current_value;
  else
    table.mp_hat(i) = current_value;
  if (!(table.active_since(i) <= t)) table.active_since(i) = t;
  return table;
}

}  // namespace etgrid
