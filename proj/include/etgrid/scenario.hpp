#pragma once

// Full experiment description: topology, controller, plant selection, clocks,
// activation, horizon and load schedule.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "etgrid/controller.hpp"
#include "etgrid/graph.hpp"
#include "etgrid/plant.hpp"

namespace etgrid {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PlantKind { reduced, network };

struct LoadEvent {
  double t{};
  int load{};  // index into network.loads
  bool connect{};
};

// Explicit initial condition; when absent the scenario starts from the
// droop-settled operating point of its network.
struct InitialState {
  Eigen::VectorXd omega;  // rad/s
  Eigen::VectorXd mp_p;   // m_p * P, rad/s
};

struct Scenario {
  CommGraph graph;
  ControllerParams controller;
  PlantKind plant_kind{PlantKind::reduced};
  std::vector<DGParams> dgs;
  std::optional<NetworkModel> network;
  Eigen::VectorXd clocks;  // t0_i in [0, h)
  double t_on{};           // secondary activation time (s)
  double horizon{};        // s
  double micro_step{};     // s, must divide h
  std::vector<LoadEvent> load_events;
  std::optional<InitialState> initial;

  int size() const { return graph.size(); }

  void validate() const {
    try {
      graph.validate();
      controller.validate();
    } catch (const std::invalid_argument& err) {
      throw ConfigError(err.what());
    }
    const int n = size();
    if (static_cast<int>(dgs.size()) != n)
      throw ConfigError("plant.dgs: need one entry per agent");
    for (const auto& dg : dgs) {
      try {
        dg.validate();
      } catch (const std::invalid_argument& err) {
        throw ConfigError(err.what());
      }
    }
    if (clocks.size() != n) throw ConfigError("clocks.t0: need one offset per agent");
    for (int i = 0; i < n; ++i) {
      if (!(clocks(i) >= 0.0) || clocks(i) >= controller.h)
        throw ConfigError("clocks.t0: offsets must lie in [0, h)");
    }
    if (!(micro_step > 0.0)) throw ConfigError("sim.micro_step: must be > 0");
    const double ratio = controller.h / micro_step;
    if (std::abs(ratio - std::llround(ratio)) > 1e-9 || std::llround(ratio) < 1)
      throw ConfigError("sim.micro_step: must divide the event-checking period h exactly");
    if (!(t_on >= 0.0)) throw ConfigError("sim.t_on: must be >= 0");
    if (!(horizon > t_on)) throw ConfigError("sim.horizon: must exceed t_on");
    if (plant_kind == PlantKind::network || !initial.has_value()) {
      if (!network.has_value())
        throw ConfigError(plant_kind == PlantKind::network
                              ? "network: required for the network plant"
                              : "network: required for the droop-settle initial state");
    }
    if (network.has_value()) {
      try {
        network->validate();
      } catch (const std::invalid_argument& err) {
        throw ConfigError(err.what());
      }
      if (static_cast<int>(network->sources.size()) != n)
        throw ConfigError("network: need one source port per agent");
    }
    if (!load_events.empty()) {
      if (plant_kind != PlantKind::network)
        throw ConfigError("events: load events require the network plant");
      for (const auto& ev : load_events) {
        if (ev.load < 0 || ev.load >= static_cast<int>(network->loads.size()))
          throw ConfigError("events: load index out of range");
        if (!(ev.t >= 0.0) || ev.t > horizon)
          throw ConfigError("events: event time outside [0, horizon]");
      }
    }
    if (initial.has_value()) {
      if (initial->omega.size() != n || initial->mp_p.size() != n)
        throw ConfigError("initial_state: omega and mp_p need one entry per agent");
    }
  }
};

// Droop-settled operating point of the scenario's network: the primary-only
// fixed point with equal frequencies and equal m_p P. Computed by stepping
// the quasi-static model with idle secondary control.
inline PlantState droop_settle(const NetworkModel& net, const std::vector<DGParams>& dgs,
                               double omega_ref, double dt = 1e-3, double duration = 2.0) {
  const int n = static_cast<int>(dgs.size());
  PlantState state = PlantState::zero(n);
  state.omega_n.setConstant(omega_ref);
  state.omega.setConstant(omega_ref);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const auto steps = static_cast<long long>(std::llround(duration / dt));
  for (long long k = 0; k < steps; ++k)
    state = network_step(std::move(state), net, dgs, zero, zero, dt);
  return state;
}

}  // namespace etgrid
