#pragma once

// Two plant fidelities. The reduced first-order model integrates the two
// controller channels exactly (inputs are held constant between events). The
// network model is a quasi-static single-phase phasor circuit: each DG is an
// ideal source behind its connector impedance, loads are constant RL
// impedances, and the droop voltage E = Vnom - n_Q Q is solved
// self-consistently each step.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace etgrid {

struct SingularNetwork : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DGParams {
  double m_p{};        // frequency droop slope (rad/s per W, three-phase W)
  double n_q{};        // voltage droop slope (V per var, three-phase var)
  double v_nominal{};  // nominal per-phase source magnitude (V)
  double r_c{};        // connector resistance (ohm)
  double l_c{};        // connector inductance (H)

  void validate() const {
    if (!(m_p > 0.0)) throw std::invalid_argument("dg: m_p must be > 0");
    if (!(n_q >= 0.0)) throw std::invalid_argument("dg: n_q must be >= 0");
    if (!(v_nominal > 0.0)) throw std::invalid_argument("dg: v_nominal must be > 0");
    if (!(r_c >= 0.0) || !(l_c >= 0.0)) throw std::invalid_argument("dg: connector impedance must be >= 0");
  }
};

struct PlantState {
  Eigen::VectorXd omega;    // operating frequencies (rad/s)
  Eigen::VectorXd omega_n;  // secondary setpoints (rad/s)
  Eigen::VectorXd theta;    // DG phase angles in DG 1's frame (rad)
  Eigen::VectorXd p;        // active power, three-phase total (W)
  Eigen::VectorXd q;        // reactive power, three-phase total (var)

  static PlantState zero(int n) {
    PlantState s;
    s.omega = Eigen::VectorXd::Zero(n);
    s.omega_n = Eigen::VectorXd::Zero(n);
    s.theta = Eigen::VectorXd::Zero(n);
    s.p = Eigen::VectorXd::Zero(n);
    s.q = Eigen::VectorXd::Zero(n);
    return s;
  }

  Eigen::VectorXd mp_p(const std::vector<DGParams>& dgs) const {
    Eigen::VectorXd v(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) v(i) = dgs[static_cast<size_t>(i)].m_p * p(i);
    return v;
  }
};

// Exact integration of the decoupled channels: d(omega)/dt = u_omega,
// d(m_p P)/dt = u_p; omega_n is recovered from the droop identity.
inline PlantState reduced_step(PlantState state, const std::vector<DGParams>& dgs,
                               const Eigen::VectorXd& u_omega, const Eigen::VectorXd& u_p,
                               double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("reduced_step: dt must be > 0");
  for (Eigen::Index i = 0; i < state.omega.size(); ++i) {
    const double m_p = dgs[static_cast<size_t>(i)].m_p;
    state.omega(i) += u_omega(i) * dt;
    state.p(i) += u_p(i) / m_p * dt;
    state.omega_n(i) = state.omega(i) + m_p * state.p(i);
  }
  return state;
}

struct Line {
  int from{};
  int to{};
  double r{};  // ohm
  double l{};  // H
};

struct Load {
  int bus{};
  double r{};  // ohm
  double l{};  // H
  bool connected{true};
};

// Attachment point of one DG: source behind r_c + j w l_c at a bus.
struct SourcePort {
  int bus{};
  double r_c{};
  double l_c{};
};

struct NetworkModel {
  int bus_count{};
  std::vector<Line> lines;
  std::vector<Load> loads;
  std::vector<SourcePort> sources;             // one per DG, DG order
  double omega_impedance{2.0 * M_PI * 50.0};   // rad/s used for all reactances

  void validate() const {
    if (bus_count < 1) throw std::invalid_argument("network: need at least one bus");
    if (sources.empty()) throw std::invalid_argument("network: need at least one DG source");
    if (!(omega_impedance > 0.0)) throw std::invalid_argument("network: impedance frequency must be > 0");
    for (const auto& ln : lines) {
      if (ln.from < 0 || ln.from >= bus_count || ln.to < 0 || ln.to >= bus_count || ln.from == ln.to)
        throw std::invalid_argument("network: line endpoints out of range");
      if (!(ln.r >= 0.0) || !(ln.l >= 0.0)) throw std::invalid_argument("network: line R, L must be >= 0");
      if (ln.r == 0.0 && ln.l == 0.0) throw std::invalid_argument("network: line impedance must be nonzero");
    }
    for (const auto& ld : loads) {
      if (ld.bus < 0 || ld.bus >= bus_count) throw std::invalid_argument("network: load bus out of range");
      if (!(ld.r >= 0.0) || !(ld.l >= 0.0)) throw std::invalid_argument("network: load R, L must be >= 0");
      if (ld.r == 0.0 && ld.l == 0.0) throw std::invalid_argument("network: load impedance must be nonzero");
    }
    for (const auto& src : sources) {
      if (src.bus < 0 || src.bus >= bus_count) throw std::invalid_argument("network: source bus out of range");
      if (!(src.r_c >= 0.0) || !(src.l_c >= 0.0)) throw std::invalid_argument("network: connector must be >= 0");
    }
    // every bus reachable through lines
    std::vector<char> seen(static_cast<size_t>(bus_count), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (const auto& ln : lines) {
        const int v = ln.from == u ? ln.to : (ln.to == u ? ln.from : -1);
        if (v >= 0 && !seen[static_cast<size_t>(v)]) {
          seen[static_cast<size_t>(v)] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    if (count != bus_count) throw std::invalid_argument("network: buses are not all connected through lines");
  }
};

// Per-phase complex power injected by each DG plus the bus voltages.
struct PhasorSolution {
  Eigen::VectorXd p;             // per-phase W at the DG source node
  Eigen::VectorXd q;             // per-phase var
  Eigen::VectorXcd bus_voltage;  // per-phase V
};

// Nodal solve of the quasi-static circuit. Sources with a nonzero connector
// enter as Norton equivalents; a source with zero connector impedance fixes
// its bus voltage and is eliminated from the unknowns.
inline PhasorSolution phasor_solve(const NetworkModel& net, const Eigen::VectorXd& source_voltage,
                                   const Eigen::VectorXd& theta) {
  const int nb = net.bus_count;
  const int ns = static_cast<int>(net.sources.size());
  if (source_voltage.size() != ns || theta.size() != ns)
    throw std::invalid_argument("phasor_solve: need one voltage and angle per source");

  using cd = std::complex<double>;
  const double w = net.omega_impedance;

  std::vector<cd> emf(static_cast<size_t>(ns));
  for (int i = 0; i < ns; ++i)
    emf[static_cast<size_t>(i)] = std::polar(source_voltage(i), theta(i));

  // buses pinned by zero-impedance sources
  std::vector<int> fixed_by(static_cast<size_t>(nb), -1);
  for (int i = 0; i < ns; ++i) {
    const auto& src = net.sources[static_cast<size_t>(i)];
    if (src.r_c == 0.0 && src.l_c == 0.0) {
      if (fixed_by[static_cast<size_t>(src.bus)] >= 0)
        throw SingularNetwork("phasor_solve: two zero-impedance sources share a bus");
      fixed_by[static_cast<size_t>(src.bus)] = i;
    }
  }

  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(nb, nb);
  Eigen::VectorXcd inj = Eigen::VectorXcd::Zero(nb);
  for (const auto& ln : net.lines) {
    const cd ya = 1.0 / cd(ln.r, w * ln.l);
    y(ln.from, ln.from) += ya;
    y(ln.to, ln.to) += ya;
    y(ln.from, ln.to) -= ya;
    y(ln.to, ln.from) -= ya;
  }
  for (const auto& ld : net.loads) {
    if (ld.connected) y(ld.bus, ld.bus) += 1.0 / cd(ld.r, w * ld.l);
  }
  for (int i = 0; i < ns; ++i) {
    const auto& src = net.sources[static_cast<size_t>(i)];
    if (fixed_by[static_cast<size_t>(src.bus)] == i) continue;
    const cd yc = 1.0 / cd(src.r_c, w * src.l_c);
    y(src.bus, src.bus) += yc;
    inj(src.bus) += emf[static_cast<size_t>(i)] * yc;
  }

  std::vector<int> free_idx;
  for (int b = 0; b < nb; ++b)
    if (fixed_by[static_cast<size_t>(b)] < 0) free_idx.push_back(b);
  const int nf = static_cast<int>(free_idx.size());

  Eigen::VectorXcd v(nb);
  for (int b = 0; b < nb; ++b)
    v(b) = fixed_by[static_cast<size_t>(b)] >= 0 ? emf[static_cast<size_t>(fixed_by[static_cast<size_t>(b)])] : cd(0, 0);

  if (nf > 0) {
    Eigen::MatrixXcd yff(nf, nf);
    Eigen::VectorXcd rhs(nf);
    for (int r = 0; r < nf; ++r) {
      rhs(r) = inj(free_idx[static_cast<size_t>(r)]);
      for (int c = 0; c < nf; ++c) yff(r, c) = y(free_idx[static_cast<size_t>(r)], free_idx[static_cast<size_t>(c)]);
      for (int b = 0; b < nb; ++b)
        if (fixed_by[static_cast<size_t>(b)] >= 0) rhs(r) -= y(free_idx[static_cast<size_t>(r)], b) * v(b);
    }
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(yff);
    if (!lu.isInvertible())
      throw SingularNetwork("phasor_solve: admittance system is singular");
    const Eigen::VectorXcd vf = lu.solve(rhs);
    for (int r = 0; r < nf; ++r) v(free_idx[static_cast<size_t>(r)]) = vf(r);
  }

  PhasorSolution sol;
  sol.p.resize(ns);
  sol.q.resize(ns);
  sol.bus_voltage = v;
  for (int i = 0; i < ns; ++i) {
    const auto& src = net.sources[static_cast<size_t>(i)];
    cd cur;
    if (fixed_by[static_cast<size_t>(src.bus)] == i) {
      // KCL at the pinned bus: the source covers loads, lines and the other
      // sources attached there
      cur = cd(0, 0);
      for (const auto& ld : net.loads)
        if (ld.connected && ld.bus == src.bus) cur += v(src.bus) / cd(ld.r, w * ld.l);
      for (const auto& ln : net.lines) {
        if (ln.from == src.bus) cur += (v(ln.from) - v(ln.to)) / cd(ln.r, w * ln.l);
        if (ln.to == src.bus) cur += (v(ln.to) - v(ln.from)) / cd(ln.r, w * ln.l);
      }
      for (int jj = 0; jj < ns; ++jj) {
        const auto& other = net.sources[static_cast<size_t>(jj)];
        if (jj != i && other.bus == src.bus)
          cur -= (emf[static_cast<size_t>(jj)] - v(src.bus)) / cd(other.r_c, w * other.l_c);
      }
    } else {
      cur = (emf[static_cast<size_t>(i)] - v(src.bus)) / cd(src.r_c, w * src.l_c);
    }
    const cd s = emf[static_cast<size_t>(i)] * std::conj(cur);
    sol.p(i) = s.real();
    sol.q(i) = s.imag();
  }
  return sol;
}

// Droop-voltage fixed point solved per step. Three-phase P, Q.
struct DroopSolution {
  Eigen::VectorXd e;   // per-phase source magnitudes (V)
  Eigen::VectorXd p3;  // three-phase active power (W)
  Eigen::VectorXd q3;  // three-phase reactive power (var)
  Eigen::VectorXcd bus_voltage;
};

// Damped Picard iteration on E = Vnom - n_Q * Q3(E, theta). A plain one-step
// lag diverges here (the loop gain n_Q dQ/dE exceeds 1 for stiff connectors),
// so the fixed point is iterated to tolerance, warm-started from q_prev.
inline DroopSolution solve_droop_voltage(const NetworkModel& net, const std::vector<DGParams>& dgs,
                                         const Eigen::VectorXd& theta, const Eigen::VectorXd& q_prev) {
  const int ns = static_cast<int>(net.sources.size());
  Eigen::VectorXd e(ns);
  for (int i = 0; i < ns; ++i)
    e(i) = dgs[static_cast<size_t>(i)].v_nominal - dgs[static_cast<size_t>(i)].n_q * q_prev(i);

  constexpr double kAlpha = 0.2;
  constexpr double kTol = 1e-10;   // V
  constexpr int kMaxIter = 20000;

  PhasorSolution sol;
  for (int it = 0; it < kMaxIter; ++it) {
    sol = phasor_solve(net, e, theta);
    double worst = 0.0;
    for (int i = 0; i < ns; ++i) {
      const double target = dgs[static_cast<size_t>(i)].v_nominal - dgs[static_cast<size_t>(i)].n_q * 3.0 * sol.q(i);
      const double de = target - e(i);
      worst = std::max(worst, std::abs(de));
      e(i) += kAlpha * de;
    }
    if (worst < kTol) {
      DroopSolution out;
      out.e = e;
      out.p3 = 3.0 * sol.p;
      out.q3 = 3.0 * sol.q;
      out.bus_voltage = sol.bus_voltage;
      return out;
    }
  }
  throw SingularNetwork("solve_droop_voltage: droop voltage iteration did not converge");
}

// Algebraic refresh of the network quantities for the current angles and
// setpoints (used for the t = 0 sample and by the droop-settle procedure).
inline PlantState network_refresh(PlantState state, const NetworkModel& net,
                                  const std::vector<DGParams>& dgs) {
  const DroopSolution d = solve_droop_voltage(net, dgs, state.theta, state.q);
  state.p = d.p3;
  state.q = d.q3;
  for (Eigen::Index i = 0; i < state.omega.size(); ++i)
    state.omega(i) = state.omega_n(i) - dgs[static_cast<size_t>(i)].m_p * state.p(i);
  return state;
}

// One quasi-static step: integrate the setpoints, resolve the circuit, apply
// the droop, advance the angles in DG 1's frame.
inline PlantState network_step(PlantState state, const NetworkModel& net,
                               const std::vector<DGParams>& dgs, const Eigen::VectorXd& u_omega,
                               const Eigen::VectorXd& u_p, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("network_step: dt must be > 0");
  for (Eigen::Index i = 0; i < state.omega_n.size(); ++i)
    state.omega_n(i) += (u_omega(i) + u_p(i)) * dt;
  state = network_refresh(std::move(state), net, dgs);
  const double omega_com = state.omega(0);
  for (Eigen::Index i = 0; i < state.theta.size(); ++i)
    state.theta(i) += (state.omega(i) - omega_com) * dt;
  return state;
}

}  // namespace etgrid
