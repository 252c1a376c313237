// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "qvit/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qvit/errors.hpp"

namespace qvit::qsim {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

void apply_1q(std::span<Amplitude> amps, std::size_t qubit, Amplitude m00, Amplitude m01, Amplitude m10,
              Amplitude m11) {
  const std::size_t stride = std::size_t{1} << qubit;
  for (std::size_t base = 0; base < amps.size(); base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) {
      const Amplitude a = amps[i];
      const Amplitude b = amps[i + stride];
      amps[i] = m00 * a + m01 * b;
      amps[i + stride] = m10 * a + m11 * b;
    }
  }
}

void apply_cnot(std::span<Amplitude> amps, std::size_t control, std::size_t target) {
  const std::size_t cmask = std::size_t{1} << control;
  const std::size_t tmask = std::size_t{1} << target;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    if ((i & cmask) && !(i & tmask)) std::swap(amps[i], amps[i | tmask]);
  }
}

template <class PairFn>
void for_pairs(std::span<Amplitude> amps, std::size_t qubit, PairFn&& fn) {
  const std::size_t stride = std::size_t{1} << qubit;
  for (std::size_t base = 0; base < amps.size(); base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) fn(amps[i], amps[i + stride]);
  }
}

void apply_gate(std::span<Amplitude> amps, const Gate& g, double angle) {
  switch (g.kind) {
    case GateKind::H: {
      const double r = std::numbers::sqrt2 / 2.0;
      for_pairs(amps, g.target, [r](Amplitude& a, Amplitude& b) {
        const Amplitude sum = a + b, diff = a - b;
        a = sum * r;
        b = diff * r;
      });
      break;
    }
    case GateKind::RX: {
      const double c = std::cos(angle / 2.0), s = std::sin(angle / 2.0);
      for_pairs(amps, g.target, [c, s](Amplitude& a, Amplitude& b) {
        const double ar = a.real(), ai = a.imag(), br = b.real(), bi = b.imag();
        a = {c * ar + s * bi, c * ai - s * br};
        b = {c * br + s * ai, c * bi - s * ar};
      });
      break;
    }
    case GateKind::RY: {
      const double c = std::cos(angle / 2.0), s = std::sin(angle / 2.0);
      for_pairs(amps, g.target, [c, s](Amplitude& a, Amplitude& b) {
        const Amplitude a0 = a;
        a = c * a0 - s * b;
        b = s * a0 + c * b;
      });
      break;
    }
    case GateKind::RZ: {
      const double c = std::cos(angle / 2.0), s = std::sin(angle / 2.0);
      for_pairs(amps, g.target, [c, s](Amplitude& a, Amplitude& b) {
        a = {c * a.real() + s * a.imag(), c * a.imag() - s * a.real()};
        b = {c * b.real() - s * b.imag(), c * b.imag() + s * b.real()};
      });
      break;
    }
    case GateKind::CNOT:
      apply_cnot(amps, g.control, g.target);
      break;
  }
}

// Inverse of every supported gate: H and CNOT are involutions, rotations negate.
void apply_inverse(std::span<Amplitude> amps, const Gate& g, double angle) { apply_gate(amps, g, -angle); }

// Rotation generator: RX -> X, RY -> Y, RZ -> Z.
void apply_generator(std::span<Amplitude> amps, const Gate& g) {
  switch (g.kind) {
    case GateKind::RX:
      for_pairs(amps, g.target, [](Amplitude& a, Amplitude& b) { std::swap(a, b); });
      break;
    case GateKind::RY:
      // Y = [[0, -i], [i, 0]]
      for_pairs(amps, g.target, [](Amplitude& a, Amplitude& b) {
        const Amplitude a0 = a;
        a = {b.imag(), -b.real()};
        b = {-a0.imag(), a0.real()};
      });
      break;
    case GateKind::RZ:
      for_pairs(amps, g.target, [](Amplitude&, Amplitude& b) { b = -b; });
      break;
    default:
      break;
  }
}

double angle_of(const Gate& g, std::span<const double> x, std::span<const double> theta) {
  switch (g.source) {
    case AngleSource::Data:
      return x[g.index];
    case AngleSource::Param:
      return theta[g.index];
    case AngleSource::None:
      break;
  }
  return 0.0;
}

void check_inputs(const Circuit& c, std::span<const double> x, std::span<const double> theta) {
  if (x.size() != c.num_data()) {
    throw DimensionError("circuit expects " + std::to_string(c.num_data()) + " data values, got " +
                         std::to_string(x.size()));
  }
  if (theta.size() != c.num_params()) {
    std::string who = c.role() ? std::string(to_string(*c.role())) + " circuit" : std::string("circuit");
    throw ConfigError(who + " expects " + std::to_string(c.num_params()) + " parameters, got " +
                      std::to_string(theta.size()));
  }
}

std::vector<double> weighted_expectations(std::span<const Amplitude> amps, std::size_t num_qubits) {
  std::vector<double> out(num_qubits, 0.0);
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double p = std::norm(amps[i]);
    for (std::size_t q = 0; q < num_qubits; ++q) out[q] += ((i >> q) & 1U) ? -p : p;
  }
  return out;
}

double dot_weights(std::span<const double> e, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t q = 0; q < w.size(); ++q) s += w[q] * e[q];
  return s;
}

}  // namespace

StateVector::StateVector(std::size_t num_qubits) : num_qubits_(num_qubits) {
  if (num_qubits == 0 || num_qubits > 24) {
    throw DimensionError("StateVector: unsupported qubit count " + std::to_string(num_qubits));
  }
  amplitudes_.assign(std::size_t{1} << num_qubits, Amplitude{0.0, 0.0});
  amplitudes_[0] = 1.0;
}

void StateVector::check_qubit(std::size_t qubit) const {
  if (qubit >= num_qubits_) {
    throw DimensionError("qubit index " + std::to_string(qubit) + " out of range for " +
                         std::to_string(num_qubits_) + " qubits");
  }
}

void StateVector::apply_1q(std::size_t qubit, Amplitude m00, Amplitude m01, Amplitude m10, Amplitude m11) {
  check_qubit(qubit);
  qsim::apply_1q(amplitudes_, qubit, m00, m01, m10, m11);
}

void StateVector::apply_h(std::size_t qubit) {
  check_qubit(qubit);
  apply_gate(amplitudes_, Gate{GateKind::H, qubit}, 0.0);
}

void StateVector::apply_rx(std::size_t qubit, double angle) {
  check_qubit(qubit);
  apply_gate(amplitudes_, Gate{GateKind::RX, qubit}, angle);
}

void StateVector::apply_ry(std::size_t qubit, double angle) {
  check_qubit(qubit);
  apply_gate(amplitudes_, Gate{GateKind::RY, qubit}, angle);
}

void StateVector::apply_rz(std::size_t qubit, double angle) {
  check_qubit(qubit);
  apply_gate(amplitudes_, Gate{GateKind::RZ, qubit}, angle);
}

void StateVector::apply_cnot(std::size_t control, std::size_t target) {
  check_qubit(control);
  check_qubit(target);
  if (control == target) throw DimensionError("CNOT control and target coincide");
  qsim::apply_cnot(amplitudes_, control, target);
}

double StateVector::norm() const {
  double s = 0.0;
  for (const auto& a : amplitudes_) s += std::norm(a);
  return std::sqrt(s);
}

double expect_z(const StateVector& state, std::size_t qubit) {
  if (qubit >= state.num_qubits()) {
    throw DimensionError("expect_z: qubit " + std::to_string(qubit) + " out of range for " +
                         std::to_string(state.num_qubits()) + " qubits");
  }
  double s = 0.0;
  auto amps = state.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double p = std::norm(amps[i]);
    s += ((i >> qubit) & 1U) ? -p : p;
  }
  return s;
}

std::vector<double> expect_z_all(const StateVector& state) {
  return weighted_expectations(state.amplitudes(), state.num_qubits());
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Key:
      return "key";
    case Role::Query:
      return "query";
    case Role::Value:
      return "value";
  }
  return "?";
}

std::size_t param_count(Role role, std::size_t num_qubits) {
  return role == Role::Value ? 3 * num_qubits : 3 * num_qubits + 1;
}

Circuit::Circuit(std::size_t num_qubits, std::optional<Role> role) : num_qubits_(num_qubits), role_(role) {
  if (num_qubits == 0) throw DimensionError("Circuit: at least one qubit required");
}

void Circuit::add(Gate gate) {
  if (gate.target >= num_qubits_ || (gate.kind == GateKind::CNOT && gate.control >= num_qubits_)) {
    throw DimensionError("Circuit: gate qubit index out of range for " + std::to_string(num_qubits_) + " qubits");
  }
  if (gate.kind == GateKind::CNOT && gate.control == gate.target) {
    throw DimensionError("Circuit: CNOT control equals target");
  }
  const bool rotation = gate.kind == GateKind::RX || gate.kind == GateKind::RY || gate.kind == GateKind::RZ;
  if (rotation != (gate.source != AngleSource::None)) {
    throw ValidationError("Circuit: only rotation gates carry an angle");
  }
  if (gate.source == AngleSource::Data) num_data_ = std::max(num_data_, gate.index + 1);
  if (gate.source == AngleSource::Param) num_params_ = std::max(num_params_, gate.index + 1);
  gates_.push_back(gate);
}

Circuit Circuit::for_role(Role role, std::size_t num_qubits) {
  Circuit c(num_qubits, role);
  append_loader(c);
  append_ansatz(c, role);
  return c;
}

void append_loader(Circuit& circuit) {
  const auto n = circuit.num_qubits();
  const auto base = circuit.num_data();
  for (std::size_t q = 0; q < n; ++q) {
    circuit.add(Gate{GateKind::H, q});
    circuit.add(Gate{GateKind::RX, q, 0, AngleSource::Data, base + q});
  }
}

void append_ansatz(Circuit& circuit, Role role) {
  const auto n = circuit.num_qubits();
  const auto before = circuit.num_params();
  std::size_t next = before;
  for (GateKind kind : {GateKind::RX, GateKind::RY, GateKind::RZ}) {
    for (std::size_t q = 0; q < n; ++q) circuit.add(Gate{kind, q, 0, AngleSource::Param, next++});
  }
  if (n > 1) {
    for (std::size_t q = 0; q < n; ++q) circuit.add(Gate{GateKind::CNOT, (q + 1) % n, q});
  }
  if (role != Role::Value) circuit.add(Gate{GateKind::RY, 0, 0, AngleSource::Param, next++});
  if (circuit.num_params() - before != param_count(role, n)) {
    throw ValidationError("ansatz parameter budget violated for role " + std::string(to_string(role)));
  }
}

StateVector load_data(std::span<const double> x) {
  if (x.empty()) throw DimensionError("load_data: empty input vector");
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericError("load_data: non-finite input angle");
  }
  Circuit c(x.size());
  append_loader(c);
  return run(c, x, {});
}

void apply_ansatz(StateVector& state, Role role, std::span<const double> theta) {
  const auto n = state.num_qubits();
  if (theta.size() != param_count(role, n)) {
    throw ConfigError(std::string(to_string(role)) + " ansatz on " + std::to_string(n) + " qubits expects " +
                      std::to_string(param_count(role, n)) + " parameters, got " + std::to_string(theta.size()));
  }
  Circuit c(n, role);
  append_ansatz(c, role);
  apply(c, state, {}, theta);
}

void apply(const Circuit& circuit, StateVector& state, std::span<const double> x, std::span<const double> theta) {
  check_inputs(circuit, x, theta);
  if (state.num_qubits() != circuit.num_qubits()) {
    throw DimensionError("circuit on " + std::to_string(circuit.num_qubits()) + " qubits applied to a " +
                         std::to_string(state.num_qubits()) + "-qubit state");
  }
  auto amps = state.amplitudes();
  for (const auto& g : circuit.gates()) apply_gate(amps, g, angle_of(g, x, theta));
}

StateVector run(const Circuit& circuit, std::span<const double> x, std::span<const double> theta) {
  StateVector state(circuit.num_qubits());
  apply(circuit, state, x, theta);
  return state;
}

namespace {

// Runs the circuit with gate `shifted` rotated by an extra `delta`.
std::vector<double> shifted_expectations(const Circuit& c, std::span<const double> x, std::span<const double> theta,
                                         std::size_t shifted, double delta) {
  StateVector state(c.num_qubits());
  auto amps = state.amplitudes();
  auto gates = c.gates();
  for (std::size_t k = 0; k < gates.size(); ++k) {
    double angle = angle_of(gates[k], x, theta);
    if (k == shifted) angle += delta;
    apply_gate(amps, gates[k], angle);
  }
  return expect_z_all(state);
}

}  // namespace

WeightedGradient shift_gradient(const Circuit& circuit, std::span<const double> theta, std::span<const double> x,
                                std::span<const double> weights) {
  check_inputs(circuit, x, theta);
  if (weights.size() != circuit.num_qubits()) {
    throw DimensionError("observable weights must have one entry per qubit");
  }
  WeightedGradient out;
  out.expectations = expect_z_all(run(circuit, x, theta));
  out.gradient.d_theta.assign(circuit.num_params(), 0.0);
  out.gradient.d_x.assign(circuit.num_data(), 0.0);
  auto gates = circuit.gates();
  for (std::size_t k = 0; k < gates.size(); ++k) {
    const auto& g = gates[k];
    if (g.source == AngleSource::None) continue;
    const double plus = dot_weights(shifted_expectations(circuit, x, theta, k, kHalfPi), weights);
    const double minus = dot_weights(shifted_expectations(circuit, x, theta, k, -kHalfPi), weights);
    const double d = 0.5 * (plus - minus);
    (g.source == AngleSource::Param ? out.gradient.d_theta : out.gradient.d_x)[g.index] += d;
  }
  return out;
}

CircuitGradient grad_expectation(const Circuit& circuit, std::span<const double> theta, std::span<const double> x,
                                 std::size_t qubit) {
  if (qubit >= circuit.num_qubits()) {
    throw DimensionError("grad_expectation: qubit " + std::to_string(qubit) + " out of range");
  }
  std::vector<double> weights(circuit.num_qubits(), 0.0);
  weights[qubit] = 1.0;
  return shift_gradient(circuit, theta, x, weights).gradient;
}

WeightedGradient adjoint_gradient(const Circuit& circuit, std::span<const double> theta, std::span<const double> x,
                                  std::span<const double> weights) {
  check_inputs(circuit, x, theta);
  const auto n = circuit.num_qubits();
  if (weights.size() != n) throw DimensionError("observable weights must have one entry per qubit");

  StateVector psi = run(circuit, x, theta);
  WeightedGradient out;
  out.expectations = expect_z_all(psi);
  out.gradient.d_theta.assign(circuit.num_params(), 0.0);
  out.gradient.d_x.assign(circuit.num_data(), 0.0);

  // lambda = O psi with O = sum_j w_j Z_j, diagonal in the computational basis.
  std::vector<Amplitude> lambda(psi.amplitudes().begin(), psi.amplitudes().end());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    double o = 0.0;
    for (std::size_t q = 0; q < n; ++q) o += ((i >> q) & 1U) ? -weights[q] : weights[q];
    lambda[i] *= o;
  }

  auto state = psi.amplitudes();
  std::vector<Amplitude> mu(lambda.size());
  auto gates = circuit.gates();
  for (std::size_t k = gates.size(); k-- > 0;) {
    const auto& g = gates[k];
    const double angle = angle_of(g, x, theta);
    if (g.source != AngleSource::None) {
      std::copy(state.begin(), state.end(), mu.begin());
      apply_generator(mu, g);
      Amplitude overlap{0.0, 0.0};
      for (std::size_t i = 0; i < mu.size(); ++i) {
        // conj(l) * m without the checked complex multiply
        overlap += Amplitude{lambda[i].real() * mu[i].real() + lambda[i].imag() * mu[i].imag(),
                             lambda[i].real() * mu[i].imag() - lambda[i].imag() * mu[i].real()};
      }
      // d/dangle <psi|O|psi> = 2 Re <lambda| (-i/2) G |psi> = Im <lambda|G|psi>
      (g.source == AngleSource::Param ? out.gradient.d_theta : out.gradient.d_x)[g.index] += overlap.imag();
    }
    apply_inverse(state, g, angle);
    apply_inverse(lambda, g, angle);
  }
  return out;
}

nlohmann::json to_json(const StateVector& state) {
  nlohmann::json amps = nlohmann::json::array();
  for (const auto& a : state.amplitudes()) amps.push_back({a.real(), a.imag()});
  return {{"num_qubits", state.num_qubits()}, {"amplitudes", std::move(amps)}};
}

}  // namespace qvit::qsim
