// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file
 * Exact statevector simulation of the small circuits used by the hybrid
 * attention heads.
 *
 * Qubit q is bit q of the basis-state index (little-endian), so |0...0> is
 * index 0 and the state with only qubit 0 flipped is index 1.
 */

#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace qvit::qsim {

using Amplitude = std::complex<double>;

class StateVector {
 public:
  /// |0...0> on `num_qubits` qubits.
  explicit StateVector(std::size_t num_qubits);

  std::size_t num_qubits() const noexcept { return num_qubits_; }
  std::size_t dimension() const noexcept { return amplitudes_.size(); }
  std::span<const Amplitude> amplitudes() const noexcept { return amplitudes_; }
  std::span<Amplitude> amplitudes() noexcept { return amplitudes_; }

  void apply_h(std::size_t qubit);
  void apply_rx(std::size_t qubit, double angle);
  void apply_ry(std::size_t qubit, double angle);
  void apply_rz(std::size_t qubit, double angle);
  void apply_cnot(std::size_t control, std::size_t target);

  double norm() const;

 private:
  void check_qubit(std::size_t qubit) const;
  void apply_1q(std::size_t qubit, Amplitude m00, Amplitude m01, Amplitude m10, Amplitude m11);

  std::size_t num_qubits_;
  std::vector<Amplitude> amplitudes_;
};

/// Pauli-Z expectation on one qubit; in [-1, 1].
double expect_z(const StateVector& state, std::size_t qubit);
/// <Z_j> for every qubit j.
std::vector<double> expect_z_all(const StateVector& state);

enum class GateKind { H, RX, RY, RZ, CNOT };
enum class AngleSource { None, Data, Param };

struct Gate {
  GateKind kind;
  std::size_t target;
  std::size_t control = 0;  // CNOT only
  AngleSource source = AngleSource::None;
  std::size_t index = 0;  // position in the data or parameter vector
};

enum class Role { Key, Query, Value };

std::string_view to_string(Role role);
/// 3*d_h + 1 for key/query ansatze, 3*d_h for the value ansatz.
std::size_t param_count(Role role, std::size_t num_qubits);

class Circuit {
 public:
  explicit Circuit(std::size_t num_qubits, std::optional<Role> role = std::nullopt);

  /// Data loader followed by the role's trainable ansatz.
  static Circuit for_role(Role role, std::size_t num_qubits);

  void add(Gate gate);

  std::size_t num_qubits() const noexcept { return num_qubits_; }
  std::optional<Role> role() const noexcept { return role_; }
  std::span<const Gate> gates() const noexcept { return gates_; }
  std::size_t num_data() const noexcept { return num_data_; }
  std::size_t num_params() const noexcept { return num_params_; }

 private:
  std::size_t num_qubits_;
  std::optional<Role> role_;
  std::vector<Gate> gates_;
  std::size_t num_data_ = 0;
  std::size_t num_params_ = 0;
};

/// Appends H then RX(x_j) on every qubit j; one data angle per qubit.
void append_loader(Circuit& circuit);
/// Appends the trainable ansatz: RX, RY and RZ layers (one angle per qubit
/// each), a CNOT ring q -> (q+1) mod n when n > 1, and for key/query roles a
/// final RY on qubit 0.
void append_ansatz(Circuit& circuit, Role role);

/// (RX(x_j) H)|0> on every qubit.
StateVector load_data(std::span<const double> x);
void apply_ansatz(StateVector& state, Role role, std::span<const double> theta);

/// Applies every gate of `circuit` to `state`, drawing angles from x / theta.
void apply(const Circuit& circuit, StateVector& state, std::span<const double> x, std::span<const double> theta);
StateVector run(const Circuit& circuit, std::span<const double> x, std::span<const double> theta);

struct CircuitGradient {
  std::vector<double> d_theta;
  std::vector<double> d_x;
};

/// d<Z_qubit>/d(theta, x) by the two-term parameter-shift rule on every
/// rotation angle.
CircuitGradient grad_expectation(const Circuit& circuit, std::span<const double> theta, std::span<const double> x,
                                 std::size_t qubit);

struct WeightedGradient {
  std::vector<double> expectations;  // <Z_j> for every qubit
  CircuitGradient gradient;          // of sum_j weights[j] * <Z_j>
};

/// Adjoint-method gradient of sum_j weights[j] <Z_j> with one forward and one
/// reverse sweep, independent of the number of angles.
WeightedGradient adjoint_gradient(const Circuit& circuit, std::span<const double> theta, std::span<const double> x,
                                  std::span<const double> weights);

/// Same quantity via parameter shifts; reference for adjoint_gradient.
WeightedGradient shift_gradient(const Circuit& circuit, std::span<const double> theta, std::span<const double> x,
                                std::span<const double> weights);

/// Debug dump: {"num_qubits": n, "amplitudes": [[re, im], ...]}.
nlohmann::json to_json(const StateVector& state);

}  // namespace qvit::qsim
