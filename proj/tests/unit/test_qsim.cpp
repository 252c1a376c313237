// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "gen.hpp"
#include "oracles.hpp"
#include "qvit/errors.hpp"
#include "qvit/qsim.hpp"

using namespace qvit;
using namespace qvit::qsim;
using qvit::testing::Gen;

namespace {

constexpr Role kRoles[] = {Role::Key, Role::Query, Role::Value};

double max_diff(std::span<const Amplitude> a, std::span<const oracle::C> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST_CASE("fresh register is |0...0>") {
  StateVector s(3);
  CHECK(s.dimension() == 8);
  CHECK(s.amplitudes()[0] == Amplitude(1.0, 0.0));
  CHECK(s.norm() == 1.0);
  CHECK_THROWS_AS(StateVector(0), DimensionError);
  CHECK_THROWS_AS(StateVector(25), DimensionError);
}

TEST_CASE("qubit q is bit q of the basis index") {
  StateVector s(3);
  s.apply_rx(1, std::numbers::pi);  // flips qubit 1 up to phase
  CHECK(std::norm(s.amplitudes()[2]) == doctest::Approx(1.0));
  CHECK(expect_z(s, 1) == doctest::Approx(-1.0));
  CHECK(expect_z(s, 0) == doctest::Approx(1.0));
}

TEST_CASE("random gate sequences agree with dense matrix products") {
  Gen g(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + g.index(4);
    StateVector s(n);
    auto u = oracle::Dense::identity(std::size_t{1} << n);
    for (int k = 0; k < 12; ++k) {
      const auto q = g.index(n);
      const double a = g.angle();
      switch (g.index(n > 1 ? 5 : 4)) {
        case 0:
          s.apply_h(q);
          u = oracle::product(oracle::embed(oracle::hadamard(), q, n), u);
          break;
        case 1:
          s.apply_rx(q, a);
          u = oracle::product(oracle::embed(oracle::rx(a), q, n), u);
          break;
        case 2:
          s.apply_ry(q, a);
          u = oracle::product(oracle::embed(oracle::ry(a), q, n), u);
          break;
        case 3:
          s.apply_rz(q, a);
          u = oracle::product(oracle::embed(oracle::rz(a), q, n), u);
          break;
        default: {
          const auto t = (q + 1 + g.index(n - 1)) % n;
          s.apply_cnot(q, t);
          u = oracle::product(oracle::cnot(q, t, n), u);
        }
      }
    }
    std::vector<oracle::C> zero(u.dim, 0.0);
    zero[0] = 1.0;
    CHECK(max_diff(s.amplitudes(), oracle::apply(u, zero)) <= 1e-12);
    CHECK(std::abs(s.norm() - 1.0) <= 1e-12);
  }
}

TEST_CASE("role circuits agree with the dense oracle") {
  Gen g(12);
  for (std::size_t n = 1; n <= 4; ++n) {
    for (auto role : kRoles) {
      const auto circuit = Circuit::for_role(role, n);
      CHECK(circuit.num_params() == param_count(role, n));
      CHECK(circuit.num_data() == n);
      for (int trial = 0; trial < 20; ++trial) {
        const auto x = g.angles(n), theta = g.angles(param_count(role, n));
        const auto s = run(circuit, x, theta);
        const auto ref = oracle::role_state(role, x, theta);
        CHECK(max_diff(s.amplitudes(), ref) <= 1e-10);
        for (std::size_t q = 0; q < n; ++q) {
          const double z = expect_z(s, q);
          CHECK(z >= -1.0);
          CHECK(z <= 1.0);
          CHECK(std::abs(z - oracle::expect_z(ref, q)) <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("parameter budgets per role") {
  CHECK(param_count(Role::Key, 4) == 13);
  CHECK(param_count(Role::Query, 4) == 13);
  CHECK(param_count(Role::Value, 4) == 12);
  CHECK(param_count(Role::Key, 4) + param_count(Role::Query, 4) + param_count(Role::Value, 4) == 9 * 4 + 2);
}

TEST_CASE("loader output differs from |+...+> only by a global phase") {
  Gen g(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + g.index(4);
    const auto x = g.uniform_vector(n, -5, 5);
    const auto s = load_data(x);
    double total = 0.0;
    for (double v : x) total += v;
    const Amplitude phase = std::polar(1.0, -total / 2.0) / std::sqrt(static_cast<double>(s.dimension()));
    for (const auto& a : s.amplitudes()) CHECK(std::abs(a - phase) <= 1e-12);
  }
}

TEST_CASE("circuit expectations do not depend on the data angles") {
  Gen g(14);
  for (auto role : kRoles) {
    const auto circuit = Circuit::for_role(role, 3);
    const auto theta = g.angles(param_count(role, 3));
    const auto a = expect_z_all(run(circuit, g.angles(3), theta));
    const auto b = expect_z_all(run(circuit, g.angles(3), theta));
    for (std::size_t q = 0; q < 3; ++q) CHECK(std::abs(a[q] - b[q]) <= 1e-12);
  }
}

TEST_CASE("apply_ansatz matches the composed circuit") {
  Gen g(15);
  const auto x = g.angles(3), theta = g.angles(param_count(Role::Key, 3));
  auto s = load_data(x);
  apply_ansatz(s, Role::Key, theta);
  const auto ref = run(Circuit::for_role(Role::Key, 3), x, theta);
  for (std::size_t i = 0; i < s.dimension(); ++i) CHECK(std::abs(s.amplitudes()[i] - ref.amplitudes()[i]) <= 1e-12);
}

TEST_CASE("parameter shift matches central differences") {
  Gen g(16);
  for (auto role : kRoles) {
    const auto circuit = Circuit::for_role(role, 4);
    const auto x = g.angles(4), theta = g.angles(param_count(role, 4));
    for (std::size_t q = 0; q < 4; ++q) {
      const auto grad = grad_expectation(circuit, theta, x, q);
      auto f = [&](std::span<const double> t) { return expect_z(run(circuit, x, t), q); };
      for (std::size_t p = 0; p < theta.size(); ++p) {
        const double fd = oracle::central_difference(f, theta, p, 1e-5);
        CHECK(std::abs(grad.d_theta[p] - fd) <= 1e-7);
      }
    }
  }
}

TEST_CASE("adjoint and shift gradients agree for weighted observables") {
  Gen g(17);
  for (std::size_t n = 1; n <= 4; ++n) {
    for (auto role : kRoles) {
      const auto circuit = Circuit::for_role(role, n);
      const auto x = g.angles(n), theta = g.angles(param_count(role, n)), w = g.uniform_vector(n, -1, 1);
      const auto adj = adjoint_gradient(circuit, theta, x, w);
      const auto sh = shift_gradient(circuit, theta, x, w);
      for (std::size_t p = 0; p < theta.size(); ++p) CHECK(std::abs(adj.gradient.d_theta[p] - sh.gradient.d_theta[p]) <= 1e-12);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(std::abs(adj.gradient.d_x[j] - sh.gradient.d_x[j]) <= 1e-12);
        CHECK(std::abs(adj.gradient.d_x[j]) <= 1e-12);
        CHECK(adj.expectations[j] == doctest::Approx(sh.expectations[j]));
      }
    }
  }
}

TEST_CASE("value circuit is blind to its RZ layer") {
  Gen g(18);
  const auto circuit = Circuit::for_role(Role::Value, 3);
  const auto x = g.angles(3), theta = g.angles(9);
  const std::vector<double> w = {0.3, -0.5, 0.9};
  const auto grad = adjoint_gradient(circuit, theta, x, w);
  for (std::size_t p = 6; p < 9; ++p) CHECK(std::abs(grad.gradient.d_theta[p]) <= 1e-12);
}

TEST_CASE("circuit construction errors") {
  Circuit c(2);
  CHECK_THROWS_AS(c.add(Gate{GateKind::H, 2}), DimensionError);
  CHECK_THROWS_AS(c.add(Gate{GateKind::CNOT, 1, 1}), DimensionError);
  CHECK_THROWS_AS(c.add(Gate{GateKind::H, 0, 0, AngleSource::Param, 0}), ValidationError);
  CHECK_THROWS_AS(c.add(Gate{GateKind::RX, 0}), ValidationError);
  StateVector s(2);
  CHECK_THROWS_AS(s.apply_cnot(0, 0), DimensionError);
  CHECK_THROWS_AS(s.apply_h(5), DimensionError);
}

TEST_CASE("wrong parameter count names the role") {
  const auto circuit = Circuit::for_role(Role::Query, 2);
  const std::vector<double> x = {0.1, 0.2}, theta(3, 0.0);
  try {
    run(circuit, x, theta);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("query") != std::string::npos);
  }
  StateVector s(2);
  CHECK_THROWS_AS(apply_ansatz(s, Role::Value, theta), ConfigError);
}

TEST_CASE("non-finite data is rejected") {
  const std::vector<double> x = {0.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(load_data(x), NumericError);
  CHECK_THROWS_AS(grad_expectation(Circuit::for_role(Role::Key, 1), std::vector<double>(4, 0.0),
                                   std::vector<double>{0.0}, 3),
                  DimensionError);
}

TEST_CASE("state serializes to json") {
  StateVector s(2);
  s.apply_h(0);
  const auto j = to_json(s);
  CHECK(j["num_qubits"] == 2);
  CHECK(j["amplitudes"].size() == 4);
  CHECK(j["amplitudes"][1][0].get<double>() == doctest::Approx(std::sqrt(0.5)));
}
