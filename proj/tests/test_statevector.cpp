#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "qkernel/errors.hpp"
#include "qkernel/statevector.hpp"

using namespace qk;

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

Statevector bell() {
    Circuit c(2);
    c.add(Gate::h(0)).add(Gate::cx(0, 1));
    return apply_circuit(Statevector(2), c);
}

double max_diff(const Statevector& a, const Statevector& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.dimension(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

TEST_CASE("hadamard on |0>") {
    Circuit c(1);
    c.add(Gate::h(0));
    const auto s = apply_circuit(Statevector(1), c);
    CHECK(std::abs(s[0] - Complex(kInvSqrt2, 0)) < 1e-15);
    CHECK(std::abs(s[1] - Complex(kInvSqrt2, 0)) < 1e-15);
}

TEST_CASE("bell state") {
    const auto s = bell();
    CHECK(std::abs(s[0] - kInvSqrt2) < 1e-15);
    CHECK(std::abs(s[1]) < 1e-15);
    CHECK(std::abs(s[2]) < 1e-15);
    CHECK(std::abs(s[3] - kInvSqrt2) < 1e-15);
}

TEST_CASE("random 3-qubit circuit matches Kronecker-built unitary") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = oracle::random_circuit(3, 20, rng);
        const auto s = apply_circuit(Statevector(3), c);
        const Eigen::VectorXcd expected = oracle::unitary(c).col(0);
        CHECK((oracle::to_vector(s) - expected).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("gate matrices are unitary") {
    for (auto k : {GateKind::Hadamard, GateKind::Phase, GateKind::RZ, GateKind::RX, GateKind::RY,
                   GateKind::CX, GateKind::CZ, GateKind::X, GateKind::SX}) {
        Gate g{k, gate_arity(k) == 2 ? std::vector<int>{0, 1} : std::vector<int>{0}, 0.913};
        const auto u = gate_matrix(g);
        const auto id = Eigen::MatrixXcd::Identity(u.rows(), u.cols());
        CHECK((u.adjoint() * u - id).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("gate names round trip") {
    for (auto k : {GateKind::Hadamard, GateKind::Phase, GateKind::RZ, GateKind::RX, GateKind::RY,
                   GateKind::CX, GateKind::CZ, GateKind::X, GateKind::SX}) {
        CHECK(gate_kind_from_name(gate_name(k)) == k);
    }
    CHECK_THROWS_AS(gate_kind_from_name("toffoli"), FormatError);
}

TEST_CASE("apply_circuit errors") {
    Circuit c(3);
    c.add(Gate::h(0));
    CHECK_THROWS_AS(apply_circuit(Statevector(2), c), ConfigurationError);

    Circuit bad(2);
    bad.add(Gate::h(2));
    CHECK_THROWS_AS(apply_circuit(Statevector(2), bad), ConfigurationError);

    Circuit dup(2);
    dup.add(Gate::cx(1, 1));
    CHECK_THROWS_AS(apply_circuit(Statevector(2), dup), ConfigurationError);

    Circuit arity(2);
    arity.add(Gate{GateKind::CX, {0}});
    CHECK_THROWS_AS(apply_circuit(Statevector(2), arity), ConfigurationError);
}

TEST_CASE("inner product") {
    std::mt19937_64 rng(3);
    const auto s = oracle::random_state(3, rng);
    CHECK(std::abs(inner_product(s, s) - 1.0) < 1e-10);
    CHECK(std::abs(inner_product(Statevector::basis(1, 0), Statevector::basis(1, 1))) == 0.0);

    Circuit h(1);
    h.add(Gate::h(0));
    CHECK(std::abs(inner_product(apply_circuit(Statevector(1), h), Statevector(1)) - kInvSqrt2) < 1e-15);

    // conjugate-linear in the first argument
    const auto t = oracle::random_state(3, rng);
    std::vector<Complex> scaled(s.amplitudes());
    const Complex c{0.3, -0.8};
    for (auto& a : scaled) a *= c;
    const Complex lhs = inner_product(Statevector(scaled), t);
    CHECK(std::abs(lhs - std::conj(c) * inner_product(s, t)) < 1e-12);
    CHECK(std::abs(inner_product(s, t)) <= 1.0 + 1e-10);

    CHECK_THROWS_AS(inner_product(Statevector(1), Statevector(2)), ConfigurationError);
}

TEST_CASE("probability of all zeros") {
    CHECK(probability_all_zeros(Statevector(4)) == 1.0);
    Circuit hh(2);
    hh.add(Gate::h(0)).add(Gate::h(1));
    CHECK(std::abs(probability_all_zeros(apply_circuit(Statevector(2), hh)) - 0.25) < 1e-15);
    CHECK(std::abs(probability_all_zeros(bell()) - 0.5) < 1e-15);
}

TEST_CASE("sampling the all-zeros outcome") {
    CHECK(sample_all_zeros(Statevector(3), 1000, 1) == 1.0);
    CHECK(sample_all_zeros(Statevector::basis(3, 5), 1000, 1) == 0.0);

    const double est = sample_all_zeros(bell(), 100000, 2024);
    CHECK(std::abs(est - 0.5) <= 3.0 * std::sqrt(0.25 / 100000));

    CHECK(sample_all_zeros(bell(), 4321, 99) == sample_all_zeros(bell(), 4321, 99));
    CHECK(count_all_zeros(bell(), 4321, 99) == count_all_zeros(bell(), 4321, 99));
    CHECK_THROWS_AS(sample_all_zeros(bell(), 0, 1), ArgumentError);
}

TEST_CASE("sample estimate converges to the exact probability") {
    std::mt19937_64 rng(11);
    int inside = 0;
    const int trials = 40;
    for (int t = 0; t < trials; ++t) {
        const auto s = apply_circuit(Statevector(2), oracle::random_circuit(2, 8, rng));
        const double p = probability_all_zeros(s);
        const double est = sample_all_zeros(s, 50000, static_cast<std::uint64_t>(t));
        if (std::abs(est - p) <= 3.0 * std::sqrt(p * (1 - p) / 50000) + 1e-9) ++inside;
    }
    CHECK(inside >= 37);
}

TEST_CASE("circuit_unitary") {
    CHECK((circuit_unitary(Circuit(3)) - Eigen::MatrixXcd::Identity(8, 8)).norm() == 0.0);

    Circuit h(1);
    h.add(Gate::h(0));
    const auto u = circuit_unitary(h);
    CHECK(std::abs(u(0, 0) - kInvSqrt2) < 1e-15);
    CHECK(std::abs(u(0, 1) - kInvSqrt2) < 1e-15);
    CHECK(std::abs(u(1, 0) - kInvSqrt2) < 1e-15);
    CHECK(std::abs(u(1, 1) + kInvSqrt2) < 1e-15);

    Circuit cc(2);
    cc.add(Gate::cx(0, 1)).add(Gate::cx(0, 1));
    CHECK((circuit_unitary(cc) - Eigen::MatrixXcd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);

    CHECK_THROWS_AS(circuit_unitary(Circuit(11)), ResourceError);

    std::mt19937_64 rng(5);
    const auto c = oracle::random_circuit(4, 30, rng);
    const auto cu = circuit_unitary(c);
    CHECK((cu - oracle::unitary(c)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((cu.adjoint() * cu - Eigen::MatrixXcd::Identity(16, 16)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("property: norm preservation over random circuits") {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> nq(1, 6), ng(0, 50);
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
        const int n = nq(rng);
        const auto c = oracle::random_circuit(n, ng(rng), rng);
        worst = std::max(worst, std::abs(apply_circuit(oracle::random_state(n, rng), c).norm() - 1.0));
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("property: adjoint round trip") {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> nq(1, 6), ng(0, 50);
    for (int t = 0; t < 300; ++t) {
        const int n = nq(rng);
        const auto c = oracle::random_circuit(n, ng(rng), rng);
        const auto s = oracle::random_state(n, rng);
        CHECK(max_diff(apply_circuit(apply_circuit(s, c), adjoint(c)), s) < 1e-10);
    }
}

TEST_CASE("property: simulator agrees with circuit_unitary") {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<int> nq(1, 6), ng(0, 40);
    for (int t = 0; t < 100; ++t) {
        const int n = nq(rng);
        const auto c = oracle::random_circuit(n, ng(rng), rng);
        const auto s = oracle::random_state(n, rng);
        const Eigen::VectorXcd expected = circuit_unitary(c) * oracle::to_vector(s);
        CHECK((oracle::to_vector(apply_circuit(s, c)) - expected).cwiseAbs().maxCoeff() < 1e-10);
    }
}
