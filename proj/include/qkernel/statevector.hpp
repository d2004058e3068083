#pragma once

// Dense statevector simulation for the small circuits used by fidelity kernels.
//
// Qubit ordering is little-endian: qubit 0 is the least significant bit of an amplitude
// index, so |q2 q1 q0> lives at index q0 + 2*q1 + 4*q2.
// Rotations follow R_P(theta) = exp(-i theta P / 2).

#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qk {

using Complex = std::complex<double>;

enum class GateKind {
    Hadamard,
    Phase,  // diag(1, e^{i theta})
    RZ,
    RX,
    RY,
    CX,  // targets = {control, target}
    CZ,
    X,
    SX,
};

/// Canonical short name ("h", "p", "rz", ...). Used in JSON and diagnostics.
std::string_view gate_name(GateKind kind);
GateKind gate_kind_from_name(std::string_view name);
int gate_arity(GateKind kind);
bool gate_is_parameterized(GateKind kind);

struct Gate {
    GateKind kind;
    std::vector<int> targets;
    double angle = 0.0;

    bool operator==(const Gate&) const = default;

    static Gate h(int q) { return {GateKind::Hadamard, {q}}; }
    static Gate p(int q, double a) { return {GateKind::Phase, {q}, a}; }
    static Gate rz(int q, double a) { return {GateKind::RZ, {q}, a}; }
    static Gate rx(int q, double a) { return {GateKind::RX, {q}, a}; }
    static Gate ry(int q, double a) { return {GateKind::RY, {q}, a}; }
    static Gate cx(int c, int t) { return {GateKind::CX, {c, t}}; }
    static Gate cz(int a, int b) { return {GateKind::CZ, {a, b}}; }
    static Gate x(int q) { return {GateKind::X, {q}}; }
    static Gate sx(int q) { return {GateKind::SX, {q}}; }
};

/// The 2x2 or 4x4 matrix of a gate in its own local basis. For two-qubit gates the local
/// index is t0 + 2*t1 (targets[0] least significant).
Eigen::MatrixXcd gate_matrix(const Gate& gate);

struct Circuit {
    int num_qubits = 0;
    std::vector<Gate> gates;

    Circuit() = default;
    explicit Circuit(int n) : num_qubits(n) {}

    Circuit& add(Gate g) {
        gates.push_back(std::move(g));
        return *this;
    }
    /// Appends all gates of `other`, which must act on the same register size.
    Circuit& append(const Circuit& other);
    std::size_t size() const noexcept { return gates.size(); }
    std::size_t two_qubit_count() const noexcept;

    bool operator==(const Circuit&) const = default;
};

/// Reversed gate order with each gate inverted. SX has no self-inverse form in the gate set,
/// so its inverse is emitted as X followed by SX.
Circuit adjoint(const Circuit& circuit);

class Statevector {
public:
    /// |0...0> on n qubits.
    explicit Statevector(int num_qubits);
    /// Takes ownership of amplitudes; size must be a power of two.
    explicit Statevector(std::vector<Complex> amplitudes);

    static Statevector basis(int num_qubits, std::uint64_t index);

    int num_qubits() const noexcept { return num_qubits_; }
    std::size_t dimension() const noexcept { return amplitudes_.size(); }
    const std::vector<Complex>& amplitudes() const noexcept { return amplitudes_; }
    const Complex& operator[](std::size_t i) const { return amplitudes_[i]; }
    double norm() const;

    /// In-place gate application. Used by apply_circuit on its private copy.
    void apply(const Gate& gate);

private:
    int num_qubits_;
    std::vector<Complex> amplitudes_;
};

Statevector apply_circuit(Statevector state, const Circuit& circuit);

/// <a|b>, conjugate-linear in `a`.
Complex inner_product(const Statevector& a, const Statevector& b);

double probability_all_zeros(const Statevector& state);

/// Fraction of `shots` terminal measurements that read all zeros. Each shot is an independent
/// Bernoulli trial with success probability |amp_0|^2 driven by a generator seeded with `seed`.
double sample_all_zeros(const Statevector& state, std::uint64_t shots, std::uint64_t seed);
/// Same as sample_all_zeros but returns the raw count.
std::uint64_t count_all_zeros(const Statevector& state, std::uint64_t shots, std::uint64_t seed);

inline constexpr int kMaxUnitaryQubits = 10;

/// Dense 2^n x 2^n unitary of a circuit, built by multiplying embedded gate matrices.
Eigen::MatrixXcd circuit_unitary(const Circuit& circuit);

}  // namespace qk
