#include "qkernel/statevector.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>

#include "qkernel/errors.hpp"
#include "qkernel/rng.hpp"

namespace qk {

namespace {

using Mat2 = std::array<Complex, 4>;  // row-major

constexpr double kInvSqrt2 = 0.70710678118654752440;

Mat2 single_qubit_matrix(GateKind kind, double angle) {
    const Complex i{0.0, 1.0};
    switch (kind) {
        case GateKind::Hadamard:
            return {kInvSqrt2, kInvSqrt2, kInvSqrt2, -kInvSqrt2};
        case GateKind::Phase:
            return {1.0, 0.0, 0.0, std::exp(i * angle)};
        case GateKind::RZ:
            return {std::exp(-i * (angle / 2)), 0.0, 0.0, std::exp(i * (angle / 2))};
        case GateKind::RX: {
            const double c = std::cos(angle / 2), s = std::sin(angle / 2);
            return {c, -i * s, -i * s, c};
        }
        case GateKind::RY: {
            const double c = std::cos(angle / 2), s = std::sin(angle / 2);
            return {c, -s, s, c};
        }
        case GateKind::X:
            return {0.0, 1.0, 1.0, 0.0};
        case GateKind::SX:
            return {Complex{0.5, 0.5}, Complex{0.5, -0.5}, Complex{0.5, -0.5}, Complex{0.5, 0.5}};
        default:
            throw ConfigurationError("not a single-qubit gate: " + std::string(gate_name(kind)));
    }
}

void validate(const Gate& gate, int num_qubits) {
    if (static_cast<int>(gate.targets.size()) != gate_arity(gate.kind)) {
        throw ConfigurationError("gate '" + std::string(gate_name(gate.kind)) + "' expects " +
                                 std::to_string(gate_arity(gate.kind)) + " targets, got " +
                                 std::to_string(gate.targets.size()));
    }
    for (std::size_t a = 0; a < gate.targets.size(); ++a) {
        const int q = gate.targets[a];
        if (q < 0 || q >= num_qubits) {
            throw ConfigurationError("qubit index " + std::to_string(q) + " out of range for " +
                                     std::to_string(num_qubits) + " qubits");
        }
        for (std::size_t b = 0; b < a; ++b) {
            if (gate.targets[b] == q) {
                throw ConfigurationError("duplicate target qubit " + std::to_string(q));
            }
        }
    }
}

bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

std::string_view gate_name(GateKind kind) {
    switch (kind) {
        case GateKind::Hadamard: return "h";
        case GateKind::Phase: return "p";
        case GateKind::RZ: return "rz";
        case GateKind::RX: return "rx";
        case GateKind::RY: return "ry";
        case GateKind::CX: return "cx";
        case GateKind::CZ: return "cz";
        case GateKind::X: return "x";
        case GateKind::SX: return "sx";
    }
    return "?";
}

GateKind gate_kind_from_name(std::string_view name) {
    for (auto k : {GateKind::Hadamard, GateKind::Phase, GateKind::RZ, GateKind::RX, GateKind::RY,
                   GateKind::CX, GateKind::CZ, GateKind::X, GateKind::SX}) {
        if (gate_name(k) == name) return k;
    }
    throw FormatError("unknown gate kind '" + std::string(name) + "'");
}

int gate_arity(GateKind kind) {
    return (kind == GateKind::CX || kind == GateKind::CZ) ? 2 : 1;
}

bool gate_is_parameterized(GateKind kind) {
    return kind == GateKind::Phase || kind == GateKind::RZ || kind == GateKind::RX ||
           kind == GateKind::RY;
}

Eigen::MatrixXcd gate_matrix(const Gate& gate) {
    if (gate.kind == GateKind::CX) {
        // control = local bit 0, target = local bit 1
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(4, 4);
        m(0, 0) = 1.0;
        m(2, 2) = 1.0;
        m(3, 1) = 1.0;
        m(1, 3) = 1.0;
        return m;
    }
    if (gate.kind == GateKind::CZ) {
        Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(4, 4);
        m(3, 3) = -1.0;
        return m;
    }
    const Mat2 u = single_qubit_matrix(gate.kind, gate.angle);
    Eigen::MatrixXcd m(2, 2);
    m << u[0], u[1], u[2], u[3];
    return m;
}

Circuit& Circuit::append(const Circuit& other) {
    if (other.num_qubits != num_qubits) {
        throw ConfigurationError("cannot append a " + std::to_string(other.num_qubits) +
                                 "-qubit circuit to a " + std::to_string(num_qubits) +
                                 "-qubit circuit");
    }
    gates.insert(gates.end(), other.gates.begin(), other.gates.end());
    return *this;
}

std::size_t Circuit::two_qubit_count() const noexcept {
    std::size_t n = 0;
    for (const auto& g : gates) n += gate_arity(g.kind) == 2 ? 1 : 0;
    return n;
}

Circuit adjoint(const Circuit& circuit) {
    Circuit out(circuit.num_qubits);
    out.gates.reserve(circuit.gates.size() + 4);
    for (auto it = circuit.gates.rbegin(); it != circuit.gates.rend(); ++it) {
        Gate g = *it;
        if (g.kind == GateKind::SX) {
            // SX^dagger = SX^3 = X * SX
            out.add(Gate::x(g.targets[0]));
            out.add(Gate::sx(g.targets[0]));
            continue;
        }
        if (gate_is_parameterized(g.kind)) g.angle = -g.angle;
        out.add(std::move(g));
    }
    return out;
}

Statevector::Statevector(int num_qubits) : num_qubits_(num_qubits) {
    if (num_qubits <= 0 || num_qubits > 30) {
        throw ConfigurationError("statevector needs 1..30 qubits, got " +
                                 std::to_string(num_qubits));
    }
    amplitudes_.assign(std::size_t{1} << num_qubits, Complex{0.0, 0.0});
    amplitudes_[0] = 1.0;
}

Statevector::Statevector(std::vector<Complex> amplitudes) : amplitudes_(std::move(amplitudes)) {
    if (!is_power_of_two(amplitudes_.size()) || amplitudes_.size() < 2) {
        throw ConfigurationError("amplitude count must be a power of two >= 2");
    }
    num_qubits_ = std::countr_zero(amplitudes_.size());
}

Statevector Statevector::basis(int num_qubits, std::uint64_t index) {
    Statevector s(num_qubits);
    if (index >= s.dimension()) throw ConfigurationError("basis index out of range");
    s.amplitudes_[0] = 0.0;
    s.amplitudes_[index] = 1.0;
    return s;
}

double Statevector::norm() const {
    double acc = 0.0;
    for (const auto& a : amplitudes_) acc += std::norm(a);
    return std::sqrt(acc);
}

void Statevector::apply(const Gate& gate) {
    validate(gate, num_qubits_);
    const std::size_t dim = amplitudes_.size();
    switch (gate.kind) {
        case GateKind::CX: {
            const std::size_t cmask = std::size_t{1} << gate.targets[0];
            const std::size_t tmask = std::size_t{1} << gate.targets[1];
            for (std::size_t i = 0; i < dim; ++i) {
                if ((i & cmask) && !(i & tmask)) std::swap(amplitudes_[i], amplitudes_[i | tmask]);
            }
            return;
        }
        case GateKind::CZ: {
            const std::size_t mask =
                (std::size_t{1} << gate.targets[0]) | (std::size_t{1} << gate.targets[1]);
            for (std::size_t i = 0; i < dim; ++i) {
                if ((i & mask) == mask) amplitudes_[i] = -amplitudes_[i];
            }
            return;
        }
        default:
            break;
    }
    const Mat2 m = single_qubit_matrix(gate.kind, gate.angle);
    const std::size_t mask = std::size_t{1} << gate.targets[0];
    for (std::size_t i = 0; i < dim; ++i) {
        if (i & mask) continue;
        const Complex a0 = amplitudes_[i];
        const Complex a1 = amplitudes_[i | mask];
        amplitudes_[i] = m[0] * a0 + m[1] * a1;
        amplitudes_[i | mask] = m[2] * a0 + m[3] * a1;
    }
}

Statevector apply_circuit(Statevector state, const Circuit& circuit) {
    if (circuit.num_qubits != state.num_qubits()) {
        throw ConfigurationError("circuit has " + std::to_string(circuit.num_qubits) +
                                 " qubits but state has " + std::to_string(state.num_qubits()));
    }
    for (const auto& g : circuit.gates) state.apply(g);
    return state;
}

Complex inner_product(const Statevector& a, const Statevector& b) {
    if (a.num_qubits() != b.num_qubits()) {
        throw ConfigurationError("inner product of states with different qubit counts");
    }
    Complex acc{0.0, 0.0};
    const auto& x = a.amplitudes();
    const auto& y = b.amplitudes();
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::conj(x[i]) * y[i];
    return acc;
}

double probability_all_zeros(const Statevector& state) { return std::norm(state[0]); }

std::uint64_t count_all_zeros(const Statevector& state, std::uint64_t shots, std::uint64_t seed) {
    if (shots == 0) throw ArgumentError("shots must be at least 1");
    const double p = std::clamp(probability_all_zeros(state), 0.0, 1.0);
    Rng rng(seed);
    std::uint64_t zeros = 0;
    for (std::uint64_t s = 0; s < shots; ++s) zeros += uniform01(rng) < p ? 1 : 0;
    return zeros;
}

double sample_all_zeros(const Statevector& state, std::uint64_t shots, std::uint64_t seed) {
    return static_cast<double>(count_all_zeros(state, shots, seed)) / static_cast<double>(shots);
}

Eigen::MatrixXcd circuit_unitary(const Circuit& circuit) {
    const int n = circuit.num_qubits;
    if (n <= 0) throw ConfigurationError("circuit has no qubits");
    if (n > kMaxUnitaryQubits) {
        throw ResourceError("circuit_unitary limited to " + std::to_string(kMaxUnitaryQubits) +
                            " qubits, circuit has " + std::to_string(n));
    }
    const Eigen::Index dim = Eigen::Index{1} << n;
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(dim, dim);
    Eigen::MatrixXcd next(dim, dim);
    for (const auto& g : circuit.gates) {
        validate(g, n);
        const Eigen::MatrixXcd local = gate_matrix(g);
        const int k = static_cast<int>(g.targets.size());
        const Eigen::Index local_dim = Eigen::Index{1} << k;
        std::size_t target_mask = 0;
        for (int t : g.targets) target_mask |= std::size_t{1} << t;
        // (G U)[r, :] = sum_lc local[lr, lc] * U[r with target bits set to lc, :]
        for (Eigen::Index r = 0; r < dim; ++r) {
            const auto ur = static_cast<std::size_t>(r);
            Eigen::Index lr = 0;
            for (int a = 0; a < k; ++a) lr |= static_cast<Eigen::Index>((ur >> g.targets[a]) & 1U) << a;
            next.row(r).setZero();
            for (Eigen::Index lc = 0; lc < local_dim; ++lc) {
                const Complex coeff = local(lr, lc);
                if (coeff == Complex{0.0, 0.0}) continue;
                std::size_t src = ur & ~target_mask;
                for (int a = 0; a < k; ++a) src |= ((static_cast<std::size_t>(lc) >> a) & 1U) << g.targets[a];
                next.row(r) += coeff * u.row(static_cast<Eigen::Index>(src));
            }
        }
        u.swap(next);
    }
    return u;
}

}  // namespace qk
