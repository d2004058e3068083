#include "qkernel/transpiler.hpp"

#include <numbers>
#include <optional>
#include <vector>

#include "qkernel/errors.hpp"

namespace qk {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2;

// Candidate rewrites for one gate, in preference order. Each is exact up to global phase.
std::vector<std::vector<Gate>> rules(const Gate& g) {
    const int q = g.targets[0];
    const double t = g.angle;
    switch (g.kind) {
        case GateKind::Hadamard:
            return {{Gate::rz(q, kHalfPi), Gate::sx(q), Gate::rz(q, kHalfPi)}};
        case GateKind::Phase:
            return {{Gate::rz(q, t)}};
        case GateKind::RZ:
            return {{Gate::p(q, t)}};
        case GateKind::RX:
            return {{Gate::h(q), Gate::rz(q, t), Gate::h(q)}};
        case GateKind::RY:
            return {{Gate::rz(q, -kHalfPi), Gate::rx(q, t), Gate::rz(q, kHalfPi)}};
        case GateKind::SX:
            return {{Gate::h(q), Gate::rz(q, kHalfPi), Gate::h(q)}};
        case GateKind::X:
            return {{Gate::sx(q), Gate::sx(q)}};
        case GateKind::CZ:
            return {{Gate::h(g.targets[1]), Gate::cx(q, g.targets[1]), Gate::h(g.targets[1])}};
        case GateKind::CX:
            return {{Gate::h(g.targets[1]), Gate::cz(q, g.targets[1]), Gate::h(g.targets[1])}};
    }
    return {};
}

class Rewriter {
public:
    explicit Rewriter(const Isa& isa) : isa_(isa) {}

    bool expand(const Gate& g, std::vector<Gate>& out) {
        if (isa_.count(g.kind)) {
            out.push_back(g);
            return true;
        }
        if (active_.count(g.kind)) return false;  // cycle, e.g. CX -> CZ -> CX
        active_.insert(g.kind);
        bool ok = false;
        for (const auto& seq : rules(g)) {
            std::vector<Gate> attempt;
            ok = true;
            for (const auto& sub : seq) {
                if (!expand(sub, attempt)) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                out.insert(out.end(), attempt.begin(), attempt.end());
                break;
            }
        }
        active_.erase(g.kind);
        return ok;
    }

private:
    const Isa& isa_;
    std::set<GateKind> active_;
};

}  // namespace

Isa default_isa() { return {GateKind::RZ, GateKind::SX, GateKind::X, GateKind::CX}; }

const Gate* first_foreign_gate(const Circuit& circuit, const Isa& isa) {
    for (const auto& g : circuit.gates) {
        if (!isa.count(g.kind)) return &g;
    }
    return nullptr;
}

bool uses_only(const Circuit& circuit, const Isa& isa) { return first_foreign_gate(circuit, isa) == nullptr; }

Circuit transpile(const Circuit& circuit, const Isa& isa) {
    if (isa.empty()) throw UnsupportedIsaError("empty instruction set");
    Circuit out(circuit.num_qubits);
    out.gates.reserve(circuit.gates.size() * 2);
    Rewriter rw(isa);
    for (const auto& g : circuit.gates) {
        if (!rw.expand(g, out.gates)) {
            std::string names;
            for (auto k : isa) {
                if (!names.empty()) names += ", ";
                names += gate_name(k);
            }
            throw UnsupportedIsaError("gate '" + std::string(gate_name(g.kind)) +
                                      "' cannot be expressed in the instruction set {" + names + "}");
        }
    }
    return out;
}

}  // namespace qk
