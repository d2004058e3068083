#pragma once

// Rewrites circuits into a backend instruction set by fixed peephole substitutions.
// Equivalence holds up to a global phase. No layout or routing: all-to-all connectivity is
// assumed.

#include <set>

#include "qkernel/statevector.hpp"

namespace qk {

using Isa = std::set<GateKind>;

/// {RZ, SX, X, CX}.
Isa default_isa();

bool uses_only(const Circuit& circuit, const Isa& isa);
/// First gate outside the ISA, if any.
const Gate* first_foreign_gate(const Circuit& circuit, const Isa& isa);

/// Throws UnsupportedIsaError if some gate kind has no substitution path into `isa`.
Circuit transpile(const Circuit& circuit, const Isa& isa);

}  // namespace qk
