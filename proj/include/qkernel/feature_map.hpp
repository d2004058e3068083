#pragma once

// Pauli-family feature maps.
//
// Each repetition applies a Hadamard on every qubit followed by, for every term (P, S),
// the evolution exp(i * angle_scale * phi_S(x) * P_S). Terms are ordered with all
// weight-1 strings first (ascending qubit), then heavier strings with their index sets in
// lexicographic order. With angle_scale = 1 the evolution angle is phi_S(x) exactly; a
// Z rotation therefore receives -2 * phi_S(x) under the exp(-i theta Z / 2) gate convention.
// Set angle_scale = 2 to mirror the common library normalisation.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qkernel/statevector.hpp"

namespace qk {

/// Pauli labels over {I, X, Y, Z}; label k acts on the k-th qubit of the index set.
using PauliString = std::string;

enum class Entanglement { Full, Linear, Explicit };

enum class DataMapKind { ProductDefault, SineZZphi, Custom };

struct DataMap {
    DataMapKind kind = DataMapKind::ProductDefault;
    std::string custom_name;  // only for Custom

    bool operator==(const DataMap&) const = default;
};

using DataMapFunction = std::function<double(std::span<const int>, std::span<const double>)>;

/// Registers a named data map for DataMapKind::Custom. Replaces an existing entry.
void register_data_map(const std::string& name, DataMapFunction fn);
bool has_data_map(const std::string& name);

struct FeatureMapSpec {
    int num_qubits = 1;
    int reps = 2;
    std::vector<PauliString> paulis{"Z", "ZZ"};
    Entanglement entanglement = Entanglement::Full;
    std::vector<std::vector<int>> explicit_sets;  // only for Explicit
    DataMap data_map;
    double angle_scale = 1.0;

    bool operator==(const FeatureMapSpec&) const = default;

    static FeatureMapSpec z_map(int n, int reps = 2);
    static FeatureMapSpec zz_map(int n, int reps = 2);
    /// Non-diagonal member of the family: Y rotations plus ZZ couplings.
    static FeatureMapSpec pauli_map(int n, int reps = 2);
    /// ZZ map with phi_{ij}(x) = sin(pi - x_i) sin(pi - x_j).
    static FeatureMapSpec zzphi_map(int n, int reps = 2);
    /// Looks up "z", "zz", "pauli" or "zzphi".
    static FeatureMapSpec preset(const std::string& name, int n, int reps = 2);
};

struct PauliTerm {
    PauliString pauli;
    std::vector<int> qubits;
};

/// Validates `spec` and returns the ordered term list of one repetition.
std::vector<PauliTerm> feature_map_terms(const FeatureMapSpec& spec);

/// phi_S(x).
double data_map_value(const DataMap& map, std::span<const int> indices, std::span<const double> x);

/// Gates implementing exp(i * angle * P_{targets}).
std::vector<Gate> pauli_evolution_block(const PauliString& pauli, double angle,
                                        std::span<const int> targets);

Circuit build_feature_map(const FeatureMapSpec& spec, std::span<const double> x);

/// Gate count of build_feature_map for any input, from the term structure alone.
std::size_t feature_map_gate_count(const FeatureMapSpec& spec);

void to_json(nlohmann::json& j, const FeatureMapSpec& spec);
void from_json(const nlohmann::json& j, FeatureMapSpec& spec);

/// Stable 64-bit fingerprint of the canonical JSON form, rendered as 16 hex digits.
std::string spec_hash(const nlohmann::json& canonical);
std::string spec_hash(const FeatureMapSpec& spec);

}  // namespace qk
