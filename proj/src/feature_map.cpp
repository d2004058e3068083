#include "qkernel/feature_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>

#include "qkernel/errors.hpp"

namespace qk {

namespace {

std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

std::map<std::string, DataMapFunction>& registry() {
    static std::map<std::string, DataMapFunction> r;
    return r;
}

int pauli_weight(const PauliString& p) {
    int w = 0;
    for (char c : p) {
        if (c != 'I') ++w;
    }
    return w;
}

void validate_pauli(const PauliString& p) {
    if (p.empty()) throw ArgumentError("empty Pauli string");
    for (char c : p) {
        if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z') {
            throw ArgumentError("invalid Pauli label '" + std::string(1, c) + "' in " + p);
        }
    }
    if (pauli_weight(p) == 0) throw ArgumentError("Pauli string has no non-identity label: " + p);
}

void combinations(int n, int k, int start, std::vector<int>& cur,
                  std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == k) {
        out.push_back(cur);
        return;
    }
    for (int i = start; i < n; ++i) {
        cur.push_back(i);
        combinations(n, k, i + 1, cur, out);
        cur.pop_back();
    }
}

std::vector<std::vector<int>> index_sets(const FeatureMapSpec& spec, int size) {
    const int n = spec.num_qubits;
    std::vector<std::vector<int>> sets;
    if (size == 1) {
        for (int i = 0; i < n; ++i) sets.push_back({i});
        return sets;
    }
    switch (spec.entanglement) {
        case Entanglement::Full: {
            std::vector<int> cur;
            combinations(n, size, 0, cur, sets);
            break;
        }
        case Entanglement::Linear:
            for (int i = 0; i + size <= n; ++i) {
                std::vector<int> s(size);
                for (int k = 0; k < size; ++k) s[k] = i + k;
                sets.push_back(std::move(s));
            }
            break;
        case Entanglement::Explicit:
            for (const auto& s : spec.explicit_sets) {
                if (static_cast<int>(s.size()) == size) sets.push_back(s);
            }
            std::sort(sets.begin(), sets.end());
            break;
    }
    return sets;
}

}  // namespace

void register_data_map(const std::string& name, DataMapFunction fn) {
    std::lock_guard lock(registry_mutex());
    registry()[name] = std::move(fn);
}

bool has_data_map(const std::string& name) {
    std::lock_guard lock(registry_mutex());
    return registry().count(name) > 0;
}

FeatureMapSpec FeatureMapSpec::z_map(int n, int reps) {
    FeatureMapSpec s;
    s.num_qubits = n;
    s.reps = reps;
    s.paulis = {"Z"};
    return s;
}

FeatureMapSpec FeatureMapSpec::zz_map(int n, int reps) {
    FeatureMapSpec s;
    s.num_qubits = n;
    s.reps = reps;
    s.paulis = {"Z", "ZZ"};
    return s;
}

FeatureMapSpec FeatureMapSpec::pauli_map(int n, int reps) {
    FeatureMapSpec s;
    s.num_qubits = n;
    s.reps = reps;
    s.paulis = {"Y", "ZZ"};
    return s;
}

FeatureMapSpec FeatureMapSpec::zzphi_map(int n, int reps) {
    FeatureMapSpec s = zz_map(n, reps);
    s.data_map.kind = DataMapKind::SineZZphi;
    return s;
}

FeatureMapSpec FeatureMapSpec::preset(const std::string& name, int n, int reps) {
    if (name == "z") return z_map(n, reps);
    if (name == "zz") return zz_map(n, reps);
    if (name == "pauli") return pauli_map(n, reps);
    if (name == "zzphi") return zzphi_map(n, reps);
    throw ArgumentError("unknown feature map '" + name + "' (expected z, zz, pauli or zzphi)");
}

std::vector<PauliTerm> feature_map_terms(const FeatureMapSpec& spec) {
    if (spec.num_qubits < 1) throw ArgumentError("feature map needs at least one qubit");
    if (spec.reps < 1) throw ArgumentError("feature map needs at least one repetition");
    if (spec.paulis.empty()) throw ArgumentError("feature map needs at least one Pauli string");
    if (spec.entanglement == Entanglement::Explicit) {
        for (const auto& s : spec.explicit_sets) {
            if (s.empty()) throw ArgumentError("explicit entanglement contains an empty set");
            for (int q : s) {
                if (q < 0 || q >= spec.num_qubits) {
                    throw ArgumentError("explicit entanglement index " + std::to_string(q) +
                                        " out of range");
                }
            }
            std::vector<int> sorted = s;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
                throw ArgumentError("explicit entanglement set repeats a qubit");
            }
        }
    }
    if (spec.data_map.kind == DataMapKind::Custom && !has_data_map(spec.data_map.custom_name)) {
        throw ArgumentError("unregistered data map '" + spec.data_map.custom_name + "'");
    }

    std::vector<PauliString> ordered = spec.paulis;
    for (const auto& p : ordered) validate_pauli(p);
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        return a.size() < b.size();
    });

    std::vector<PauliTerm> terms;
    for (const auto& p : ordered) {
        const int size = static_cast<int>(p.size());
        if (size > spec.num_qubits) continue;
        if (spec.data_map.kind == DataMapKind::SineZZphi && size > 2) {
            throw UnsupportedError("the sine ZZphi data map is defined for one or two qubits only");
        }
        for (auto& s : index_sets(spec, size)) terms.push_back({p, std::move(s)});
    }
    return terms;
}

double data_map_value(const DataMap& map, std::span<const int> indices,
                      std::span<const double> x) {
    if (indices.empty()) throw ArgumentError("data map needs a non-empty index set");
    for (int i : indices) {
        if (i < 0 || static_cast<std::size_t>(i) >= x.size()) {
            throw ArgumentError("data map index " + std::to_string(i) + " out of range");
        }
    }
    constexpr double pi = std::numbers::pi;
    switch (map.kind) {
        case DataMapKind::ProductDefault: {
            if (indices.size() == 1) return x[indices[0]];
            double v = 1.0;
            for (int i : indices) v *= pi - x[i];
            return v;
        }
        case DataMapKind::SineZZphi:
            if (indices.size() == 1) return x[indices[0]];
            if (indices.size() == 2) {
                // Kept in the written form; equal to sin(x_i) sin(x_j) up to rounding.
                return std::sin(pi - x[indices[0]]) * std::sin(pi - x[indices[1]]);
            }
            throw UnsupportedError("the sine ZZphi data map is defined for |S| <= 2, got |S| = " +
                                   std::to_string(indices.size()));
        case DataMapKind::Custom: {
            DataMapFunction fn;
            {
                std::lock_guard lock(registry_mutex());
                auto it = registry().find(map.custom_name);
                if (it == registry().end()) {
                    throw ArgumentError("unregistered data map '" + map.custom_name + "'");
                }
                fn = it->second;
            }
            return fn(indices, x);
        }
    }
    throw ArgumentError("invalid data map kind");
}

std::vector<Gate> pauli_evolution_block(const PauliString& pauli, double angle,
                                        std::span<const int> targets) {
    validate_pauli(pauli);
    if (targets.size() != pauli.size()) {
        throw ArgumentError("Pauli string " + pauli + " needs " + std::to_string(pauli.size()) +
                            " targets, got " + std::to_string(targets.size()));
    }
    std::vector<int> active;
    std::vector<Gate> pre;
    std::vector<Gate> post;
    for (std::size_t k = 0; k < pauli.size(); ++k) {
        const int q = targets[k];
        switch (pauli[k]) {
            case 'I':
                continue;
            case 'X':
                pre.push_back(Gate::h(q));
                post.push_back(Gate::h(q));
                break;
            case 'Y':
                // RX(-pi/2) Z RX(pi/2) = Y
                pre.push_back(Gate::rx(q, std::numbers::pi / 2));
                post.push_back(Gate::rx(q, -std::numbers::pi / 2));
                break;
            default:
                break;
        }
        active.push_back(q);
    }

    std::vector<Gate> block = pre;
    for (std::size_t k = 0; k + 1 < active.size(); ++k) block.push_back(Gate::cx(active[k], active[k + 1]));
    block.push_back(Gate::rz(active.back(), -2.0 * angle));
    for (std::size_t k = active.size() - 1; k > 0; --k) block.push_back(Gate::cx(active[k - 1], active[k]));
    block.insert(block.end(), post.begin(), post.end());
    return block;
}

Circuit build_feature_map(const FeatureMapSpec& spec, std::span<const double> x) {
    if (static_cast<int>(x.size()) != spec.num_qubits) {
        throw ArgumentError("feature vector has " + std::to_string(x.size()) +
                            " entries, feature map expects " + std::to_string(spec.num_qubits));
    }
    const auto terms = feature_map_terms(spec);
    std::vector<double> angles;
    angles.reserve(terms.size());
    for (const auto& t : terms) angles.push_back(spec.angle_scale * data_map_value(spec.data_map, t.qubits, x));

    Circuit c(spec.num_qubits);
    for (int r = 0; r < spec.reps; ++r) {
        for (int q = 0; q < spec.num_qubits; ++q) c.add(Gate::h(q));
        for (std::size_t t = 0; t < terms.size(); ++t) {
            for (auto& g : pauli_evolution_block(terms[t].pauli, angles[t], terms[t].qubits)) {
                c.add(std::move(g));
            }
        }
    }
    return c;
}

std::size_t feature_map_gate_count(const FeatureMapSpec& spec) {
    std::size_t per_rep = static_cast<std::size_t>(spec.num_qubits);
    for (const auto& t : feature_map_terms(spec)) {
        std::size_t weight = 0, basis = 0;
        for (char c : t.pauli) {
            if (c == 'I') continue;
            ++weight;
            if (c != 'Z') ++basis;
        }
        per_rep += 2 * basis + 2 * (weight - 1) + 1;
    }
    return per_rep * static_cast<std::size_t>(spec.reps);
}

void to_json(nlohmann::json& j, const FeatureMapSpec& spec) {
    j = nlohmann::json::object();
    j["num_qubits"] = spec.num_qubits;
    j["reps"] = spec.reps;
    j["paulis"] = spec.paulis;
    switch (spec.entanglement) {
        case Entanglement::Full: j["entanglement"] = "full"; break;
        case Entanglement::Linear: j["entanglement"] = "linear"; break;
        case Entanglement::Explicit: j["entanglement"] = {{"explicit", spec.explicit_sets}}; break;
    }
    switch (spec.data_map.kind) {
        case DataMapKind::ProductDefault: j["data_map"] = "product"; break;
        case DataMapKind::SineZZphi: j["data_map"] = "sine_zzphi"; break;
        case DataMapKind::Custom: j["data_map"] = {{"custom", spec.data_map.custom_name}}; break;
    }
    j["angle_scale"] = spec.angle_scale;
}

void from_json(const nlohmann::json& j, FeatureMapSpec& spec) {
    try {
        FeatureMapSpec s;
        s.num_qubits = j.at("num_qubits").get<int>();
        s.reps = j.value("reps", 2);
        if (j.contains("paulis")) s.paulis = j.at("paulis").get<std::vector<std::string>>();
        if (j.contains("entanglement")) {
            const auto& e = j.at("entanglement");
            if (e.is_string()) {
                const auto name = e.get<std::string>();
                if (name == "full") s.entanglement = Entanglement::Full;
                else if (name == "linear") s.entanglement = Entanglement::Linear;
                else throw FormatError("unknown entanglement '" + name + "'");
            } else {
                s.entanglement = Entanglement::Explicit;
                s.explicit_sets = e.at("explicit").get<std::vector<std::vector<int>>>();
            }
        }
        if (j.contains("data_map")) {
            const auto& d = j.at("data_map");
            if (d.is_string()) {
                const auto name = d.get<std::string>();
                if (name == "product") s.data_map.kind = DataMapKind::ProductDefault;
                else if (name == "sine_zzphi") s.data_map.kind = DataMapKind::SineZZphi;
                else throw FormatError("unknown data map '" + name + "'");
            } else {
                s.data_map.kind = DataMapKind::Custom;
                s.data_map.custom_name = d.at("custom").get<std::string>();
            }
        }
        s.angle_scale = j.value("angle_scale", 1.0);
        spec = std::move(s);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid feature map JSON: ") + e.what());
    }
}

std::string spec_hash(const nlohmann::json& canonical) {
    // FNV-1a over the sorted-key dump
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string spec_hash(const FeatureMapSpec& spec) {
    nlohmann::json j = spec;
    return spec_hash(j);
}

}  // namespace qk
