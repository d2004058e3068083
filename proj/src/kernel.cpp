#include "qkernel/kernel.hpp"

#include <algorithm>
#include <sstream>

#include "qkernel/errors.hpp"
#include "qkernel/io.hpp"
#include "qkernel/rng.hpp"

namespace qk {

namespace {

void check_features(const FeatureMatrix& m, const FeatureMapSpec& spec, const char* what) {
    if (m.rows() == 0) throw ArgumentError(std::string(what) + " has no samples");
    if (m.cols() != spec.num_qubits) {
        throw ArgumentError(std::string(what) + " has " + std::to_string(m.cols()) +
                            " features but the feature map uses " +
                            std::to_string(spec.num_qubits) + " qubits");
    }
}

std::vector<Statevector> encode_all(const FeatureMatrix& m, const FeatureMapSpec& spec) {
    std::vector<Statevector> states;
    states.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        states.push_back(apply_circuit(Statevector(spec.num_qubits), build_feature_map(spec, row_span(m, r))));
    }
    return states;
}

KernelMatrix make_matrix(KernelKind kind, Eigen::MatrixXd values, const FeatureMapSpec& spec,
                         const FidelityMethod& method) {
    KernelMatrix k;
    k.values = std::move(values);
    k.kind = kind;
    k.method = method;
    k.source = spec;
    k.source_hash = spec_hash(spec);
    if (const auto* cu = std::get_if<ComputeUncompute>(&method)) k.shots_used = cu->shots;
    return k;
}

double sampled_entry(const KernelTask& task, std::uint64_t shots) {
    const auto state = apply_circuit(Statevector(task.circuit.num_qubits), task.circuit);
    return sample_all_zeros(state, shots, task.seed);
}

void check_method(const FidelityMethod& method) {
    if (const auto* cu = std::get_if<ComputeUncompute>(&method); cu && cu->shots == 0) {
        throw ArgumentError("compute-uncompute needs at least one shot");
    }
}

}  // namespace

std::string method_name(const FidelityMethod& m) {
    return std::holds_alternative<ExactOverlap>(m) ? "exact" : "sampled";
}

std::string_view kernel_kind_name(KernelKind k) { return k == KernelKind::Train ? "train" : "test"; }

KernelKind kernel_kind_from_name(std::string_view name) {
    if (name == "train") return KernelKind::Train;
    if (name == "test") return KernelKind::Test;
    throw FormatError("unknown kernel kind '" + std::string(name) + "'");
}

Circuit compute_uncompute_circuit(const FeatureMapSpec& spec, std::span<const double> x,
                                  std::span<const double> y) {
    Circuit c = build_feature_map(spec, x);
    c.append(adjoint(build_feature_map(spec, y)));
    return c;
}

double fidelity(std::span<const double> x, std::span<const double> y, const FeatureMapSpec& spec,
                const FidelityMethod& method) {
    if (static_cast<int>(x.size()) != spec.num_qubits || static_cast<int>(y.size()) != spec.num_qubits) {
        throw ArgumentError("fidelity inputs must both have " + std::to_string(spec.num_qubits) +
                            " features");
    }
    check_method(method);
    if (std::holds_alternative<ExactOverlap>(method)) {
        const auto a = apply_circuit(Statevector(spec.num_qubits), build_feature_map(spec, x));
        const auto b = apply_circuit(Statevector(spec.num_qubits), build_feature_map(spec, y));
        return std::norm(inner_product(a, b));
    }
    const auto& cu = std::get<ComputeUncompute>(method);
    const auto c = compute_uncompute_circuit(spec, x, y);
    return sample_all_zeros(apply_circuit(Statevector(spec.num_qubits), c), cu.shots, cu.seed);
}

std::uint64_t entry_seed(std::uint64_t base_seed, KernelKind kind, std::size_t row, std::size_t col) {
    return derive_seed(base_seed, kind == KernelKind::Train ? 0 : 1, row, col);
}

std::vector<KernelTask> train_tasks(const FeatureMatrix& x, const FeatureMapSpec& spec,
                                    std::uint64_t base_seed) {
    check_features(x, spec, "training set");
    std::vector<KernelTask> tasks;
    const auto n = static_cast<std::size_t>(x.rows());
    tasks.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            tasks.push_back({KernelKind::Train, i, j, entry_seed(base_seed, KernelKind::Train, i, j),
                             compute_uncompute_circuit(spec, row_span(x, i), row_span(x, j))});
        }
    }
    return tasks;
}

std::vector<KernelTask> test_tasks(const FeatureMatrix& y, const FeatureMatrix& x,
                                   const FeatureMapSpec& spec, std::uint64_t base_seed) {
    check_features(y, spec, "test set");
    check_features(x, spec, "training set");
    std::vector<KernelTask> tasks;
    tasks.reserve(static_cast<std::size_t>(y.rows() * x.rows()));
    for (std::size_t i = 0; i < static_cast<std::size_t>(y.rows()); ++i) {
        for (std::size_t j = 0; j < static_cast<std::size_t>(x.rows()); ++j) {
            tasks.push_back({KernelKind::Test, i, j, entry_seed(base_seed, KernelKind::Test, i, j),
                             compute_uncompute_circuit(spec, row_span(y, i), row_span(x, j))});
        }
    }
    return tasks;
}

std::uint64_t count_jobs(std::uint64_t n_train, std::uint64_t n_test) {
    return n_train * (n_train - (n_train > 0 ? 1 : 0)) / 2 + n_test * n_train;
}

KernelMatrix evaluate_train_matrix(const FeatureMatrix& x, const FeatureMapSpec& spec,
                                   const FidelityMethod& method) {
    check_features(x, spec, "training set");
    check_method(method);
    const auto n = x.rows();
    Eigen::MatrixXd values = Eigen::MatrixXd::Identity(n, n);
    if (std::holds_alternative<ExactOverlap>(method)) {
        const auto states = encode_all(x, spec);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                values(i, j) = values(j, i) = std::norm(inner_product(states[i], states[j]));
            }
        }
    } else {
        const auto& cu = std::get<ComputeUncompute>(method);
        for (const auto& t : train_tasks(x, spec, cu.seed)) {
            const double v = sampled_entry(t, cu.shots);
            values(t.row, t.col) = values(t.col, t.row) = v;
        }
    }
    return make_matrix(KernelKind::Train, std::move(values), spec, method);
}

KernelMatrix evaluate_test_matrix(const FeatureMatrix& y, const FeatureMatrix& x,
                                  const FeatureMapSpec& spec, const FidelityMethod& method) {
    check_features(y, spec, "test set");
    check_features(x, spec, "training set");
    check_method(method);
    Eigen::MatrixXd values(y.rows(), x.rows());
    if (std::holds_alternative<ExactOverlap>(method)) {
        const auto ys = encode_all(y, spec);
        const auto xs = encode_all(x, spec);
        for (Eigen::Index i = 0; i < y.rows(); ++i) {
            for (Eigen::Index j = 0; j < x.rows(); ++j) values(i, j) = std::norm(inner_product(ys[i], xs[j]));
        }
    } else {
        const auto& cu = std::get<ComputeUncompute>(method);
        for (const auto& t : test_tasks(y, x, spec, cu.seed)) values(t.row, t.col) = sampled_entry(t, cu.shots);
    }
    return make_matrix(KernelKind::Test, std::move(values), spec, method);
}

KernelMatrix assemble_kernel_matrix(KernelKind kind, std::size_t rows, std::size_t cols,
                                    const std::map<EntryKey, double>& entries,
                                    const FeatureMapSpec& spec, const FidelityMethod& method) {
    if (kind == KernelKind::Train && rows != cols) throw ArgumentError("train matrix must be square");
    const auto r = static_cast<Eigen::Index>(rows), c = static_cast<Eigen::Index>(cols);
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(r, c);
    if (kind == KernelKind::Train) values.setIdentity();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = (kind == KernelKind::Train ? i + 1 : 0); j < cols; ++j) {
            auto it = entries.find({kind, i, j});
            if (it == entries.end()) {
                throw ArgumentError("missing " + std::string(kernel_kind_name(kind)) + " entry (" +
                                    std::to_string(i) + ", " + std::to_string(j) + ")");
            }
            values(i, j) = it->second;
            if (kind == KernelKind::Train) values(j, i) = it->second;
        }
    }
    return make_matrix(kind, std::move(values), spec, method);
}

double min_eigenvalue(const Eigen::MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void clip_negative_eigenvalues(KernelMatrix& k) {
    if (k.values.rows() != k.values.cols()) throw ArgumentError("eigenvalue clipping needs a square matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.values);
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd repaired = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    k.values = 0.5 * (repaired + repaired.transpose());
}

void write_kernel_csv(const std::filesystem::path& path, const KernelMatrix& k) {
    std::ostringstream out;
    out << "# kind=" << kernel_kind_name(k.kind)
        << ",method=" << (k.method ? method_name(*k.method) : std::string("classical"))
        << ",shots=" << (k.shots_used ? std::to_string(*k.shots_used) : std::string("none"))
        << ",spec_hash=" << k.source_hash << ",rows=" << k.rows() << ",cols=" << k.cols() << "\n";
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
            if (j) out << ',';
            out << io::format_double(k.values(i, j));
        }
        out << '\n';
    }
    io::write_file_atomic(path, out.str());
}

void write_kernel_sidecar(const std::filesystem::path& csv_path, const KernelMatrix& k) {
    nlohmann::json j;
    j["kind"] = kernel_kind_name(k.kind);
    j["rows"] = k.rows();
    j["cols"] = k.cols();
    j["source"] = k.source;
    j["spec_hash"] = k.source_hash;
    if (k.method) {
        j["method"] = method_name(*k.method);
        if (const auto* cu = std::get_if<ComputeUncompute>(&*k.method)) {
            j["shots"] = cu->shots;
            j["seed"] = cu->seed;
        }
    } else {
        j["method"] = "classical";
    }
    auto side = csv_path;
    side += ".json";
    io::write_json_atomic(side, j);
}

KernelMatrix read_kernel_csv(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        throw FormatError(path.string() + ": missing kernel header line");
    }
    KernelMatrix k;
    std::map<std::string, std::string> meta;
    for (const auto& field : io::split(line.substr(2), ',')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw FormatError(path.string() + ": bad header field '" + field + "'");
        meta[io::trim(field.substr(0, eq))] = io::trim(field.substr(eq + 1));
    }
    for (const char* key : {"kind", "method", "shots", "spec_hash", "rows", "cols"}) {
        if (!meta.count(key)) throw FormatError(path.string() + ": header lacks '" + key + "'");
    }
    k.kind = kernel_kind_from_name(meta["kind"]);
    k.source_hash = meta["spec_hash"];
    const auto rows = io::parse_int(meta["rows"]);
    const auto cols = io::parse_int(meta["cols"]);
    if (meta["shots"] != "none") k.shots_used = static_cast<std::uint64_t>(io::parse_int(meta["shots"]));
    if (meta["method"] == "exact") {
        k.method = ExactOverlap{};
    } else if (meta["method"] == "sampled") {
        k.method = ComputeUncompute{k.shots_used.value_or(kDefaultShots), 0};
    } else if (meta["method"] != "classical") {
        throw FormatError(path.string() + ": unknown method '" + meta["method"] + "'");
    }

    k.values.resize(rows, cols);
    Eigen::Index r = 0;
    while (std::getline(in, line)) {
        if (io::trim(line).empty()) continue;
        if (r >= rows) throw FormatError(path.string() + ": more rows than declared");
        const auto fields = io::split(line, ',');
        if (static_cast<long long>(fields.size()) != cols) {
            throw FormatError(path.string() + ": row " + std::to_string(r) + " has " +
                              std::to_string(fields.size()) + " values, expected " + std::to_string(cols));
        }
        for (Eigen::Index c = 0; c < cols; ++c) k.values(r, c) = io::parse_double(fields[c]);
        ++r;
    }
    if (r != rows) throw FormatError(path.string() + ": fewer rows than declared");

    auto side = path;
    side += ".json";
    if (std::filesystem::exists(side)) {
        const auto j = io::read_json(side);
        k.source = j.value("source", nlohmann::json{});
        if (k.method && std::holds_alternative<ComputeUncompute>(*k.method) && j.contains("seed")) {
            std::get<ComputeUncompute>(*k.method).seed = j["seed"].get<std::uint64_t>();
        }
    }
    return k;
}

}  // namespace qk
