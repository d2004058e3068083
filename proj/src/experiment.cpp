#include "qkernel/experiment.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "qkernel/backend.hpp"
#include "qkernel/errors.hpp"
#include "qkernel/io.hpp"
#include "qkernel/rng.hpp"

namespace qk {

namespace fs = std::filesystem;

bool is_quantum_kernel(const std::string& name) {
    return name == "z" || name == "zz" || name == "pauli" || name == "zzphi";
}

bool is_classical_kernel(const std::string& name) {
    return name == "linear" || name == "polynomial" || name == "poly" || name == "rbf" || name == "sigmoid";
}

FeatureMapSpec make_feature_map(const std::string& name, int qubits, const KernelOptions& opts) {
    auto spec = FeatureMapSpec::preset(name, qubits, opts.reps);
    if (opts.entanglement == "full") spec.entanglement = Entanglement::Full;
    else if (opts.entanglement == "linear") spec.entanglement = Entanglement::Linear;
    else throw ArgumentError("unknown entanglement '" + opts.entanglement + "' (expected full or linear)");
    return spec;
}

KernelPair compute_kernels(const FeatureMatrix& train, const FeatureMatrix& test, const std::string& kernel,
                           const KernelOptions& opts, std::uint64_t seed, const fs::path& session_dir) {
    if (test.rows() > 0 && test.cols() != train.cols()) throw ArgumentError("train and test feature counts differ");
    if (is_classical_kernel(kernel)) {
        ClassicalKernel ck{classical_kernel_from_name(kernel), opts.degree, opts.gamma, opts.coef0};
        ck = resolve_gamma(ck, train);
        return {classical_kernel_matrix(train, train, ck, KernelKind::Train),
                classical_kernel_matrix(test, train, ck, KernelKind::Test), 0.0};
    }
    if (!is_quantum_kernel(kernel)) throw ArgumentError("unknown kernel '" + kernel + "'");
    const auto spec = make_feature_map(kernel, static_cast<int>(train.cols()), opts);
    if (opts.method != "exact" && opts.method != "sampled") {
        throw ArgumentError("unknown method '" + opts.method + "' (expected exact or sampled)");
    }
    if (opts.backend) {
        if (opts.method != "sampled") throw ArgumentError("backend execution always samples; use --method sampled");
        if (session_dir.empty()) throw ArgumentError("backend execution needs a session directory");
        submit_kernel_session(session_dir, train, test, spec, builtin_profile(*opts.backend), opts.shots, seed);
        run_kernel_session(session_dir);
        auto collected = collect_kernel_session(session_dir);
        KernelPair out{std::move(collected.train), {}, collected.quantum_seconds};
        if (collected.test) {
            out.test = std::move(*collected.test);
        } else {
            out.test.values.resize(0, train.rows());
            out.test.kind = KernelKind::Test;
        }
        return out;
    }
    FidelityMethod method = ExactOverlap{};
    if (opts.method == "sampled") method = ComputeUncompute{opts.shots, seed};
    KernelPair out{evaluate_train_matrix(train, spec, method), {}, 0.0};
    if (test.rows() > 0) {
        out.test = evaluate_test_matrix(test, train, spec, method);
    } else {
        out.test.values.resize(0, train.rows());
        out.test.kind = KernelKind::Test;
    }
    return out;
}

CellOutcome evaluate_cell(const Dataset& train, const Dataset& test, const std::string& kernel,
                          const KernelOptions& opts, const SvmConfig& svm, std::uint64_t seed,
                          const fs::path& session_dir) {
    const auto kernels = compute_kernels(train.features, test.features, kernel, opts, seed, session_dir);
    const auto model = fit_precomputed(kernels.train, train.labels, svm);
    CellOutcome out;
    out.decision = decision_function(model, kernels.test);
    out.predictions = predict_labels(out.decision);
    out.counts = confusion(test.labels, out.predictions);
    out.quantum_seconds = kernels.quantum_seconds;
    return out;
}

namespace {

const std::set<std::string> kGridKeys{"sizes",        "qubits", "kernels", "data",         "angle_range",
                                      "method",       "shots",  "reps",    "entanglement", "backend",
                                      "gamma",        "degree", "coef0",   "svm",          "seed",
                                      "repeats"};

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

nlohmann::json grid_to_json(const ExperimentGrid& g) {
    nlohmann::json sizes = nlohmann::json::array();
    for (const auto& s : g.sizes) sizes.push_back({s.train, s.test});
    nlohmann::json data{{"source", g.source}};
    if (g.source == "synthetic") data["separation"] = g.separation;
    if (g.source == "dataset") data["path"] = g.dataset.string();
    if (g.source == "corpus") {
        data["input_dir"] = g.input_dir.string();
        data["labels"] = g.labels.string();
        data["image_size"] = {g.image_width, g.image_height};
    }
    const auto& k = g.kernel_options;
    nlohmann::json j{{"sizes", sizes},
                     {"qubits", g.qubits},
                     {"kernels", g.kernels},
                     {"data", data},
                     {"angle_range", {g.angle_lo, g.angle_hi}},
                     {"method", k.method},
                     {"shots", k.shots},
                     {"reps", k.reps},
                     {"entanglement", k.entanglement},
                     {"degree", k.degree},
                     {"coef0", k.coef0},
                     {"svm", g.svm},
                     {"seed", g.seed},
                     {"repeats", g.repeats}};
    j["gamma"] = k.gamma ? nlohmann::json(*k.gamma) : nlohmann::json();
    j["backend"] = k.backend ? nlohmann::json(*k.backend) : nlohmann::json();
    return j;
}

std::string size_label(const ExperimentGrid::Size& s) {
    return std::to_string(s.train) + "/" + std::to_string(s.test);
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

ExperimentGrid grid_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ArgumentError("experiment grid must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!kGridKeys.count(key)) throw ArgumentError("unknown experiment grid key '" + key + "'");
    }
    ExperimentGrid g;
    try {
        for (const auto& s : j.value("sizes", nlohmann::json::array())) {
            if (s.is_array()) g.sizes.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
            else g.sizes.push_back({s.at("train").get<std::size_t>(), s.at("test").get<std::size_t>()});
        }
        g.qubits = get_or(j, "qubits", std::vector<int>{});
        g.kernels = get_or(j, "kernels", std::vector<std::string>{});
        if (j.contains("data")) {
            const auto& d = j["data"];
            g.source = get_or(d, "source", g.source);
            g.separation = get_or(d, "separation", g.separation);
            g.dataset = get_or(d, "path", std::string());
            g.input_dir = get_or(d, "input_dir", std::string());
            g.labels = get_or(d, "labels", std::string());
            if (d.contains("image_size")) {
                g.image_width = d["image_size"].at(0).get<int>();
                g.image_height = d["image_size"].at(1).get<int>();
            }
        }
        if (j.contains("angle_range")) {
            g.angle_lo = j["angle_range"].at(0).get<double>();
            g.angle_hi = j["angle_range"].at(1).get<double>();
        }
        auto& k = g.kernel_options;
        k.method = get_or(j, "method", k.method);
        k.shots = get_or(j, "shots", k.shots);
        k.reps = get_or(j, "reps", k.reps);
        k.entanglement = get_or(j, "entanglement", k.entanglement);
        k.degree = get_or(j, "degree", k.degree);
        k.coef0 = get_or(j, "coef0", k.coef0);
        if (j.contains("gamma") && !j["gamma"].is_null()) k.gamma = j["gamma"].get<double>();
        if (j.contains("backend") && !j["backend"].is_null()) k.backend = j["backend"].get<std::string>();
        if (j.contains("svm")) g.svm = j["svm"].get<SvmConfig>();
        g.seed = get_or(j, "seed", g.seed);
        g.repeats = get_or(j, "repeats", g.repeats);
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("malformed experiment grid: ") + e.what());
    }
    if (g.source != "synthetic" && g.source != "dataset" && g.source != "corpus") {
        throw ArgumentError("unknown data source '" + g.source + "' (expected synthetic, dataset or corpus)");
    }
    if (g.repeats < 1) throw ArgumentError("repeats must be at least 1");
    for (const auto& name : g.kernels) {
        if (!is_quantum_kernel(name) && !is_classical_kernel(name)) throw ArgumentError("unknown kernel '" + name + "'");
    }
    for (int q : g.qubits)
        if (q < 1) throw ArgumentError("qubit counts must be positive");
    if (!(g.angle_hi > g.angle_lo)) throw ArgumentError("angle range needs hi > lo");
    return g;
}

std::vector<CellResult> run_experiment(const ExperimentGrid& grid, const fs::path& out_dir, std::ostream* log) {
    fs::create_directories(out_dir);
    Dataset base;
    if (grid.source == "dataset") {
        base = read_dataset(grid.dataset);
    } else if (grid.source == "corpus") {
        base = load_image_corpus(grid.input_dir, grid.labels, {WidthSchedule::standard(), grid.image_width, grid.image_height});
    }

    std::vector<CellResult> results;
    const std::size_t total = grid.sizes.size() * grid.qubits.size() * grid.kernels.size() *
                              static_cast<std::size_t>(grid.repeats);
    for (std::size_t si = 0; si < grid.sizes.size(); ++si) {
        const auto& size = grid.sizes[si];
        for (int q : grid.qubits) {
            for (int rep = 0; rep < grid.repeats; ++rep) {
                const std::uint64_t data_seed = derive_seed(grid.seed, si, static_cast<std::uint64_t>(q),
                                                            static_cast<std::uint64_t>(rep));
                Dataset train, test;
                std::string data_error;
                try {
                    if (grid.source == "synthetic") {
                        const auto ds = generate_synthetic(size.train + size.test, q, grid.separation, data_seed);
                        std::tie(train, test) = balanced_split(ds, size.train, size.test, data_seed);
                        const auto scaler = fit_angle_scaler(train.features, grid.angle_lo, grid.angle_hi);
                        train.features = apply_angle_scaler(scaler, train.features);
                        test.features = apply_angle_scaler(scaler, test.features);
                    } else {
                        auto [tr, te] = balanced_split(base, size.train, size.test, data_seed);
                        auto reduced = reduce_features(tr, te, {q, grid.angle_lo, grid.angle_hi, false});
                        train = std::move(reduced.train);
                        test = std::move(reduced.test);
                    }
                } catch (const std::exception& e) {
                    data_error = e.what();
                }
                for (const auto& kernel : grid.kernels) {
                    CellResult cell;
                    cell.size = size;
                    cell.qubits = q;
                    cell.kernel = kernel;
                    cell.repeat = rep;
                    cell.data_seed = data_seed;
                    cell.kernel_seed = derive_seed(data_seed, 2);
                    cell.error = data_error;
                    if (data_error.empty()) {
                        fs::path session;
                        if (grid.kernel_options.backend && is_quantum_kernel(kernel)) {
                            session = out_dir / "sessions" /
                                      (std::to_string(size.train) + "_" + std::to_string(size.test) + "_q" +
                                       std::to_string(q) + "_" + kernel + "_r" + std::to_string(rep));
                        }
                        try {
                            const auto outcome =
                                evaluate_cell(train, test, kernel, grid.kernel_options, grid.svm, cell.kernel_seed, session);
                            cell.counts = outcome.counts;
                            cell.quantum_seconds = outcome.quantum_seconds;
                        } catch (const std::exception& e) {
                            cell.error = e.what();
                        }
                    }
                    results.push_back(cell);
                    if (log) {
                        *log << "[" << results.size() << "/" << total << "] " << size_label(size) << " q=" << q << ' '
                             << kernel << " repeat " << rep << ": ";
                        if (cell.counts) {
                            *log << "accuracy " << fixed4(accuracy(*cell.counts)) << " f1 " << fixed4(f1(*cell.counts));
                        } else {
                            *log << "failed: " << cell.error;
                        }
                        *log << '\n';
                    }
                }
            }
        }
    }

    std::ostringstream cells;
    cells << "n_train,n_test,qubits,kernel,repeat,status,accuracy,precision,recall,f1,tp,tn,fp,fn,quantum_seconds,error\n";
    nlohmann::json prov_cells = nlohmann::json::array();
    for (const auto& c : results) {
        cells << c.size.train << ',' << c.size.test << ',' << c.qubits << ',' << c.kernel << ',' << c.repeat << ','
              << (c.counts ? "ok" : "failed") << ',';
        if (c.counts) {
            const auto& n = *c.counts;
            cells << io::format_double(accuracy(n)) << ',' << io::format_double(precision(n)) << ','
                  << io::format_double(recall(n)) << ',' << io::format_double(f1(n)) << ',' << n.tp << ',' << n.tn
                  << ',' << n.fp << ',' << n.fn;
        } else {
            cells << ",,,,,,,";
        }
        std::string err = c.error;
        for (auto& ch : err)
            if (ch == '"' || ch == '\n') ch = '\'';
        cells << ',' << io::format_double(c.quantum_seconds) << ",\"" << err << "\"\n";
        nlohmann::json pc{{"n_train", c.size.train}, {"n_test", c.size.test}, {"qubits", c.qubits},
                          {"kernel", c.kernel},      {"repeat", c.repeat},    {"data_seed", c.data_seed},
                          {"kernel_seed", c.kernel_seed}, {"quantum_seconds", c.quantum_seconds}};
        if (c.counts) pc["metrics"] = metrics_report(*c.counts);
        else pc["error"] = c.error;
        prov_cells.push_back(pc);
    }
    io::write_file_atomic(out_dir / "cells.csv", cells.str());

    for (const char* metric : {"accuracy", "f1"}) {
        std::ostringstream table;
        table << "size,qubits";
        for (const auto& k : grid.kernels) table << ',' << k;
        table << '\n';
        for (const auto& size : grid.sizes) {
            for (int q : grid.qubits) {
                table << size_label(size) << ',' << q;
                for (const auto& k : grid.kernels) {
                    double sum = 0;
                    int ok = 0;
                    for (const auto& c : results) {
                        if (c.size.train != size.train || c.size.test != size.test || c.qubits != q || c.kernel != k ||
                            !c.counts)
                            continue;
                        sum += std::string(metric) == "f1" ? f1(*c.counts) : accuracy(*c.counts);
                        ++ok;
                    }
                    table << ',' << (ok > 0 ? fixed4(sum / ok) : std::string());
                }
                table << '\n';
            }
        }
        io::write_file_atomic(out_dir / (std::string(metric) + ".csv"), table.str());
    }

    io::write_json_atomic(out_dir / "provenance.json", {{"grid", grid_to_json(grid)}, {"cells", prov_cells}});
    return results;
}

}  // namespace qk
