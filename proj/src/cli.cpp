#include "qkernel/cli.hpp"

#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "qkernel/backend.hpp"
#include "qkernel/errors.hpp"
#include "qkernel/experiment.hpp"
#include "qkernel/io.hpp"
#include "qkernel/metrics.hpp"
#include "qkernel/preprocess.hpp"
#include "qkernel/svm.hpp"

namespace qk::cli {

namespace fs = std::filesystem;

namespace {

double parse_bound(std::string t) {
    t = io::trim(t);
    const auto pos = t.find("pi");
    if (pos == std::string::npos) return io::parse_double(t);
    const std::string coef = t.substr(0, pos);
    std::string rest = t.substr(pos + 2);
    double v = std::numbers::pi;
    if (coef == "-") v = -v;
    else if (!coef.empty()) v *= io::parse_double(coef);
    if (!rest.empty()) {
        if (rest[0] != '/') throw ArgumentError("cannot parse angle '" + t + "'");
        v /= io::parse_double(rest.substr(1));
    }
    return v;
}

std::pair<int, int> parse_image_size(const std::string& text) {
    const auto x = text.find_first_of("xX");
    if (x == std::string::npos) throw ArgumentError("image size must look like 64x64, got '" + text + "'");
    const auto w = io::parse_int(text.substr(0, x));
    const auto h = io::parse_int(text.substr(x + 1));
    if (w <= 0 || h <= 0) throw ArgumentError("image size must be positive");
    return {static_cast<int>(w), static_cast<int>(h)};
}

std::pair<fs::path, fs::path> split_paths(const fs::path& out) {
    std::string stem = out.string();
    if (out.extension() == ".csv") stem = (out.parent_path() / out.stem()).string();
    return {stem + "_train.csv", stem + "_test.csv"};
}

void require(bool cond, const std::string& message) {
    if (!cond) throw ArgumentError(message);
}

struct SynthArgs {
    std::size_t samples = 0;
    int dims = 3;
    double separation = 4.0;
    std::uint64_t seed = 0;
    std::optional<std::size_t> train, test;
    std::string angle_range = "0,2pi";
    fs::path out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    require(a.train.has_value() == a.test.has_value(), "--train and --test go together");
    const auto ds = generate_synthetic(a.samples, a.dims, a.separation, a.seed);
    const bool scale = a.angle_range != "none";
    std::pair<double, double> range{0, 0};
    if (scale) range = parse_angle_range(a.angle_range);
    auto finish = [&](Dataset& d, const AngleScaler& s) {
        if (!scale) return;
        d.features = apply_angle_scaler(s, d.features);
        d.provenance["scaler"] = s;
    };
    if (a.train) {
        auto [train, test] = balanced_split(ds, *a.train, *a.test, a.seed);
        if (scale) {
            const auto s = fit_angle_scaler(train.features, range.first, range.second);
            finish(train, s);
            finish(test, s);
        }
        const auto [tp, sp] = split_paths(a.out);
        write_dataset(tp, train);
        write_dataset(sp, test);
        out << "wrote " << train.size() << " training samples to " << tp.string() << " and " << test.size()
            << " test samples to " << sp.string() << '\n';
    } else {
        Dataset all = ds;
        if (scale) finish(all, fit_angle_scaler(all.features, range.first, range.second));
        write_dataset(a.out, all);
        out << "wrote " << all.size() << " samples to " << a.out.string() << '\n';
    }
    return kExitOk;
}

struct PreprocessArgs {
    fs::path input_dir, labels, out;
    std::string image_size = "64x64";
    int qubits = 0;
    std::string angle_range = "0,2pi";
    std::uint64_t seed = 0;
    std::optional<std::size_t> train, test;
    bool fit_on_all = false;
};

int cmd_preprocess(const PreprocessArgs& a, std::ostream& out) {
    require(a.train.has_value() == a.test.has_value(), "--train and --test go together");
    const auto [w, h] = parse_image_size(a.image_size);
    const auto range = parse_angle_range(a.angle_range);
    const auto raw = load_image_corpus(a.input_dir, a.labels, {WidthSchedule::standard(), w, h});
    FeaturePipeline pipeline{a.qubits, range.first, range.second, a.fit_on_all};
    if (a.train) {
        const auto [train, test] = balanced_split(raw, *a.train, *a.test, a.seed);
        auto reduced = reduce_features(train, test, pipeline);
        const auto [tp, sp] = split_paths(a.out);
        reduced.train.provenance["seed"] = a.seed;
        reduced.test.provenance["seed"] = a.seed;
        write_dataset(tp, reduced.train);
        write_dataset(sp, reduced.test);
        out << "wrote " << reduced.train.size() << "x" << a.qubits << " training features to " << tp.string()
            << " and " << reduced.test.size() << "x" << a.qubits << " test features to " << sp.string() << '\n';
    } else {
        Dataset none;
        none.features.resize(0, raw.features.cols());
        auto reduced = reduce_features(raw, none, pipeline);
        reduced.train.provenance["seed"] = a.seed;
        write_dataset(a.out, reduced.train);
        out << "wrote " << reduced.train.size() << "x" << a.qubits << " features to " << a.out.string() << '\n';
    }
    return kExitOk;
}

struct KernelArgs {
    fs::path dataset, test_dataset, session_dir, out;
    std::string feature_map = "zz";
    int reps = 2;
    std::string entanglement = "full";
    std::string method;
    std::uint64_t shots = kDefaultShots;
    std::uint64_t seed = 0;
    std::string backend;
    bool direct = false;
    std::string mode = "all";
    std::size_t circuits_per_job = 1;
    std::optional<std::size_t> max_circuits;
    bool no_transpile = false;
    std::optional<double> budget;
    std::optional<double> gamma;
    int degree = 3;
    double coef0 = 0.0;
};

void write_kernel_outputs(const fs::path& dir, const KernelMatrix& train, const std::optional<KernelMatrix>& test,
                          std::ostream& out) {
    fs::create_directories(dir);
    write_kernel_csv(dir / "train_kernel.csv", train);
    write_kernel_sidecar(dir / "train_kernel.csv", train);
    out << "train kernel " << train.rows() << "x" << train.cols() << " -> " << (dir / "train_kernel.csv").string()
        << '\n';
    if (test) {
        write_kernel_csv(dir / "test_kernel.csv", *test);
        write_kernel_sidecar(dir / "test_kernel.csv", *test);
        out << "test kernel " << test->rows() << "x" << test->cols() << " -> " << (dir / "test_kernel.csv").string()
            << '\n';
    }
}

std::pair<Dataset, Dataset> load_kernel_inputs(const KernelArgs& a) {
    require(!a.dataset.empty(), "--dataset is required");
    Dataset train = read_dataset(a.dataset);
    Dataset test;
    if (!a.test_dataset.empty()) test = read_dataset(a.test_dataset);
    else test.features.resize(0, train.features.cols());
    return {std::move(train), std::move(test)};
}

int cmd_kernel(const KernelArgs& a, std::ostream& out, std::ostream& err) {
    const bool backend = !a.backend.empty();
    KernelOptions opts;
    opts.method = a.method.empty() ? (backend ? "sampled" : "exact") : a.method;
    opts.shots = a.shots;
    opts.reps = a.reps;
    opts.entanglement = a.entanglement;
    opts.gamma = a.gamma;
    opts.degree = a.degree;
    opts.coef0 = a.coef0;
    require(is_quantum_kernel(a.feature_map) || is_classical_kernel(a.feature_map),
            "unknown feature map '" + a.feature_map + "'");

    if (!backend) {
        require(a.mode == "all", "--mode " + a.mode + " needs --backend");
        require(!a.out.empty(), "--out is required");
        const auto [train, test] = load_kernel_inputs(a);
        auto pair = compute_kernels(train.features, test.features, a.feature_map, opts, a.seed);
        std::optional<KernelMatrix> test_k;
        if (!a.test_dataset.empty()) test_k = std::move(pair.test);
        write_kernel_outputs(a.out, pair.train, test_k, out);
        return kExitOk;
    }

    require(is_quantum_kernel(a.feature_map), "classical kernels are computed with --direct");
    require(opts.method == "sampled", "backend execution always samples; use --method sampled");
    require(!a.session_dir.empty(), "--session-dir is required with --backend");
    const bool submit = a.mode == "submit" || a.mode == "all";
    const bool run = a.mode == "run" || a.mode == "all";
    const bool collect = a.mode == "collect" || a.mode == "all";
    require(submit || run || collect, "unknown mode '" + a.mode + "'");
    if (collect) require(!a.out.empty(), "--out is required to collect kernels");

    if (submit) {
        auto profile = builtin_profile(a.backend);
        if (a.max_circuits) profile.max_circuits_per_job = *a.max_circuits;
        const auto [train, test] = load_kernel_inputs(a);
        const auto spec = make_feature_map(a.feature_map, static_cast<int>(train.features.cols()), opts);
        const auto session = submit_kernel_session(a.session_dir, train.features, test.features, spec, profile,
                                                   opts.shots, a.seed, a.circuits_per_job, !a.no_transpile);
        out << "submitted " << session.job_ids.size() << " jobs to " << profile.name << " (session " << session.id
            << ", " << count_jobs(static_cast<std::uint64_t>(train.size()), static_cast<std::uint64_t>(test.size()))
            << " kernel entries) in " << a.session_dir.string() << '\n';
    }
    if (run) {
        RunOptions ro;
        ro.budget_seconds = a.budget;
        ro.on_budget_exceeded = [&err](double used, double budget) {
            err << "warning: quantum time " << used << " s exceeds the budget of " << budget << " s\n";
        };
        const auto session = run_kernel_session(a.session_dir, ro);
        out << "session " << session.id << ": " << session.jobs_done << " jobs done, quantum time "
            << session.quantum_seconds << " s (" << session.quantum_seconds / 60.0 << " min), simulated clock "
            << session.clock_seconds << " s\n";
    }
    if (collect) {
        const auto collected = collect_kernel_session(a.session_dir);
        write_kernel_outputs(a.out, collected.train, collected.test, out);
    }
    return kExitOk;
}

struct TrainArgs {
    fs::path kernel, dataset, out;
    SvmConfig svm;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const auto k = read_kernel_csv(a.kernel);
    const auto ds = read_dataset(a.dataset);
    require(static_cast<std::size_t>(k.rows()) == ds.size(),
            "kernel has " + std::to_string(k.rows()) + " rows but the dataset has " + std::to_string(ds.size()) +
                " samples");
    const auto model = fit_precomputed(k, ds.labels, a.svm);
    if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
    io::write_json_atomic(a.out, model);
    out << "trained on " << ds.size() << " samples: " << model.support_indices.size() << " support vectors, "
        << (model.converged ? "converged" : "iteration limit reached") << " after " << model.iterations
        << " iterations -> " << a.out.string() << '\n';
    return kExitOk;
}

struct PredictArgs {
    fs::path model, kernel, out;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
    require(fs::exists(a.model), "model file not found: " + a.model.string());
    SvmModel model;
    try {
        model = io::read_json(a.model).get<SvmModel>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("cannot read model " + a.model.string() + ": " + e.what());
    }
    const auto k = read_kernel_csv(a.kernel);
    const auto decision = decision_function(model, k);
    const auto labels = predict_labels(decision);
    std::ostringstream csv;
    csv << "index,decision,prediction\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        csv << i << ',' << io::format_double(decision[static_cast<Eigen::Index>(i)]) << ',' << labels[i] << '\n';
    }
    if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
    io::write_file_atomic(a.out, csv.str());
    out << "wrote " << labels.size() << " predictions to " << a.out.string() << '\n';
    return kExitOk;
}

std::vector<int> read_predictions(const fs::path& path) {
    require(fs::exists(path), "predictions file not found: " + path.string());
    std::istringstream in(io::read_file(path));
    std::string line;
    std::vector<int> labels;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = io::trim(line);
        if (text.empty() || (line_no == 1 && text.rfind("index", 0) == 0)) continue;
        const auto fields = io::split(text, ',');
        if (fields.size() != 3) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
        labels.push_back(static_cast<int>(io::parse_int(io::trim(fields[2]))));
    }
    return labels;
}

struct EvaluateArgs {
    fs::path predictions, dataset, out;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const auto pred = read_predictions(a.predictions);
    const auto ds = read_dataset(a.dataset);
    const auto report = metrics_report(confusion(ds.labels, pred));
    if (!a.out.empty()) {
        if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());
        io::write_json_atomic(a.out, report);
    }
    out << report.dump(2) << '\n';
    return kExitOk;
}

struct ExperimentArgs {
    fs::path grid, out_dir;
    std::optional<int> repeats;
    std::optional<std::uint64_t> seed;
};

int cmd_experiment(const ExperimentArgs& a, std::ostream& out) {
    require(fs::exists(a.grid), "grid file not found: " + a.grid.string());
    auto grid = grid_from_json(io::read_json(a.grid));
    if (a.repeats) {
        require(*a.repeats >= 1, "--repeats must be at least 1");
        grid.repeats = *a.repeats;
    }
    if (a.seed) grid.seed = *a.seed;
    const auto results = run_experiment(grid, a.out_dir, &out);
    std::size_t failed = 0;
    for (const auto& c : results) failed += c.counts ? 0 : 1;
    out << results.size() << " cells, " << failed << " failed; tables in " << a.out_dir.string() << '\n';
    return kExitOk;
}

}  // namespace

std::pair<double, double> parse_angle_range(const std::string& text) {
    const auto parts = io::split(text, ',');
    if (parts.size() != 2) throw ArgumentError("angle range must be 'lo,hi', got '" + text + "'");
    const double lo = parse_bound(parts[0]), hi = parse_bound(parts[1]);
    if (!(hi > lo)) throw ArgumentError("angle range needs hi > lo");
    return {lo, hi};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quantum kernel SVM toolkit: preprocessing, fidelity kernels, mock backend, SVM", "qkernel"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a two-blob synthetic dataset");
    synth->add_option("--samples", sa.samples, "Total samples (even)")->required();
    synth->add_option("--dims", sa.dims, "Feature dimensions")->capture_default_str();
    synth->add_option("--separation", sa.separation, "Distance between blob centres")->capture_default_str();
    synth->add_option("--seed", sa.seed)->capture_default_str();
    synth->add_option("--train", sa.train, "Balanced training split size");
    synth->add_option("--test", sa.test, "Balanced test split size");
    synth->add_option("--angle-range", sa.angle_range, "Scale features to lo,hi radians, or 'none'")
        ->capture_default_str();
    synth->add_option("--out", sa.out, "Output CSV (with a split: <out>_train.csv and <out>_test.csv)")->required();

    PreprocessArgs pa;
    auto* pre = app.add_subcommand("preprocess", "Turn a directory of binaries into q-dimensional features");
    pre->add_option("--input-dir", pa.input_dir)->required();
    pre->add_option("--labels", pa.labels, "CSV of filename,label with label 1 = malware, 0 = benign")->required();
    pre->add_option("--image-size", pa.image_size, "WxH")->capture_default_str();
    pre->add_option("--qubits", pa.qubits, "Number of PCA components")->required();
    pre->add_option("--angle-range", pa.angle_range)->capture_default_str();
    pre->add_option("--seed", pa.seed)->capture_default_str();
    pre->add_option("--train", pa.train, "Balanced training split size");
    pre->add_option("--test", pa.test, "Balanced test split size");
    pre->add_flag("--fit-on-all", pa.fit_on_all, "Fit PCA and scaling on train and test together");
    pre->add_option("--out", pa.out)->required();

    KernelArgs ka;
    auto* kern = app.add_subcommand("kernel", "Compute train/test kernel matrices directly or through a backend");
    kern->add_option("--dataset", ka.dataset, "Training dataset CSV");
    kern->add_option("--test-dataset", ka.test_dataset, "Test dataset CSV");
    kern->add_option("--feature-map", ka.feature_map, "z, zz, pauli, zzphi, or linear, polynomial, rbf, sigmoid")
        ->capture_default_str();
    kern->add_option("--reps", ka.reps)->capture_default_str();
    kern->add_option("--entanglement", ka.entanglement, "full or linear")->capture_default_str();
    kern->add_option("--method", ka.method, "exact or sampled (default: exact, sampled with --backend)");
    kern->add_option("--shots", ka.shots)->capture_default_str();
    kern->add_option("--seed", ka.seed)->capture_default_str();
    auto* backend_opt = kern->add_option("--backend", ka.backend, "Backend profile, e.g. ibm_torino");
    kern->add_flag("--direct", ka.direct, "Evaluate in-process without a backend")->excludes(backend_opt);
    kern->add_option("--mode", ka.mode, "submit, run, collect or all")->capture_default_str();
    kern->add_option("--session-dir", ka.session_dir);
    kern->add_option("--circuits-per-job", ka.circuits_per_job, "Circuits packed per job; 0 puts all in one job")
        ->capture_default_str();
    kern->add_option("--max-circuits-per-job", ka.max_circuits, "Override the profile's job size limit");
    kern->add_flag("--no-transpile", ka.no_transpile, "Submit circuits without rewriting them to the backend ISA");
    kern->add_option("--budget", ka.budget, "Warn when quantum time exceeds this many seconds");
    kern->add_option("--gamma", ka.gamma);
    kern->add_option("--degree", ka.degree)->capture_default_str();
    kern->add_option("--coef0", ka.coef0)->capture_default_str();
    kern->add_option("--out", ka.out, "Output directory for train_kernel.csv and test_kernel.csv");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Fit an SVM on a precomputed train kernel");
    train->add_option("--kernel", ta.kernel)->required();
    train->add_option("--dataset", ta.dataset, "Dataset providing the training labels")->required();
    train->add_option("--C", ta.svm.C)->capture_default_str();
    train->add_option("--tol", ta.svm.tol)->capture_default_str();
    train->add_option("--max-passes", ta.svm.max_passes)->capture_default_str();
    train->add_option("--seed", ta.svm.seed)->capture_default_str();
    train->add_option("--out", ta.out, "Model JSON")->required();

    PredictArgs pr;
    auto* predict = app.add_subcommand("predict", "Predict labels from a model and a test kernel");
    predict->add_option("--model", pr.model)->required();
    predict->add_option("--kernel", pr.kernel)->required();
    predict->add_option("--out", pr.out)->required();

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "Accuracy, precision, recall and F1 of predictions");
    evaluate->add_option("--predictions", ea.predictions)->required();
    evaluate->add_option("--dataset", ea.dataset, "Dataset providing the true labels")->required();
    evaluate->add_option("--out", ea.out, "Metrics JSON");

    ExperimentArgs xa;
    auto* experiment = app.add_subcommand("experiment", "Run a grid of sizes, qubit counts and kernels");
    experiment->add_option("--grid", xa.grid, "Grid JSON")->required();
    experiment->add_option("--out-dir", xa.out_dir)->required();
    experiment->add_option("--repeats", xa.repeats, "Repetitions per cell (overrides the grid)");
    experiment->add_option("--seed", xa.seed, "Seed (overrides the grid)");

    std::vector<const char*> argv{"qkernel"};
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(sa, out);
        if (pre->parsed()) return cmd_preprocess(pa, out);
        if (kern->parsed()) return cmd_kernel(ka, out, err);
        if (train->parsed()) return cmd_train(ta, out);
        if (predict->parsed()) return cmd_predict(pr, out);
        if (evaluate->parsed()) return cmd_evaluate(ea, out);
        if (experiment->parsed()) return cmd_experiment(xa, out);
    } catch (const IncompleteSessionError& e) {
        err << "error: " << e.what() << '\n';
        return kExitPending;
    } catch (const MaxJobSizeError& e) {
        err << "backend rejected the job: " << e.what() << '\n';
        return kExitBackendRejected;
    } catch (const IsaViolationError& e) {
        err << "backend rejected the job: " << e.what() << '\n';
        return kExitBackendRejected;
    } catch (const UnsupportedIsaError& e) {
        err << "error: " << e.what() << '\n';
        return kExitBackendRejected;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace qk::cli
