#pragma once

// Grid runner: dataset sizes x qubit counts x kernels, each cell trained and scored.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qkernel/metrics.hpp"
#include "qkernel/preprocess.hpp"
#include "qkernel/svm.hpp"

namespace qk {

/// How a kernel named in a grid (or on the command line) is evaluated.
struct KernelOptions {
    /// "exact" or "sampled"; ignored by classical kernels.
    std::string method = "exact";
    std::uint64_t shots = kDefaultShots;
    int reps = 2;
    std::string entanglement = "full";
    /// Classical kernel parameters; gamma unset means derived from the training features.
    std::optional<double> gamma;
    int degree = 3;
    double coef0 = 0.0;
    /// Route quantum kernels through the mock backend (submit, run, collect) under this profile.
    std::optional<std::string> backend;
};

bool is_quantum_kernel(const std::string& name);
bool is_classical_kernel(const std::string& name);

FeatureMapSpec make_feature_map(const std::string& name, int qubits, const KernelOptions& opts);

struct KernelPair {
    KernelMatrix train;
    KernelMatrix test;
    /// Simulated backend time; zero for direct evaluation.
    double quantum_seconds = 0.0;
};

/// Train and test matrices for one kernel. `session_dir` is required when opts.backend is set.
KernelPair compute_kernels(const FeatureMatrix& train, const FeatureMatrix& test, const std::string& kernel,
                           const KernelOptions& opts, std::uint64_t seed,
                           const std::filesystem::path& session_dir = {});

struct CellOutcome {
    ConfusionCounts counts;
    Eigen::VectorXd decision;
    std::vector<int> predictions;
    double quantum_seconds = 0.0;
};

CellOutcome evaluate_cell(const Dataset& train, const Dataset& test, const std::string& kernel,
                          const KernelOptions& opts, const SvmConfig& svm, std::uint64_t seed,
                          const std::filesystem::path& session_dir = {});

struct ExperimentGrid {
    struct Size {
        std::size_t train;
        std::size_t test;
    };
    std::vector<Size> sizes;
    std::vector<int> qubits;
    std::vector<std::string> kernels;

    /// "synthetic" (Gaussian blobs with `dims` = qubits), "dataset" (CSV of raw features,
    /// reduced per cell with PCA) or "corpus" (directory of binaries plus labels CSV).
    std::string source = "synthetic";
    double separation = 4.0;
    std::filesystem::path dataset;
    std::filesystem::path input_dir;
    std::filesystem::path labels;
    int image_width = 64;
    int image_height = 64;

    double angle_lo = 0.0;
    double angle_hi = 6.283185307179586;
    KernelOptions kernel_options;
    SvmConfig svm;
    std::uint64_t seed = 0;
    int repeats = 1;
};

ExperimentGrid grid_from_json(const nlohmann::json& j);

struct CellResult {
    ExperimentGrid::Size size;
    int qubits = 0;
    std::string kernel;
    int repeat = 0;
    std::uint64_t data_seed = 0;
    std::uint64_t kernel_seed = 0;
    std::optional<ConfusionCounts> counts;  // unset when the cell failed
    double quantum_seconds = 0.0;
    std::string error;
};

/// Runs every cell, recording failures instead of stopping, and writes into `out_dir`:
/// cells.csv (one row per cell and repeat), accuracy.csv and f1.csv (size/qubit rows by kernel
/// columns, averaged over repeats) and provenance.json.
std::vector<CellResult> run_experiment(const ExperimentGrid& grid, const std::filesystem::path& out_dir,
                                       std::ostream* log = nullptr);

}  // namespace qk
