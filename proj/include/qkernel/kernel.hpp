#pragma once

// Fidelity kernels k(x, y) = |<phi(x)|phi(y)>|^2 and their train/test matrices.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qkernel/feature_map.hpp"
#include "qkernel/statevector.hpp"

namespace qk {

/// Samples x features; rows are contiguous so a row can be viewed as a span.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> row_span(const FeatureMatrix& m, Eigen::Index r) {
    return {m.row(r).data(), static_cast<std::size_t>(m.cols())};
}

inline constexpr std::uint64_t kDefaultShots = 1000;

struct ExactOverlap {
    bool operator==(const ExactOverlap&) const = default;
};

/// Runs U(x) then U(y)^dagger on |0^n> and counts all-zeros outcomes over `shots` shots.
struct ComputeUncompute {
    std::uint64_t shots = kDefaultShots;
    std::uint64_t seed = 0;
    bool operator==(const ComputeUncompute&) const = default;
};

using FidelityMethod = std::variant<ExactOverlap, ComputeUncompute>;

std::string method_name(const FidelityMethod& m);

enum class KernelKind { Train, Test };

std::string_view kernel_kind_name(KernelKind k);
KernelKind kernel_kind_from_name(std::string_view name);

struct KernelMatrix {
    Eigen::MatrixXd values;
    KernelKind kind = KernelKind::Train;
    /// Empty for classical kernels.
    std::optional<FidelityMethod> method;
    /// Feature map spec (quantum) or classical kernel description.
    nlohmann::json source;
    std::string source_hash;
    std::optional<std::uint64_t> shots_used;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

/// U(x) followed by U(y)^dagger.
Circuit compute_uncompute_circuit(const FeatureMapSpec& spec, std::span<const double> x,
                                  std::span<const double> y);

double fidelity(std::span<const double> x, std::span<const double> y, const FeatureMapSpec& spec,
                const FidelityMethod& method);

/// Per-entry seed. Train entries use stream 0, test entries stream 1, so a train (i, j) and a
/// test (i, j) never share randomness.
std::uint64_t entry_seed(std::uint64_t base_seed, KernelKind kind, std::size_t row, std::size_t col);

/// One estimated kernel entry: the compute-uncompute circuit of (rows[row], cols[col]).
struct KernelTask {
    KernelKind kind;
    std::size_t row;
    std::size_t col;
    std::uint64_t seed;
    Circuit circuit;
};

/// Strict upper triangle of the train matrix, row-major.
std::vector<KernelTask> train_tasks(const FeatureMatrix& x, const FeatureMapSpec& spec,
                                    std::uint64_t base_seed);
/// All m x n entries of the test matrix, row-major.
std::vector<KernelTask> test_tasks(const FeatureMatrix& y, const FeatureMatrix& x,
                                   const FeatureMapSpec& spec, std::uint64_t base_seed);

/// Number of separately estimated entries for an n_train/n_test split.
std::uint64_t count_jobs(std::uint64_t n_train, std::uint64_t n_test);

KernelMatrix evaluate_train_matrix(const FeatureMatrix& x, const FeatureMapSpec& spec,
                                   const FidelityMethod& method);
KernelMatrix evaluate_test_matrix(const FeatureMatrix& y, const FeatureMatrix& x,
                                  const FeatureMapSpec& spec, const FidelityMethod& method);

using EntryKey = std::tuple<KernelKind, std::size_t, std::size_t>;

/// Builds a matrix from separately estimated entries (e.g. collected backend jobs). Train
/// matrices take the strict upper triangle, mirror it and put ones on the diagonal.
KernelMatrix assemble_kernel_matrix(KernelKind kind, std::size_t rows, std::size_t cols,
                                    const std::map<EntryKey, double>& entries,
                                    const FeatureMapSpec& spec, const FidelityMethod& method);

/// Replaces negative eigenvalues of a square matrix by zero. Optional repair for sampled
/// train matrices; never applied implicitly.
void clip_negative_eigenvalues(KernelMatrix& k);

double min_eigenvalue(const Eigen::MatrixXd& symmetric);

/// CSV: one `# key=value,...` provenance line, then rows of %.17g values.
void write_kernel_csv(const std::filesystem::path& path, const KernelMatrix& k);
KernelMatrix read_kernel_csv(const std::filesystem::path& path);
/// Full provenance next to the CSV (`<path>.json`).
void write_kernel_sidecar(const std::filesystem::path& csv_path, const KernelMatrix& k);

}  // namespace qk
