#pragma once

// Soft-margin binary SVM trained on a precomputed kernel, and the classical baseline kernels.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qkernel/kernel.hpp"

namespace qk {

struct SvmConfig {
    double C = 1.0;
    /// Stopping threshold on the maximal KKT violation.
    double tol = 1e-3;
    /// Iteration cap is max_passes * n pair updates.
    int max_passes = 200;
    /// Recorded for provenance. The solver itself is deterministic.
    std::uint64_t seed = 0;
};

struct SvmModel {
    /// alpha_i * y_i for every training sample.
    Eigen::VectorXd dual_coefficients;
    double bias = 0.0;
    std::vector<std::size_t> support_indices;
    std::vector<int> labels;
    SvmConfig config;
    nlohmann::json kernel_source;
    std::string kernel_hash;
    std::size_t iterations = 0;
    bool converged = false;

    std::size_t num_train() const { return labels.size(); }
    double alpha(std::size_t i) const { return dual_coefficients[static_cast<Eigen::Index>(i)] * labels[i]; }
};

/// SMO with second-order working-set selection. Pairs with non-positive curvature are skipped.
SvmModel fit_precomputed(const Eigen::MatrixXd& k, std::span<const int> y, const SvmConfig& config = {});
/// Same, keeping the kernel's provenance in the model. Requires a train matrix.
SvmModel fit_precomputed(const KernelMatrix& k, std::span<const int> y, const SvmConfig& config = {});

/// f(z) = sum_i dual_coefficients_i K(z, x_i) + bias, one value per row of `k_test`.
Eigen::VectorXd decision_function(const SvmModel& model, const Eigen::MatrixXd& k_test);
/// Refuses kernels built from a different feature map or classical kernel than the model.
Eigen::VectorXd decision_function(const SvmModel& model, const KernelMatrix& k_test);

/// Sign of the decision value; exactly 0 predicts +1.
std::vector<int> predict_labels(const Eigen::VectorXd& decision);

/// sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
double dual_objective(const Eigen::VectorXd& alpha, std::span<const int> y, const Eigen::MatrixXd& k);

void to_json(nlohmann::json& j, const SvmConfig& c);
void from_json(const nlohmann::json& j, SvmConfig& c);
void to_json(nlohmann::json& j, const SvmModel& m);
void from_json(const nlohmann::json& j, SvmModel& m);

enum class ClassicalKernelKind { Linear, Polynomial, Rbf, Sigmoid };

std::string_view classical_kernel_name(ClassicalKernelKind k);
ClassicalKernelKind classical_kernel_from_name(std::string_view name);

struct ClassicalKernel {
    ClassicalKernelKind kind = ClassicalKernelKind::Rbf;
    int degree = 3;
    /// Unset means 1 / (features * variance of the training data); see resolve_gamma.
    std::optional<double> gamma;
    double coef0 = 0.0;

    bool operator==(const ClassicalKernel&) const = default;
};

/// Fills an unset gamma from the training features.
ClassicalKernel resolve_gamma(ClassicalKernel kernel, const FeatureMatrix& train);

/// Entry (r, c) is k(x_r, y_c). Gamma must be resolved for kernels that use it.
KernelMatrix classical_kernel_matrix(const FeatureMatrix& x, const FeatureMatrix& y, const ClassicalKernel& kernel,
                                     KernelKind kind);

void to_json(nlohmann::json& j, const ClassicalKernel& k);
void from_json(const nlohmann::json& j, ClassicalKernel& k);

}  // namespace qk
