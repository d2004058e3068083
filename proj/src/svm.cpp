#include "qkernel/svm.hpp"

#include <cmath>
#include <limits>

#include "qkernel/errors.hpp"

namespace qk {

namespace {

constexpr double kMinCurvature = 1e-12;

void check_labels(std::span<const int> y) {
    bool pos = false, neg = false;
    for (int v : y) {
        if (v == 1) pos = true;
        else if (v == -1) neg = true;
        else throw ArgumentError("labels must be +1 or -1, got " + std::to_string(v));
    }
    if (!pos || !neg) throw ArgumentError("training labels contain a single class");
}

void check_config(const SvmConfig& c) {
    if (!(c.C > 0)) throw ArgumentError("C must be positive");
    if (!(c.tol > 0)) throw ArgumentError("tol must be positive");
    if (c.max_passes <= 0) throw ArgumentError("max_passes must be positive");
}

struct Smo {
    const Eigen::MatrixXd& k;
    std::span<const int> y;
    double c;
    Eigen::VectorXd alpha;
    Eigen::VectorXd grad;  // Q alpha - 1 with Q_ij = y_i y_j K_ij

    Smo(const Eigen::MatrixXd& kernel, std::span<const int> labels, double box)
        : k(kernel), y(labels), c(box), alpha(Eigen::VectorXd::Zero(kernel.rows())),
          grad(Eigen::VectorXd::Constant(kernel.rows(), -1.0)) {}

    bool in_up(Eigen::Index t) const { return y[t] == 1 ? alpha[t] < c : alpha[t] > 0; }
    bool in_low(Eigen::Index t) const { return y[t] == 1 ? alpha[t] > 0 : alpha[t] < c; }
    double score(Eigen::Index t) const { return -y[t] * grad[t]; }

    double violation() const {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < k.rows(); ++t) {
            if (in_up(t)) gmax = std::max(gmax, score(t));
            if (in_low(t)) gmin = std::min(gmin, score(t));
        }
        return gmax - gmin;
    }

    // Returns false once the maximal violation drops below tol or no pair can make progress.
    bool step(double tol, bool& converged) {
        const Eigen::Index n = k.rows();
        Eigen::Index i = -1;
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n; ++t) {
            if (in_up(t) && score(t) > gmax) {
                gmax = score(t);
                i = t;
            }
            if (in_low(t)) gmin = std::min(gmin, score(t));
        }
        if (i < 0 || gmax - gmin < tol) {
            converged = true;
            return false;
        }
        Eigen::Index j = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n; ++t) {
            if (!in_low(t) || score(t) >= gmax) continue;
            const double eta = k(i, i) + k(t, t) - 2 * k(i, t);
            if (eta <= kMinCurvature) continue;
            const double b = gmax - score(t);
            const double gain = -(b * b) / eta;
            if (gain < best) {
                best = gain;
                j = t;
            }
        }
        if (j < 0) return false;
        update(i, j);
        return true;
    }

    void update(Eigen::Index i, Eigen::Index j) {
        const double old_i = alpha[i], old_j = alpha[j];
        const double eta = k(i, i) + k(j, j) - 2 * k(i, j);
        double& ai = alpha[i];
        double& aj = alpha[j];
        if (y[i] != y[j]) {
            const double delta = (-grad[i] - grad[j]) / eta;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0) {
                if (aj < 0) {
                    aj = 0;
                    ai = diff;
                }
            } else if (ai < 0) {
                ai = 0;
                aj = -diff;
            }
            if (diff > 0) {
                if (ai > c) {
                    ai = c;
                    aj = c - diff;
                }
            } else if (aj > c) {
                aj = c;
                ai = c + diff;
            }
        } else {
            const double delta = (grad[i] - grad[j]) / eta;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > c) {
                if (ai > c) {
                    ai = c;
                    aj = sum - c;
                }
            } else if (aj < 0) {
                aj = 0;
                ai = sum;
            }
            if (sum > c) {
                if (aj > c) {
                    aj = c;
                    ai = sum - c;
                }
            } else if (ai < 0) {
                ai = 0;
                aj = sum;
            }
        }
        const double di = ai - old_i, dj = aj - old_j;
        for (Eigen::Index t = 0; t < k.rows(); ++t) {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    }

    // Average over free vectors, else the midpoint of the interval the KKT conditions allow.
    double bias() const {
        double lower = -std::numeric_limits<double>::infinity();
        double upper = std::numeric_limits<double>::infinity();
        double sum = 0;
        int free = 0;
        for (Eigen::Index t = 0; t < k.rows(); ++t) {
            const double yg = y[t] * grad[t];
            if (alpha[t] >= c) {
                if (y[t] == -1) upper = std::min(upper, yg);
                else lower = std::max(lower, yg);
            } else if (alpha[t] <= 0) {
                if (y[t] == 1) upper = std::min(upper, yg);
                else lower = std::max(lower, yg);
            } else {
                ++free;
                sum += yg;
            }
        }
        const double rho = free > 0 ? sum / free : (upper + lower) / 2;
        return -rho;
    }
};

}  // namespace

SvmModel fit_precomputed(const Eigen::MatrixXd& k, std::span<const int> y, const SvmConfig& config) {
    check_config(config);
    if (k.rows() != k.cols()) {
        throw ArgumentError("train kernel must be square, got " + std::to_string(k.rows()) + "x" +
                            std::to_string(k.cols()));
    }
    if (static_cast<std::size_t>(k.rows()) != y.size()) {
        throw ArgumentError("kernel has " + std::to_string(k.rows()) + " rows but " + std::to_string(y.size()) +
                            " labels were given");
    }
    if (k.size() > 0 && (k - k.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw ArgumentError("train kernel is not symmetric");
    }
    check_labels(y);

    Smo smo(k, y, config.C);
    const std::size_t max_iter = static_cast<std::size_t>(config.max_passes) * y.size();
    SvmModel model;
    std::size_t iter = 0;
    while (iter < max_iter && smo.step(config.tol, model.converged)) ++iter;
    if (!model.converged) model.converged = smo.violation() < config.tol;

    const Eigen::Index n = k.rows();
    model.dual_coefficients.resize(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        model.dual_coefficients[t] = smo.alpha[t] * y[t];
        if (smo.alpha[t] > 0) model.support_indices.push_back(static_cast<std::size_t>(t));
    }
    model.bias = smo.bias();
    model.labels.assign(y.begin(), y.end());
    model.config = config;
    model.iterations = iter;
    return model;
}

SvmModel fit_precomputed(const KernelMatrix& k, std::span<const int> y, const SvmConfig& config) {
    if (k.kind != KernelKind::Train) throw ArgumentError("fitting requires a train kernel matrix");
    auto model = fit_precomputed(k.values, y, config);
    model.kernel_source = k.source;
    model.kernel_hash = k.source_hash;
    return model;
}

Eigen::VectorXd decision_function(const SvmModel& model, const Eigen::MatrixXd& k_test) {
    if (static_cast<std::size_t>(k_test.cols()) != model.num_train()) {
        throw ArgumentError("test kernel has " + std::to_string(k_test.cols()) + " columns but the model has " +
                            std::to_string(model.num_train()) + " training samples");
    }
    return (k_test * model.dual_coefficients).array() + model.bias;
}

Eigen::VectorXd decision_function(const SvmModel& model, const KernelMatrix& k_test) {
    if (!model.kernel_hash.empty() && k_test.source_hash != model.kernel_hash) {
        throw ArgumentError("kernel spec hash " + k_test.source_hash + " does not match the model's " +
                            model.kernel_hash + "; the matrices come from different feature maps");
    }
    return decision_function(model, k_test.values);
}

std::vector<int> predict_labels(const Eigen::VectorXd& decision) {
    std::vector<int> out(static_cast<std::size_t>(decision.size()));
    for (Eigen::Index i = 0; i < decision.size(); ++i) out[static_cast<std::size_t>(i)] = decision[i] >= 0 ? 1 : -1;
    return out;
}

double dual_objective(const Eigen::VectorXd& alpha, std::span<const int> y, const Eigen::MatrixXd& k) {
    Eigen::VectorXd ay(alpha.size());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) ay[i] = alpha[i] * y[static_cast<std::size_t>(i)];
    return alpha.sum() - 0.5 * ay.dot(k * ay);
}

void to_json(nlohmann::json& j, const SvmConfig& c) {
    j = {{"C", c.C}, {"tol", c.tol}, {"max_passes", c.max_passes}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SvmConfig& c) {
    c = SvmConfig{};
    c.C = j.value("C", c.C);
    c.tol = j.value("tol", c.tol);
    c.max_passes = j.value("max_passes", c.max_passes);
    c.seed = j.value("seed", c.seed);
}

void to_json(nlohmann::json& j, const SvmModel& m) {
    j = nlohmann::json{{"dual_coefficients", std::vector<double>(m.dual_coefficients.data(),
                                                                 m.dual_coefficients.data() + m.dual_coefficients.size())},
                       {"bias", m.bias},
                       {"support_indices", m.support_indices},
                       {"labels", m.labels},
                       {"config", m.config},
                       {"kernel_source", m.kernel_source},
                       {"kernel_hash", m.kernel_hash},
                       {"iterations", m.iterations},
                       {"converged", m.converged}};
}

void from_json(const nlohmann::json& j, SvmModel& m) {
    try {
        const auto coef = j.at("dual_coefficients").get<std::vector<double>>();
        m.dual_coefficients = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
        m.bias = j.at("bias").get<double>();
        m.support_indices = j.at("support_indices").get<std::vector<std::size_t>>();
        m.labels = j.at("labels").get<std::vector<int>>();
        m.config = j.value("config", SvmConfig{});
        m.kernel_source = j.value("kernel_source", nlohmann::json());
        m.kernel_hash = j.value("kernel_hash", std::string());
        m.iterations = j.value("iterations", std::size_t{0});
        m.converged = j.value("converged", false);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed SVM model: ") + e.what());
    }
    if (m.labels.size() != static_cast<std::size_t>(m.dual_coefficients.size())) {
        throw FormatError("SVM model has mismatched coefficient and label counts");
    }
}

std::string_view classical_kernel_name(ClassicalKernelKind k) {
    switch (k) {
        case ClassicalKernelKind::Linear: return "linear";
        case ClassicalKernelKind::Polynomial: return "polynomial";
        case ClassicalKernelKind::Rbf: return "rbf";
        case ClassicalKernelKind::Sigmoid: return "sigmoid";
    }
    return "unknown";
}

ClassicalKernelKind classical_kernel_from_name(std::string_view name) {
    if (name == "linear") return ClassicalKernelKind::Linear;
    if (name == "polynomial" || name == "poly") return ClassicalKernelKind::Polynomial;
    if (name == "rbf") return ClassicalKernelKind::Rbf;
    if (name == "sigmoid") return ClassicalKernelKind::Sigmoid;
    throw ArgumentError("unknown classical kernel '" + std::string(name) + "'");
}

ClassicalKernel resolve_gamma(ClassicalKernel kernel, const FeatureMatrix& train) {
    if (kernel.gamma) return kernel;
    if (train.size() == 0) throw ArgumentError("cannot derive gamma from an empty feature matrix");
    const double mean = train.mean();
    const double var = (train.array() - mean).square().mean();
    kernel.gamma = var > 0 ? 1.0 / (static_cast<double>(train.cols()) * var) : 1.0;
    return kernel;
}

KernelMatrix classical_kernel_matrix(const FeatureMatrix& x, const FeatureMatrix& y, const ClassicalKernel& kernel,
                                     KernelKind kind) {
    if (x.cols() != y.cols()) {
        throw ArgumentError("feature dimensions differ: " + std::to_string(x.cols()) + " vs " +
                            std::to_string(y.cols()));
    }
    const bool needs_gamma = kernel.kind != ClassicalKernelKind::Linear;
    if (needs_gamma && !(kernel.gamma && *kernel.gamma > 0)) {
        throw ArgumentError(std::string(classical_kernel_name(kernel.kind)) + " kernel needs a positive gamma");
    }
    if (kernel.kind == ClassicalKernelKind::Polynomial && kernel.degree < 1) {
        throw ArgumentError("polynomial degree must be at least 1");
    }
    const double gamma = kernel.gamma.value_or(0.0);
    Eigen::MatrixXd values(x.rows(), y.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < y.rows(); ++c) {
            const double dot = x.row(r).dot(y.row(c));
            switch (kernel.kind) {
                case ClassicalKernelKind::Linear: values(r, c) = dot; break;
                case ClassicalKernelKind::Polynomial:
                    values(r, c) = std::pow(gamma * dot + kernel.coef0, kernel.degree);
                    break;
                case ClassicalKernelKind::Rbf:
                    values(r, c) = std::exp(-gamma * (x.row(r) - y.row(c)).squaredNorm());
                    break;
                case ClassicalKernelKind::Sigmoid: values(r, c) = std::tanh(gamma * dot + kernel.coef0); break;
            }
        }
    }
    KernelMatrix k;
    k.values = std::move(values);
    k.kind = kind;
    k.source = nlohmann::json{{"classical", kernel}};
    k.source_hash = spec_hash(k.source);
    return k;
}

void to_json(nlohmann::json& j, const ClassicalKernel& k) {
    j = {{"kind", classical_kernel_name(k.kind)}, {"degree", k.degree}, {"coef0", k.coef0}};
    j["gamma"] = k.gamma ? nlohmann::json(*k.gamma) : nlohmann::json();
}

void from_json(const nlohmann::json& j, ClassicalKernel& k) {
    k = ClassicalKernel{};
    k.kind = classical_kernel_from_name(j.at("kind").get<std::string>());
    k.degree = j.value("degree", k.degree);
    k.coef0 = j.value("coef0", k.coef0);
    if (j.contains("gamma") && !j["gamma"].is_null()) k.gamma = j["gamma"].get<double>();
}

}  // namespace qk
