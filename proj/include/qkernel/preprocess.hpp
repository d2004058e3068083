#pragma once

// Raw bytes -> grayscale image -> fixed-size image -> PCA -> angles, plus dataset handling.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "qkernel/kernel.hpp"

namespace qk {

struct GrayscaleImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    bool operator==(const GrayscaleImage&) const = default;
};

/// Image width by file size: the first breakpoint whose size bound covers the input wins.
struct WidthSchedule {
    struct Breakpoint {
        std::size_t max_bytes;
        int width;
        bool operator==(const Breakpoint&) const = default;
    };
    std::vector<Breakpoint> breakpoints;
    /// Used when the input is larger than every breakpoint.
    int fallback_width = 1024;

    /// 32 up to 10 KB, then 64, 128, 256, 384, 512, 768 at 30/60/100/200/500/1000 KB, else 1024.
    static WidthSchedule standard();
    int width_for(std::size_t bytes) const;
    void validate() const;
    bool operator==(const WidthSchedule&) const = default;
};

GrayscaleImage bytes_to_image(std::span<const std::uint8_t> data, const WidthSchedule& schedule = WidthSchedule::standard());

/// Nearest-neighbour scale that keeps the aspect ratio and fits inside the target, placed at the
/// top-left corner of a zero image of exactly the target size.
GrayscaleImage resize(const GrayscaleImage& img, int target_width, int target_height);

Eigen::RowVectorXd flatten(const GrayscaleImage& img);

struct PcaModel {
    Eigen::RowVectorXd mean;
    /// k x dims, rows are orthonormal principal directions in decreasing variance order.
    Eigen::MatrixXd components;
    Eigen::VectorXd explained_variance;

    Eigen::Index dims() const { return mean.size(); }
    Eigen::Index k() const { return components.rows(); }
};

/// Sign convention: the largest-magnitude entry of every component is positive.
PcaModel fit_pca(const FeatureMatrix& x, Eigen::Index k);
FeatureMatrix transform_pca(const PcaModel& model, const FeatureMatrix& x);
FeatureMatrix inverse_transform_pca(const PcaModel& model, const FeatureMatrix& z);

/// Per-column min-max map fitted on one matrix and applied (with clamping) to others.
struct AngleScaler {
    Eigen::RowVectorXd data_min;
    Eigen::RowVectorXd data_max;
    double lo = 0.0;
    double hi = 0.0;
};

AngleScaler fit_angle_scaler(const FeatureMatrix& x, double lo, double hi);
/// Constant columns map to the midpoint of [lo, hi].
FeatureMatrix apply_angle_scaler(const AngleScaler& s, const FeatureMatrix& x);
FeatureMatrix scale_to_angles(const FeatureMatrix& x, double lo, double hi);

struct Dataset {
    FeatureMatrix features;
    std::vector<int> labels;
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

/// Class-balanced disjoint split; each part is half +1 and half -1.
std::pair<Dataset, Dataset> balanced_split(const Dataset& ds, std::size_t n_train, std::size_t n_test,
                                           std::uint64_t seed);

/// Two unit-variance Gaussian blobs at +-separation/2 along a random unit direction.
Dataset generate_synthetic(std::size_t n, int dims, double separation, std::uint64_t seed);

/// CSV with a `f0,...,label` header and one sample per row; provenance goes to `<path>.json`.
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);

/// `filename,label` rows with label 1 (malware, +1) or 0 (benign, -1). A header row is optional.
std::vector<std::pair<std::string, int>> read_labels_csv(const std::filesystem::path& path);

struct ImagePipeline {
    WidthSchedule schedule = WidthSchedule::standard();
    int image_width = 64;
    int image_height = 64;
};

/// One flattened, resized image per labelled file. Unlisted files in the directory are ignored.
Dataset load_image_corpus(const std::filesystem::path& input_dir, const std::filesystem::path& labels_csv,
                          const ImagePipeline& pipeline = {});

struct FeaturePipeline {
    Eigen::Index components = 0;
    double angle_lo = 0.0;
    double angle_hi = 6.283185307179586;
    /// Fit PCA and the scaler on train and test together instead of train only.
    bool fit_on_all = false;
};

struct ReducedData {
    Dataset train;
    Dataset test;
    PcaModel pca;
    AngleScaler scaler;
};

/// PCA to `components` columns then angle scaling; test may be empty.
ReducedData reduce_features(const Dataset& train, const Dataset& test, const FeaturePipeline& pipeline);

void to_json(nlohmann::json& j, const WidthSchedule& s);
void from_json(const nlohmann::json& j, WidthSchedule& s);
void to_json(nlohmann::json& j, const PcaModel& m);
void from_json(const nlohmann::json& j, PcaModel& m);
void to_json(nlohmann::json& j, const AngleScaler& s);
void from_json(const nlohmann::json& j, AngleScaler& s);

}  // namespace qk
