#include "qkernel/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qkernel/errors.hpp"
#include "qkernel/io.hpp"
#include "qkernel/rng.hpp"

namespace qk {

namespace fs = std::filesystem;

WidthSchedule WidthSchedule::standard() {
    constexpr std::size_t kb = 1024;
    WidthSchedule s;
    s.breakpoints = {{10 * kb, 32},   {30 * kb, 64},   {60 * kb, 128},  {100 * kb, 256},
                     {200 * kb, 384}, {500 * kb, 512}, {1000 * kb, 768}};
    s.fallback_width = 1024;
    return s;
}

int WidthSchedule::width_for(std::size_t bytes) const {
    for (const auto& b : breakpoints)
        if (bytes <= b.max_bytes) return b.width;
    return fallback_width;
}

void WidthSchedule::validate() const {
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        if (breakpoints[i].width <= 0) throw ArgumentError("schedule widths must be positive");
        if (i > 0 && breakpoints[i].max_bytes <= breakpoints[i - 1].max_bytes) {
            throw ArgumentError("schedule size bounds must be strictly increasing");
        }
    }
    if (fallback_width <= 0) throw ArgumentError("schedule fallback width must be positive");
}

GrayscaleImage bytes_to_image(std::span<const std::uint8_t> data, const WidthSchedule& schedule) {
    if (data.empty()) throw ArgumentError("cannot build an image from empty input");
    schedule.validate();
    GrayscaleImage img;
    img.width = schedule.width_for(data.size());
    const std::size_t w = static_cast<std::size_t>(img.width);
    img.height = static_cast<int>((data.size() + w - 1) / w);
    img.pixels.assign(static_cast<std::size_t>(img.height) * w, 0);
    std::copy(data.begin(), data.end(), img.pixels.begin());
    return img;
}

GrayscaleImage resize(const GrayscaleImage& img, int target_width, int target_height) {
    if (target_width <= 0 || target_height <= 0) throw ArgumentError("target image size must be positive");
    if (img.width <= 0 || img.height <= 0) throw ArgumentError("cannot resize an empty image");
    const std::int64_t w = img.width, h = img.height, tw = target_width, th = target_height;
    std::int64_t new_w, new_h;
    if (w * th >= h * tw) {
        new_w = tw;
        new_h = std::max<std::int64_t>(1, h * tw / w);
    } else {
        new_h = th;
        new_w = std::max<std::int64_t>(1, w * th / h);
    }
    GrayscaleImage out;
    out.width = target_width;
    out.height = target_height;
    out.pixels.assign(static_cast<std::size_t>(tw * th), 0);
    for (std::int64_t dy = 0; dy < new_h; ++dy) {
        const std::int64_t sy = dy * h / new_h;
        for (std::int64_t dx = 0; dx < new_w; ++dx) {
            const std::int64_t sx = dx * w / new_w;
            out.pixels[static_cast<std::size_t>(dy * tw + dx)] = img.pixels[static_cast<std::size_t>(sy * w + sx)];
        }
    }
    return out;
}

Eigen::RowVectorXd flatten(const GrayscaleImage& img) {
    Eigen::RowVectorXd v(static_cast<Eigen::Index>(img.pixels.size()));
    for (std::size_t i = 0; i < img.pixels.size(); ++i) v[static_cast<Eigen::Index>(i)] = img.pixels[i];
    return v;
}

namespace {

// Modified Gram-Schmidt on the rows, in order. Rows that vanish are replaced by the first
// standard basis vector that is still independent.
void orthonormalize_rows(Eigen::MatrixXd& m) {
    Eigen::Index next_basis = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index p = 0; p < r; ++p) m.row(r) -= m.row(r).dot(m.row(p)) * m.row(p);
        while (m.row(r).norm() < 1e-6) {
            if (next_basis >= m.cols()) throw ConfigurationError("cannot complete an orthonormal basis");
            m.row(r).setZero();
            m(r, next_basis++) = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index p = 0; p < r; ++p) m.row(r) -= m.row(r).dot(m.row(p)) * m.row(p);
        }
        m.row(r).normalize();
    }
}

void fix_signs(Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Eigen::Index arg = 0;
        m.row(r).cwiseAbs().maxCoeff(&arg);
        if (m(r, arg) < 0) m.row(r) *= -1.0;
    }
}

}  // namespace

PcaModel fit_pca(const FeatureMatrix& x, Eigen::Index k) {
    const Eigen::Index n = x.rows(), d = x.cols();
    if (k < 1 || k > std::min(n, d)) {
        throw ArgumentError("PCA dimension " + std::to_string(k) + " must be between 1 and min(samples, dims) = " +
                            std::to_string(std::min(n, d)));
    }
    PcaModel model;
    model.mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - model.mean;
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    model.components.resize(k, d);
    model.explained_variance.resize(k);

    if (d <= n) {
        const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        for (Eigen::Index i = 0; i < k; ++i) {
            model.components.row(i) = eig.eigenvectors().col(d - 1 - i).transpose();
            model.explained_variance[i] = std::max(0.0, eig.eigenvalues()[d - 1 - i]);
        }
    } else {
        // More dimensions than samples: eigenvectors v of the Gram matrix give components
        // X^T v / sqrt(lambda) with the same nonzero eigenvalues.
        const Eigen::MatrixXd gram = centered * centered.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
        const double top = std::max(eig.eigenvalues()[n - 1], 0.0);
        for (Eigen::Index i = 0; i < k; ++i) {
            const double lambda = eig.eigenvalues()[n - 1 - i];
            if (lambda > 1e-10 * top && lambda > 0) {
                model.components.row(i) = (centered.transpose() * eig.eigenvectors().col(n - 1 - i)).transpose() / std::sqrt(lambda);
                model.explained_variance[i] = lambda / denom;
            } else {
                model.components.row(i).setZero();
                model.explained_variance[i] = 0.0;
            }
        }
    }
    orthonormalize_rows(model.components);
    fix_signs(model.components);
    return model;
}

FeatureMatrix transform_pca(const PcaModel& model, const FeatureMatrix& x) {
    if (x.cols() != model.dims()) {
        throw ArgumentError("PCA was fitted on " + std::to_string(model.dims()) + " dims, got " +
                            std::to_string(x.cols()));
    }
    return (x.rowwise() - model.mean) * model.components.transpose();
}

FeatureMatrix inverse_transform_pca(const PcaModel& model, const FeatureMatrix& z) {
    if (z.cols() != model.k()) throw ArgumentError("reduced matrix has the wrong number of columns");
    return (z * model.components).rowwise() + model.mean;
}

AngleScaler fit_angle_scaler(const FeatureMatrix& x, double lo, double hi) {
    if (!(hi > lo)) throw ArgumentError("angle range needs hi > lo");
    if (x.rows() == 0) throw ArgumentError("cannot fit a scaler on zero samples");
    return {x.colwise().minCoeff(), x.colwise().maxCoeff(), lo, hi};
}

FeatureMatrix apply_angle_scaler(const AngleScaler& s, const FeatureMatrix& x) {
    if (x.cols() != s.data_min.size()) throw ArgumentError("scaler was fitted on a different number of columns");
    FeatureMatrix out(x.rows(), x.cols());
    const double mid = s.lo + (s.hi - s.lo) / 2;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double mn = s.data_min[c], span = s.data_max[c] - s.data_min[c];
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            out(r, c) = span > 0 ? std::clamp(s.lo + (x(r, c) - mn) / span * (s.hi - s.lo), s.lo, s.hi) : mid;
        }
    }
    return out;
}

FeatureMatrix scale_to_angles(const FeatureMatrix& x, double lo, double hi) {
    return apply_angle_scaler(fit_angle_scaler(x, lo, hi), x);
}

void Dataset::validate() const {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw ArgumentError("dataset has " + std::to_string(features.rows()) + " rows but " +
                            std::to_string(labels.size()) + " labels");
    }
    for (int v : labels)
        if (v != 1 && v != -1) throw ArgumentError("dataset labels must be +1 or -1");
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(idx.size()), ds.features.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.features.row(static_cast<Eigen::Index>(r)) = ds.features.row(static_cast<Eigen::Index>(idx[r]));
        out.labels.push_back(ds.labels[idx[r]]);
    }
    out.provenance = ds.provenance;
    return out;
}

}  // namespace

std::pair<Dataset, Dataset> balanced_split(const Dataset& ds, std::size_t n_train, std::size_t n_test,
                                           std::uint64_t seed) {
    ds.validate();
    if (n_train % 2 != 0 || n_test % 2 != 0) throw ArgumentError("split sizes must be even");
    if (n_train == 0) throw ArgumentError("training split must not be empty");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < ds.size(); ++i) (ds.labels[i] == 1 ? pos : neg).push_back(i);
    const std::size_t need = (n_train + n_test) / 2;
    if (pos.size() < need || neg.size() < need) {
        throw ArgumentError("balanced split needs " + std::to_string(need) + " samples per class, have " +
                            std::to_string(pos.size()) + " positive and " + std::to_string(neg.size()) + " negative");
    }
    Rng rng(seed);
    shuffle(pos.begin(), pos.end(), rng);
    shuffle(neg.begin(), neg.end(), rng);
    const std::size_t ht = n_train / 2, hs = n_test / 2;
    std::vector<std::size_t> train(pos.begin(), pos.begin() + ht), test(pos.begin() + ht, pos.begin() + ht + hs);
    train.insert(train.end(), neg.begin(), neg.begin() + ht);
    test.insert(test.end(), neg.begin() + ht, neg.begin() + ht + hs);
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    auto a = take_rows(ds, train);
    auto b = take_rows(ds, test);
    a.provenance["split"] = {{"part", "train"}, {"seed", seed}, {"indices", train}};
    b.provenance["split"] = {{"part", "test"}, {"seed", seed}, {"indices", test}};
    return {std::move(a), std::move(b)};
}

Dataset generate_synthetic(std::size_t n, int dims, double separation, std::uint64_t seed) {
    if (n % 2 != 0) throw ArgumentError("synthetic dataset size must be even");
    if (dims < 1) throw ArgumentError("synthetic dataset needs at least one dimension");
    Rng rng(seed);
    Eigen::RowVectorXd dir(dims);
    do {
        for (int d = 0; d < dims; ++d) dir[d] = standard_normal(rng);
    } while (dir.norm() == 0.0);
    dir.normalize();
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), dims);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i % 2 == 0 ? 1 : -1;
        for (int d = 0; d < dims; ++d) {
            ds.features(static_cast<Eigen::Index>(i), d) = standard_normal(rng) + label * separation / 2 * dir[d];
        }
        ds.labels.push_back(label);
    }
    ds.provenance["synthetic"] = {{"n", n}, {"dims", dims}, {"separation", separation}, {"seed", seed}};
    return ds;
}

void write_dataset(const fs::path& path, const Dataset& ds) {
    ds.validate();
    std::ostringstream out;
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) out << 'f' << c << ',';
    out << "label\n";
    for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < ds.features.cols(); ++c) out << io::format_double(ds.features(r, c)) << ',';
        out << ds.labels[static_cast<std::size_t>(r)] << '\n';
    }
    io::write_file_atomic(path, out.str());
    io::write_json_atomic(fs::path(path.string() + ".json"), ds.provenance);
}

Dataset read_dataset(const fs::path& path) {
    if (!fs::exists(path)) throw ArgumentError("dataset file not found: " + path.string());
    std::istringstream in(io::read_file(path));
    std::string line;
    std::vector<std::vector<double>> rows;
    Dataset ds;
    std::size_t width = 0, line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = io::trim(line);
        if (text.empty() || text[0] == '#') continue;
        auto fields = io::split(text, ',');
        if (fields.size() < 2) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": too few fields");
        if (rows.empty() && width == 0 && io::trim(fields.back()) == "label") {
            width = fields.size();
            continue;
        }
        if (width == 0) width = fields.size();
        if (fields.size() != width) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                              " fields");
        }
        std::vector<double> row;
        for (std::size_t i = 0; i + 1 < fields.size(); ++i) row.push_back(io::parse_double(io::trim(fields[i])));
        const auto label = io::parse_int(io::trim(fields.back()));
        if (label != 1 && label != -1) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": label must be +1 or -1");
        }
        rows.push_back(std::move(row));
        ds.labels.push_back(static_cast<int>(label));
    }
    const Eigen::Index cols = width > 0 ? static_cast<Eigen::Index>(width - 1) : 0;
    ds.features.resize(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (Eigen::Index c = 0; c < cols; ++c) ds.features(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    const fs::path sidecar(path.string() + ".json");
    if (fs::exists(sidecar)) ds.provenance = io::read_json(sidecar);
    return ds;
}

std::vector<std::pair<std::string, int>> read_labels_csv(const fs::path& path) {
    if (!fs::exists(path)) throw ArgumentError("labels file not found: " + path.string());
    std::istringstream in(io::read_file(path));
    std::string line;
    std::vector<std::pair<std::string, int>> out;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = io::trim(line);
        if (text.empty() || text[0] == '#') continue;
        const auto fields = io::split(text, ',');
        if (fields.size() != 2) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected filename,label");
        }
        const auto name = io::trim(fields[0]);
        const auto label = io::trim(fields[1]);
        if (first && label != "0" && label != "1") {
            first = false;
            continue;  // header
        }
        first = false;
        if (label != "0" && label != "1") {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": label must be 0 or 1");
        }
        if (!seen.insert(name).second) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": duplicate entry " + name);
        }
        out.emplace_back(name, label == "1" ? 1 : -1);
    }
    return out;
}

Dataset load_image_corpus(const fs::path& input_dir, const fs::path& labels_csv, const ImagePipeline& pipeline) {
    if (!fs::is_directory(input_dir)) throw ArgumentError("input directory not found: " + input_dir.string());
    const auto entries = read_labels_csv(labels_csv);
    if (entries.empty()) throw ArgumentError("labels file lists no samples");
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(entries.size()),
                       static_cast<Eigen::Index>(pipeline.image_width) * pipeline.image_height);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& [name, label] = entries[i];
        const fs::path file = input_dir / name;
        if (!fs::is_regular_file(file)) throw ArgumentError("file listed in labels is missing: " + name);
        const auto bytes = io::read_bytes(file);
        if (bytes.empty()) throw ArgumentError("file is empty: " + name);
        const auto img = resize(bytes_to_image(std::span<const std::uint8_t>(bytes.data(), bytes.size()), pipeline.schedule),
                                pipeline.image_width, pipeline.image_height);
        ds.features.row(static_cast<Eigen::Index>(i)) = flatten(img);
        ds.labels.push_back(label);
        names.push_back(name);
    }
    ds.provenance["sources"] = names;
    ds.provenance["schedule"] = pipeline.schedule;
    ds.provenance["image_size"] = {pipeline.image_width, pipeline.image_height};
    return ds;
}

ReducedData reduce_features(const Dataset& train, const Dataset& test, const FeaturePipeline& pipeline) {
    train.validate();
    test.validate();
    if (test.size() > 0 && test.features.cols() != train.features.cols()) {
        throw ArgumentError("train and test have different feature dimensions");
    }
    FeatureMatrix fit_rows = train.features;
    if (pipeline.fit_on_all && test.size() > 0) {
        fit_rows.resize(train.features.rows() + test.features.rows(), train.features.cols());
        fit_rows << train.features, test.features;
    }
    ReducedData out;
    out.pca = fit_pca(fit_rows, pipeline.components);
    const FeatureMatrix reduced_fit = transform_pca(out.pca, fit_rows);
    out.scaler = fit_angle_scaler(reduced_fit, pipeline.angle_lo, pipeline.angle_hi);

    const auto finish = [&](const Dataset& in) {
        Dataset d;
        d.labels = in.labels;
        d.features = in.size() > 0 ? apply_angle_scaler(out.scaler, transform_pca(out.pca, in.features))
                                   : FeatureMatrix(0, pipeline.components);
        d.provenance = in.provenance;
        d.provenance["pca"] = out.pca;
        d.provenance["scaler"] = out.scaler;
        d.provenance["fit_on"] = pipeline.fit_on_all ? "train+test" : "train";
        return d;
    };
    out.train = finish(train);
    out.test = finish(test);
    return out;
}

namespace {

std::vector<double> to_vector(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
    return {v.data(), v.data() + v.size()};
}

Eigen::RowVectorXd from_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void to_json(nlohmann::json& j, const WidthSchedule& s) {
    j = nlohmann::json::object();
    auto& bps = j["breakpoints"] = nlohmann::json::array();
    for (const auto& b : s.breakpoints) bps.push_back({b.max_bytes, b.width});
    j["fallback_width"] = s.fallback_width;
}

void from_json(const nlohmann::json& j, WidthSchedule& s) {
    s = WidthSchedule{};
    for (const auto& b : j.at("breakpoints")) s.breakpoints.push_back({b.at(0).get<std::size_t>(), b.at(1).get<int>()});
    s.fallback_width = j.value("fallback_width", s.fallback_width);
    s.validate();
}

void to_json(nlohmann::json& j, const PcaModel& m) {
    j = nlohmann::json::object();
    j["mean"] = to_vector(m.mean);
    auto& rows = j["components"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.components.rows(); ++r) rows.push_back(to_vector(m.components.row(r)));
    j["explained_variance"] = std::vector<double>(m.explained_variance.data(),
                                                  m.explained_variance.data() + m.explained_variance.size());
}

void from_json(const nlohmann::json& j, PcaModel& m) {
    m.mean = from_vector(j.at("mean").get<std::vector<double>>());
    const auto& rows = j.at("components");
    m.components.resize(static_cast<Eigen::Index>(rows.size()), m.mean.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = rows[r].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != m.mean.size()) throw FormatError("PCA component has wrong length");
        m.components.row(static_cast<Eigen::Index>(r)) = from_vector(row);
    }
    const auto var = j.at("explained_variance").get<std::vector<double>>();
    m.explained_variance = Eigen::Map<const Eigen::VectorXd>(var.data(), static_cast<Eigen::Index>(var.size()));
}

void to_json(nlohmann::json& j, const AngleScaler& s) {
    j = {{"data_min", to_vector(s.data_min)}, {"data_max", to_vector(s.data_max)}, {"range", {s.lo, s.hi}}};
}

void from_json(const nlohmann::json& j, AngleScaler& s) {
    s.data_min = from_vector(j.at("data_min").get<std::vector<double>>());
    s.data_max = from_vector(j.at("data_max").get<std::vector<double>>());
    s.lo = j.at("range").at(0).get<double>();
    s.hi = j.at("range").at(1).get<double>();
}

}  // namespace qk
