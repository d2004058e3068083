#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "qkernel/errors.hpp"
#include "qkernel/kernel.hpp"

using namespace qk;
using std::numbers::pi;

namespace {

FeatureMatrix random_features(int rows, int cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 2 * pi);
    FeatureMatrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
    return m;
}

std::vector<double> vec(const FeatureMatrix& m, int r) { return {m.row(r).data(), m.row(r).data() + m.cols()}; }

}  // namespace

TEST_CASE("fidelity with itself is one") {
    std::mt19937_64 rng(1);
    for (const auto& name : {"z", "zz", "pauli", "zzphi"}) {
        const auto spec = FeatureMapSpec::preset(name, 3);
        const auto x = random_features(1, 3, rng);
        CHECK(std::abs(fidelity(row_span(x, 0), row_span(x, 0), spec, ExactOverlap{}) - 1.0) < 1e-10);
    }
}

TEST_CASE("single-qubit Z map against a 2x2 hand computation") {
    // |phi(t)> = exp(i t Z) H |0>; oracle builds the 2-vector directly.
    const auto spec = FeatureMapSpec::z_map(1, 1);
    auto state = [](double t) {
        Eigen::Vector2cd plus(1 / std::sqrt(2.0), 1 / std::sqrt(2.0));
        return Eigen::Vector2cd(oracle::expi(t * oracle::pauli('Z')) * plus);
    };
    for (double y : {pi, pi / 2, pi / 4, 1.234}) {
        const double expected = std::norm(state(0.0).dot(state(y)));
        const std::vector<double> xs{0.0}, ys{y};
        CHECK(std::abs(fidelity(xs, ys, spec, ExactOverlap{}) - expected) < 1e-12);
    }
    // frozen values: cos^2(y)
    const std::vector<double> zero{0.0}, p{pi}, h{pi / 2}, q{pi / 4};
    CHECK(std::abs(fidelity(zero, p, spec, ExactOverlap{}) - 1.0) < 1e-12);
    CHECK(std::abs(fidelity(zero, h, spec, ExactOverlap{}) - 0.0) < 1e-12);
    CHECK(std::abs(fidelity(zero, q, spec, ExactOverlap{}) - 0.5) < 1e-12);
}

TEST_CASE("compute-uncompute all-zeros probability equals the exact overlap") {
    std::mt19937_64 rng(2);
    for (int n = 1; n <= 5; ++n) {
        for (const auto& name : {"z", "zz", "pauli", "zzphi"}) {
            const auto spec = FeatureMapSpec::preset(name, n);
            for (int t = 0; t < 5; ++t) {
                const auto x = random_features(2, n, rng);
                const auto c = compute_uncompute_circuit(spec, row_span(x, 0), row_span(x, 1));
                const double p = probability_all_zeros(apply_circuit(Statevector(n), c));
                CHECK(std::abs(p - fidelity(row_span(x, 0), row_span(x, 1), spec, ExactOverlap{})) < 1e-10);
            }
        }
    }
}

TEST_CASE("sampled fidelity at 200000 shots lies within three standard errors") {
    std::mt19937_64 rng(3);
    const auto spec = FeatureMapSpec::zz_map(3);
    for (int t = 0; t < 50; ++t) {
        const auto x = random_features(2, 3, rng);
        const double p = fidelity(row_span(x, 0), row_span(x, 1), spec, ExactOverlap{});
        const double est = fidelity(row_span(x, 0), row_span(x, 1), spec, ComputeUncompute{200000, static_cast<std::uint64_t>(t)});
        CHECK(std::abs(est - p) <= 3 * std::sqrt(p * (1 - p) / 200000) + 1e-12);
    }
}

TEST_CASE("mean absolute error halves when shots quadruple") {
    std::mt19937_64 rng(4);
    const auto spec = FeatureMapSpec::zz_map(3);
    double mad1 = 0, mad4 = 0;
    for (int t = 0; t < 100; ++t) {
        const auto x = random_features(2, 3, rng);
        const double p = fidelity(row_span(x, 0), row_span(x, 1), spec, ExactOverlap{});
        mad1 += std::abs(fidelity(row_span(x, 0), row_span(x, 1), spec, ComputeUncompute{1000, 10u + t}) - p);
        mad4 += std::abs(fidelity(row_span(x, 0), row_span(x, 1), spec, ComputeUncompute{4000, 500u + t}) - p);
    }
    const double ratio = mad1 / mad4;
    CHECK(ratio >= 2 * 0.7);
    CHECK(ratio <= 2 * 1.3);
}

TEST_CASE("train matrix") {
    std::mt19937_64 rng(5);
    const auto spec = FeatureMapSpec::zz_map(3);

    SUBCASE("single sample") {
        const auto k = evaluate_train_matrix(random_features(1, 3, rng), spec, ExactOverlap{});
        REQUIRE(k.rows() == 1);
        CHECK(k.values(0, 0) == 1.0);
        const auto s = evaluate_train_matrix(random_features(1, 3, rng), spec, ComputeUncompute{10, 1});
        CHECK(s.values(0, 0) == 1.0);
    }
    SUBCASE("20 samples need 190 estimated entries") {
        const auto x = random_features(20, 3, rng);
        const auto tasks = train_tasks(x, spec, 9);
        CHECK(tasks.size() == 190);
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (const auto& t : tasks) {
            CHECK(t.row < t.col);
            seen.insert({t.row, t.col});
        }
        CHECK(seen.size() == 190);
    }
    SUBCASE("exact matrix is symmetric, unit diagonal and PSD") {
        const auto x = random_features(12, 3, rng);
        const auto k = evaluate_train_matrix(x, spec, ExactOverlap{});
        CHECK((k.values - k.values.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
        CHECK((k.values.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-10);
        // eigen-solver oracle
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.values);
        CHECK(es.eigenvalues().minCoeff() >= -1e-8);
        CHECK(k.values.minCoeff() >= -1e-9);
        CHECK(k.values.maxCoeff() <= 1 + 1e-9);
        CHECK(k.source_hash == spec_hash(spec));
        CHECK_FALSE(k.shots_used.has_value());
    }
    SUBCASE("sampled matrix is exactly symmetric with shot-fraction entries") {
        const auto x = random_features(8, 3, rng);
        const auto k = evaluate_train_matrix(x, spec, ComputeUncompute{1000, 77});
        CHECK(k.values == k.values.transpose());
        CHECK(k.values.minCoeff() >= 0.0);
        CHECK(k.values.maxCoeff() <= 1.0);
        for (int i = 0; i < 8; ++i) {
            CHECK(k.values(i, i) == 1.0);
            for (int j = 0; j < 8; ++j) CHECK(std::abs(k.values(i, j) * 1000 - std::round(k.values(i, j) * 1000)) < 1e-9);
        }
        CHECK(k.shots_used == std::uint64_t{1000});
        // matches per-entry fidelity calls with derived seeds
        const double direct = fidelity(row_span(x, 2), row_span(x, 5), spec,
                                       ComputeUncompute{1000, entry_seed(77, KernelKind::Train, 2, 5)});
        CHECK(k.values(2, 5) == direct);
        // reproducible
        CHECK(evaluate_train_matrix(x, spec, ComputeUncompute{1000, 77}).values == k.values);
    }
    CHECK_THROWS_AS(evaluate_train_matrix(FeatureMatrix(0, 3), spec, ExactOverlap{}), ArgumentError);
    CHECK_THROWS_AS(evaluate_train_matrix(random_features(3, 2, rng), spec, ExactOverlap{}), ArgumentError);
    CHECK_THROWS_AS(evaluate_train_matrix(random_features(3, 3, rng), spec, ComputeUncompute{0, 1}), ArgumentError);
}

TEST_CASE("test matrix") {
    std::mt19937_64 rng(6);
    const auto spec = FeatureMapSpec::zzphi_map(3);
    const auto x = random_features(20, 3, rng);
    const auto y = random_features(10, 3, rng);

    const auto same = evaluate_test_matrix(x, x, spec, ExactOverlap{});
    const auto train = evaluate_train_matrix(x, spec, ExactOverlap{});
    CHECK((same.values - train.values).cwiseAbs().maxCoeff() < 1e-10);

    CHECK(test_tasks(y, x, spec, 1).size() == 200);
    const auto k = evaluate_test_matrix(y, x, spec, ExactOverlap{});
    CHECK(k.rows() == 10);
    CHECK(k.cols() == 20);
    CHECK(k.kind == KernelKind::Test);
    CHECK(k.values(3, 7) == doctest::Approx(fidelity(row_span(y, 3), row_span(x, 7), spec, ExactOverlap{})).epsilon(1e-12));

    const auto one = evaluate_test_matrix(y.topRows(1), x.topRows(1), spec, ComputeUncompute{500, 8});
    CHECK(one.values(0, 0) == fidelity(vec(y, 0), vec(x, 0), spec,
                                       ComputeUncompute{500, entry_seed(8, KernelKind::Test, 0, 0)}));

    CHECK_THROWS_AS(evaluate_test_matrix(FeatureMatrix(0, 3), x, spec, ExactOverlap{}), ArgumentError);
    CHECK_THROWS_AS(evaluate_test_matrix(y, FeatureMatrix(0, 3), spec, ExactOverlap{}), ArgumentError);
}

TEST_CASE("job counting") {
    CHECK(count_jobs(20, 10) == 390);
    CHECK(count_jobs(1, 0) == 0);
    CHECK(count_jobs(8, 4) == 60);
    for (std::uint64_t n = 1; n <= 12; ++n) {
        for (std::uint64_t m = 0; m <= 6; ++m) {
            std::uint64_t pairs = 0;
            for (std::uint64_t i = 0; i < n; ++i)
                for (std::uint64_t j = i + 1; j < n; ++j) ++pairs;
            CHECK(count_jobs(n, m) == pairs + n * m);
        }
    }
}

TEST_CASE("entry seeds differ between train and test") {
    CHECK(entry_seed(1, KernelKind::Train, 0, 1) != entry_seed(1, KernelKind::Test, 0, 1));
    CHECK(entry_seed(1, KernelKind::Train, 0, 1) != entry_seed(1, KernelKind::Train, 1, 0));
    CHECK(entry_seed(1, KernelKind::Train, 0, 1) == entry_seed(1, KernelKind::Train, 0, 1));
}

TEST_CASE("assembling from entries reproduces direct evaluation") {
    std::mt19937_64 rng(7);
    const auto spec = FeatureMapSpec::zz_map(2);
    const auto x = random_features(5, 2, rng);
    const ComputeUncompute method{300, 4};
    std::map<EntryKey, double> entries;
    for (const auto& t : train_tasks(x, spec, method.seed)) {
        entries[{t.kind, t.row, t.col}] = sample_all_zeros(apply_circuit(Statevector(2), t.circuit), method.shots, t.seed);
    }
    const auto k = assemble_kernel_matrix(KernelKind::Train, 5, 5, entries, spec, method);
    CHECK(k.values == evaluate_train_matrix(x, spec, method).values);
    entries.erase(entries.begin());
    CHECK_THROWS_AS(assemble_kernel_matrix(KernelKind::Train, 5, 5, entries, spec, method), ArgumentError);
}

TEST_CASE("eigenvalue clipping") {
    KernelMatrix k;
    k.values = Eigen::MatrixXd(2, 2);
    k.values << 1.0, 1.2, 1.2, 1.0;  // eigenvalues 2.2, -0.2
    CHECK(min_eigenvalue(k.values) < -0.19);
    clip_negative_eigenvalues(k);
    CHECK(min_eigenvalue(k.values) >= -1e-12);
    CHECK(k.values == k.values.transpose());
}

TEST_CASE("kernel CSV round trip") {
    std::mt19937_64 rng(8);
    const auto spec = FeatureMapSpec::zz_map(2);
    const auto x = random_features(4, 2, rng);
    const auto dir = std::filesystem::temp_directory_path() / "qk_kernel_io";
    std::filesystem::remove_all(dir);

    const auto k = evaluate_train_matrix(x, spec, ComputeUncompute{1000, 5});
    write_kernel_csv(dir / "k.csv", k);
    write_kernel_sidecar(dir / "k.csv", k);
    const auto back = read_kernel_csv(dir / "k.csv");
    CHECK(back.values == k.values);
    CHECK(back.kind == KernelKind::Train);
    CHECK(back.source_hash == k.source_hash);
    CHECK(back.shots_used == std::uint64_t{1000});
    REQUIRE(back.method.has_value());
    CHECK(std::get<ComputeUncompute>(*back.method).seed == 5);
    CHECK(back.source.get<FeatureMapSpec>() == spec);

    const auto e = evaluate_test_matrix(x.topRows(2), x, spec, ExactOverlap{});
    write_kernel_csv(dir / "e.csv", e);
    const auto eb = read_kernel_csv(dir / "e.csv");
    CHECK(eb.values == e.values);  // %.17g is exact for doubles
    CHECK(eb.kind == KernelKind::Test);

    {
        std::ofstream(dir / "bad.csv") << "1,2\n3,4\n";
        CHECK_THROWS_AS(read_kernel_csv(dir / "bad.csv"), FormatError);
        std::ofstream(dir / "short.csv") << "# kind=train,method=exact,shots=none,spec_hash=0,rows=2,cols=2\n1,0\n";
        CHECK_THROWS_AS(read_kernel_csv(dir / "short.csv"), FormatError);
    }
    std::filesystem::remove_all(dir);
}
