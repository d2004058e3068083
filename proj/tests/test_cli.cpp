#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "qkernel/cli.hpp"
#include "qkernel/errors.hpp"
#include "qkernel/io.hpp"
#include "qkernel/kernel.hpp"
#include "qkernel/preprocess.hpp"

using namespace qk;
namespace fs = std::filesystem;
using fixtures::TempDir;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string p(const fs::path& path) { return path.string(); }

std::size_t count_files(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
    return n;
}

}  // namespace

TEST_CASE("angle range parsing") {
    CHECK(cli::parse_angle_range("0,2pi") == std::pair<double, double>{0.0, 2 * std::numbers::pi});
    CHECK(cli::parse_angle_range("-pi/2, pi/2") == std::pair<double, double>{-std::numbers::pi / 2, std::numbers::pi / 2});
    CHECK(cli::parse_angle_range("0,1") == std::pair<double, double>{0.0, 1.0});
    CHECK_THROWS_AS(cli::parse_angle_range("1,0"), ArgumentError);
    CHECK_THROWS_AS(cli::parse_angle_range("0"), ArgumentError);
    CHECK_THROWS_AS(cli::parse_angle_range("0,2pix"), ArgumentError);
}

TEST_CASE("usage errors exit with 2, help with 0") {
    CHECK(invoke({}).code == cli::kExitUsage);
    CHECK(invoke({"--help"}).code == cli::kExitOk);
    CHECK(invoke({"kernel", "--shots", "many"}).code == cli::kExitUsage);
    CHECK(invoke({"kernel", "--direct", "--backend", "ibm_torino"}).code == cli::kExitUsage);
    CHECK(invoke({"train", "--kernel", "/nonexistent.csv", "--dataset", "/nonexistent.csv", "--out", "m.json"}).code ==
          cli::kExitUsage);
}

TEST_CASE("exact direct kernel of one sample is [[1.0]]") {
    TempDir dir("qk_cli_one");
    std::ofstream(dir.path / "one.csv") << "f0,f1,label\n0.3,1.2,1\n";
    const auto r = invoke({"kernel", "--dataset", p(dir.path / "one.csv"), "--feature-map", "zz", "--method", "exact",
                        "--direct", "--out", p(dir.path / "k")});
    REQUIRE(r.code == 0);
    const auto k = read_kernel_csv(dir.path / "k" / "train_kernel.csv");
    CHECK(k.rows() == 1);
    CHECK(k.values(0, 0) == 1.0);
}

TEST_CASE("split submit, run, collect on a 20/10 split") {
    TempDir dir("qk_cli_split");
    const auto data = dir.path / "d.csv";
    REQUIRE(invoke({"synth", "--samples", "30", "--train", "20", "--test", "10", "--seed", "1", "--out", p(data)}).code == 0);
    const std::vector<std::string> inputs{"--dataset", p(dir.path / "d_train.csv"), "--test-dataset",
                                          p(dir.path / "d_test.csv"), "--feature-map", "zz", "--seed", "9"};
    const auto session = dir.path / "session";
    auto with = [&](std::vector<std::string> extra) {
        std::vector<std::string> args{"kernel"};
        args.insert(args.end(), extra.begin(), extra.end());
        return args;
    };
    auto submit = with({"--backend", "ibm_torino", "--mode", "submit", "--session-dir", p(session)});
    submit.insert(submit.end(), inputs.begin(), inputs.end());
    const auto s = invoke(submit);
    REQUIRE(s.code == 0);
    CHECK(count_files(session / "jobs") == 390);

    const auto pending =
        invoke(with({"--backend", "ibm_torino", "--mode", "collect", "--session-dir", p(session), "--out", p(dir.path / "k")}));
    CHECK(pending.code == cli::kExitPending);
    CHECK(pending.err.find("-000389") != std::string::npos);

    const auto run = invoke(with({"--backend", "ibm_torino", "--mode", "run", "--session-dir", p(session), "--budget", "60"}));
    CHECK(run.code == 0);
    CHECK(run.out.find("quantum time 5850 s (97.5 min)") != std::string::npos);
    CHECK(run.err.find("exceeds the budget") != std::string::npos);

    const auto collect =
        invoke(with({"--backend", "ibm_torino", "--mode", "collect", "--session-dir", p(session), "--out", p(dir.path / "k")}));
    REQUIRE(collect.code == 0);

    auto direct = with({"--method", "sampled", "--direct", "--out", p(dir.path / "kd")});
    direct.insert(direct.end(), inputs.begin(), inputs.end());
    REQUIRE(invoke(direct).code == 0);
    for (const char* f : {"train_kernel.csv", "test_kernel.csv"}) {
        CHECK(io::read_file(dir.path / "k" / f) == io::read_file(dir.path / "kd" / f));
    }

    // Running collect again rewrites identical files.
    const auto before = io::read_file(dir.path / "k" / "train_kernel.csv");
    REQUIRE(invoke(with({"--backend", "ibm_torino", "--mode", "collect", "--session-dir", p(session), "--out",
                      p(dir.path / "k")})).code == 0);
    CHECK(io::read_file(dir.path / "k" / "train_kernel.csv") == before);
}

TEST_CASE("backend rejections exit with 4 and leave no jobs") {
    TempDir dir("qk_cli_reject");
    REQUIRE(invoke({"synth", "--samples", "30", "--train", "20", "--test", "10", "--out", p(dir.path / "d.csv")}).code == 0);
    const std::vector<std::string> base{"kernel", "--dataset", p(dir.path / "d_train.csv"), "--test-dataset",
                                        p(dir.path / "d_test.csv"), "--backend", "ibm_algiers", "--mode", "submit"};
    auto single = base;
    single.insert(single.end(), {"--session-dir", p(dir.path / "s1"), "--circuits-per-job", "0"});
    const auto r1 = invoke(single);
    CHECK(r1.code == cli::kExitBackendRejected);
    CHECK(r1.err.find("390") != std::string::npos);
    CHECK(count_files(dir.path / "s1" / "jobs") == 0);
    CHECK_FALSE(fs::exists(dir.path / "s1" / "session.json"));

    auto raw = base;
    raw.insert(raw.end(), {"--session-dir", p(dir.path / "s2"), "--no-transpile"});
    const auto r2 = invoke(raw);
    CHECK(r2.code == cli::kExitBackendRejected);
    CHECK(r2.err.find("'h'") != std::string::npos);

    auto exact = base;
    exact.insert(exact.end(), {"--session-dir", p(dir.path / "s3"), "--method", "exact"});
    CHECK(invoke(exact).code == cli::kExitUsage);
}

TEST_CASE("a locked session directory is refused") {
    TempDir dir("qk_cli_lock");
    std::ofstream(dir.path / ".lock") << "12345\n";
    const auto r = invoke({"kernel", "--backend", "ibm_torino", "--mode", "run", "--session-dir", p(dir.path)});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("locked") != std::string::npos);
}

TEST_CASE("train, predict, evaluate round trip") {
    TempDir dir("qk_cli_roundtrip");
    const auto d = [&](const char* f) { return p(dir.path / f); };
    for (const char* seed : {"0", "3", "7"}) {
        REQUIRE(invoke({"synth", "--samples", "200", "--train", "100", "--test", "100", "--separation", "6",
                     "--angle-range", "0,1", "--seed", seed, "--out", d("r.csv")}).code == 0);
        REQUIRE(invoke({"kernel", "--dataset", d("r_train.csv"), "--test-dataset", d("r_test.csv"), "--feature-map", "zz",
                     "--seed", seed, "--out", d("k")}).code == 0);
        REQUIRE(invoke({"train", "--kernel", d("k/train_kernel.csv"), "--dataset", d("r_train.csv"), "--out", d("m.json")})
                    .code == 0);
        REQUIRE(invoke({"predict", "--model", d("m.json"), "--kernel", d("k/test_kernel.csv"), "--out", d("p.csv")}).code ==
                0);
        const auto e = invoke({"evaluate", "--predictions", d("p.csv"), "--dataset", d("r_test.csv"), "--out", d("m/metrics.json")});
        REQUIRE(e.code == 0);
        CHECK(io::read_json(dir.path / "m" / "metrics.json")["accuracy"].get<double>() >= 0.95);
    }

    // Perfect predictions.
    const auto test = read_dataset(dir.path / "r_test.csv");
    std::ofstream perfect(dir.path / "perfect.csv");
    perfect << "index,decision,prediction\n";
    for (std::size_t i = 0; i < test.size(); ++i) perfect << i << ",1," << test.labels[i] << '\n';
    perfect.close();
    const auto e = invoke({"evaluate", "--predictions", d("perfect.csv"), "--dataset", d("r_test.csv"), "--out", d("pm.json")});
    const auto report = io::read_json(dir.path / "pm.json");
    for (const char* key : {"accuracy", "precision", "recall", "f1"}) CHECK(report[key].get<double>() == 1.0);

    // A test kernel from another feature map is refused.
    REQUIRE(invoke({"kernel", "--dataset", d("r_train.csv"), "--test-dataset", d("r_test.csv"), "--feature-map", "z",
                 "--out", d("kz")}).code == 0);
    const auto mismatch = invoke({"predict", "--model", d("m.json"), "--kernel", d("kz/test_kernel.csv"), "--out", d("x.csv")});
    CHECK(mismatch.code == cli::kExitUsage);
    CHECK(mismatch.err.find("spec hash") != std::string::npos);
}

TEST_CASE("classical kernels through the CLI") {
    TempDir dir("qk_cli_classical");
    const auto d = [&](const char* f) { return p(dir.path / f); };
    REQUIRE(invoke({"synth", "--samples", "40", "--train", "20", "--test", "20", "--out", d("c.csv")}).code == 0);
    for (const char* k : {"linear", "polynomial", "rbf", "sigmoid"}) {
        CHECK(invoke({"kernel", "--dataset", d("c_train.csv"), "--test-dataset", d("c_test.csv"), "--feature-map", k,
                   "--out", d("k")}).code == 0);
    }
    CHECK(invoke({"kernel", "--dataset", d("c_train.csv"), "--feature-map", "rbf", "--backend", "ibm_torino",
               "--session-dir", d("s"), "--out", d("k")}).code == cli::kExitUsage);
    CHECK(invoke({"kernel", "--dataset", d("c_train.csv"), "--feature-map", "cosine", "--out", d("k")}).code ==
          cli::kExitUsage);
}

TEST_CASE("preprocess command") {
    TempDir dir("qk_cli_pre");
    const auto corpus = dir.path / "corpus";
    fs::create_directories(corpus);
    fixtures::write_corpus(corpus, 24, 5);
    const auto out = dir.path / "features.csv";
    const std::vector<std::string> base{"preprocess", "--input-dir", p(corpus), "--labels", p(corpus / "labels.csv"),
                                        "--image-size", "64x64"};
    auto seven = base;
    seven.insert(seven.end(), {"--qubits", "7", "--seed", "2", "--train", "12", "--test", "8", "--out", p(out)});
    REQUIRE(invoke(seven).code == 0);
    const auto train = read_dataset(dir.path / "features_train.csv");
    CHECK(train.features.cols() == 7);
    CHECK(train.size() == 12);
    CHECK(read_dataset(dir.path / "features_test.csv").size() == 8);

    const auto first = io::read_file(dir.path / "features_train.csv") + io::read_file(dir.path / "features_train.csv.json");
    REQUIRE(invoke(seven).code == 0);
    CHECK(io::read_file(dir.path / "features_train.csv") + io::read_file(dir.path / "features_train.csv.json") == first);

    auto three = base;
    three.insert(three.end(), {"--qubits", "3", "--out", p(dir.path / "all.csv")});
    REQUIRE(invoke(three).code == 0);
    CHECK(read_dataset(dir.path / "all.csv").features.cols() == 3);

    auto too_many = base;
    too_many.insert(too_many.end(), {"--qubits", "5000", "--out", p(out)});
    CHECK(invoke(too_many).code == cli::kExitUsage);

    CHECK(invoke({"preprocess", "--input-dir", p(corpus), "--labels", p(dir.path / "none.csv"), "--qubits", "3", "--out",
               p(out)}).code == cli::kExitUsage);
    std::ofstream(corpus / "labels.csv", std::ios::app) << "ghost.bin,0\n";
    const auto ghost = invoke(three);
    CHECK(ghost.code == cli::kExitUsage);
    CHECK(ghost.err.find("ghost.bin") != std::string::npos);
}

TEST_CASE("experiment grid") {
    TempDir dir("qk_cli_experiment");
    io::write_json_atomic(dir.path / "grid.json", {{"sizes", {{100, 40}, {200, 80}}},
                                                   {"qubits", {3, 4}},
                                                   {"kernels", {"zz", "z", "rbf", "linear"}},
                                                   {"data", {{"source", "synthetic"}, {"separation", 4.0}}},
                                                   {"angle_range", {0.0, 1.0}},
                                                   {"seed", 3}});
    const auto r = invoke({"experiment", "--grid", p(dir.path / "grid.json"), "--out-dir", p(dir.path / "out")});
    REQUIRE(r.code == 0);
    std::istringstream cells(io::read_file(dir.path / "out" / "cells.csv"));
    std::string line;
    int rows = -1;
    while (std::getline(cells, line)) ++rows;
    CHECK(rows == 16);
    const auto table = io::read_file(dir.path / "out" / "accuracy.csv");
    CHECK(table.rfind("size,qubits,zz,z,rbf,linear\n100/40,3,", 0) == 0);
    CHECK(fs::exists(dir.path / "out" / "f1.csv"));
    CHECK(io::read_json(dir.path / "out" / "provenance.json")["cells"].size() == 16);

    const auto again = invoke({"experiment", "--grid", p(dir.path / "grid.json"), "--out-dir", p(dir.path / "out2")});
    REQUIRE(again.code == 0);
    for (const char* f : {"cells.csv", "accuracy.csv", "f1.csv", "provenance.json"}) {
        CHECK(io::read_file(dir.path / "out" / f) == io::read_file(dir.path / "out2" / f));
    }

    io::write_json_atomic(dir.path / "empty.json", {{"kernels", {"zz"}}});
    REQUIRE(invoke({"experiment", "--grid", p(dir.path / "empty.json"), "--out-dir", p(dir.path / "empty")}).code == 0);
    CHECK(io::read_file(dir.path / "empty" / "accuracy.csv") == "size,qubits,zz\n");
    CHECK(io::read_file(dir.path / "empty" / "cells.csv").find('\n') == io::read_file(dir.path / "empty" / "cells.csv").size() - 1);

    // Failing cells are recorded and the run continues.
    // Backend execution only samples, so the exact zz cell fails while rbf runs.
    io::write_json_atomic(dir.path / "bad.json", {{"sizes", {{20, 10}}},
                                                  {"qubits", {2}},
                                                  {"kernels", {"zz", "rbf"}},
                                                  {"method", "exact"},
                                                  {"backend", "ibm_torino"},
                                                  {"seed", 1}});
    REQUIRE(invoke({"experiment", "--grid", p(dir.path / "bad.json"), "--out-dir", p(dir.path / "bad")}).code == 0);
    const auto bad_cells = io::read_file(dir.path / "bad" / "cells.csv");
    CHECK(bad_cells.find(",ok,") != std::string::npos);
    CHECK(bad_cells.find("20,10,2,zz,0,failed,") != std::string::npos);
    CHECK(bad_cells.find("20,10,2,rbf,0,ok,") != std::string::npos);
    CHECK(io::read_file(dir.path / "bad" / "accuracy.csv").rfind("size,qubits,zz,rbf\n20/10,2,,", 0) == 0);

    io::write_json_atomic(dir.path / "typo.json", {{"kernel", {"zz"}}});
    CHECK(invoke({"experiment", "--grid", p(dir.path / "typo.json"), "--out-dir", p(dir.path / "t")}).code == cli::kExitUsage);
}

TEST_CASE("table-1 scale configuration runs") {
    TempDir dir("qk_cli_table1");
    io::write_json_atomic(dir.path / "grid.json", {{"sizes", {{500, 100}}},
                                                   {"qubits", {7}},
                                                   {"kernels", {"zz"}},
                                                   {"method", "exact"},
                                                   {"seed", 1}});
    REQUIRE(invoke({"experiment", "--grid", p(dir.path / "grid.json"), "--out-dir", p(dir.path / "out")}).code == 0);
    CHECK(io::read_file(dir.path / "out" / "cells.csv").find("500,100,7,zz,0,ok,") != std::string::npos);
}

TEST_CASE("experiment cells through the mock backend record quantum time") {
    TempDir dir("qk_cli_exp_backend");
    io::write_json_atomic(dir.path / "grid.json", {{"sizes", {{6, 2}}},
                                                   {"qubits", {2}},
                                                   {"kernels", {"zz"}},
                                                   {"method", "sampled"},
                                                   {"backend", "ibm_torino"},
                                                   {"seed", 4}});
    REQUIRE(invoke({"experiment", "--grid", p(dir.path / "grid.json"), "--out-dir", p(dir.path / "out")}).code == 0);
    const auto prov = io::read_json(dir.path / "out" / "provenance.json");
    REQUIRE(prov["cells"].size() == 1);
    CHECK(prov["cells"][0]["quantum_seconds"].get<double>() == count_jobs(6, 2) * 15.0);
}
