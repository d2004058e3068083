#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

/// Random binaries of 500 B to 40 KB plus labels.csv; odd-indexed files are labelled malware
/// and use a brighter byte range so the classes differ.
inline void write_corpus(const std::filesystem::path& dir, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::ofstream labels(dir / "labels.csv");
    labels << "filename,label\n";
    for (int i = 0; i < count; ++i) {
        const std::size_t size = 500 + rng() % 40000;
        std::vector<char> data(size);
        const int base = i % 2 ? 200 : 40;
        for (auto& c : data) c = static_cast<char>(base + static_cast<int>(rng() % 50));
        const auto name = "sample_" + std::to_string(i) + ".bin";
        std::ofstream(dir / name, std::ios::binary).write(data.data(), static_cast<std::streamsize>(size));
        labels << name << ',' << (i % 2) << '\n';
    }
}

}  // namespace fixtures
