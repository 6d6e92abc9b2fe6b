#pragma once

#include <unistd.h>

#include <cstdint>
#include <fstream>
#include <iterator>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "noiselens/core_data.hpp"
#include "noiselens/matrix.hpp"
#include "noiselens/priors.hpp"

namespace testing_support {

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("noiselens-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::vector<double> random_simplex(std::mt19937_64& gen, std::size_t n) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> v(n);
    double total = 0.0;
    for (auto& x : v) total += (x = e(gen));
    for (auto& x : v) x /= total;
    return v;
}

inline noiselens::TransitionMatrix random_transition(std::mt19937_64& gen, std::size_t c) {
    noiselens::TransitionMatrix tm;
    tm.values = noiselens::Matrix(c, c);
    tm.source_count.assign(c, 1);
    for (std::size_t i = 0; i < c; ++i) {
        const auto row = random_simplex(gen, c);
        for (std::size_t j = 0; j < c; ++j) tm.values(i, j) = row[j];
    }
    return tm;
}

inline noiselens::ClassPrior random_prior(std::mt19937_64& gen, std::size_t c) {
    noiselens::ClassPrior p;
    p.values = random_simplex(gen, c);
    for (auto& v : p.values) v = 0.5 * v + 0.5 / static_cast<double>(c);
    p.counts.assign(c, 1);
    p.total = c;
    return p;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing_support
