#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "cura/tensor.hpp"

namespace testing {

inline cura::Tensor random_tensor(cura::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    cura::Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

// Fresh, empty directory under the build tree (or the system temp dir).
inline std::filesystem::path scratch_dir(const std::string& name) {
    const char* root = std::getenv("CURA_TEST_TMP");
    std::filesystem::path dir = root ? std::filesystem::path(root) : std::filesystem::temp_directory_path() / "cura-tests";
    dir /= name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
