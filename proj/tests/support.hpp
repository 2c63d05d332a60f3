#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

#include "qunet/core/grid.hpp"
#include "qunet/core/random.hpp"

namespace qunet::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("qunet_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

inline Mask random_mask(Rng& rng, int h, int w, double density) {
    Mask m(h, w);
    for (auto& v : m) v = uniform01(rng) < density ? 1 : 0;
    return m;
}

inline Image random_image(Rng& rng, int h, int w) {
    Image im(h, w);
    for (auto& v : im) v = uniform01(rng);
    return im;
}

}  // namespace qunet::testing
