#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qunet/core/error.hpp"

namespace qunet {

/// Row-major 2-D array.
template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    Grid(int height, int width, T fill = T{})
        : height_(height), width_(width), data_(checked_size(height, width), fill) {}

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    const T& operator()(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }
    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    template <typename U>
    bool same_shape(const Grid<U>& other) const {
        return height_ == other.height() && width_ == other.width();
    }

    bool operator==(const Grid&) const = default;

private:
    static std::size_t checked_size(int height, int width) {
        if (height < 0 || width < 0) throw ShapeError("negative grid dimension");
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

/// Grayscale intensities, nominally in [0,1].
using Image = Grid<double>;
/// Binary map holding only 0 and 1.
using Mask = Grid<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const std::string& what) {
    if (!a.same_shape(b)) {
        throw ShapeError(what + ": shape mismatch " + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()));
    }
}

inline bool is_binary(const Mask& m) {
    for (auto v : m) {
        if (v > 1) return false;
    }
    return true;
}

inline std::size_t count_nonzero(const Mask& m) {
    std::size_t n = 0;
    for (auto v : m) n += v != 0;
    return n;
}

/// Threshold a probability map: p >= cutoff becomes 1.
template <typename T>
Mask binarize(const Grid<T>& p, double cutoff = 0.5) {
    Mask out(p.height(), p.width());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = static_cast<double>(p[i]) >= cutoff ? 1 : 0;
    return out;
}

}  // namespace qunet
