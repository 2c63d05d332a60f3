#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qunet/core/error.hpp"

namespace qunet::nn {

/// SIMD-aligned storage. Vectorized reductions peel differently depending
/// on the start address, so a fixed alignment keeps seeded runs bitwise
/// reproducible.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

/// Dense NCHW activation tensor.
template <typename T>
struct Tensor {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;
    Buffer<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T{})
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t sample_size() const { return plane() * c; }

    T* sample(int i) { return data.data() + i * sample_size(); }
    const T* sample(int i) const { return data.data() + i * sample_size(); }
    T* channel(int i, int ch) { return sample(i) + ch * plane(); }
    const T* channel(int i, int ch) const { return sample(i) + ch * plane(); }

    T& at(int i, int ch, int y, int x) { return channel(i, ch)[static_cast<std::size_t>(y) * w + x]; }
    const T& at(int i, int ch, int y, int x) const { return channel(i, ch)[static_cast<std::size_t>(y) * w + x]; }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
    std::string shape_string() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
    }
};

/// Named parameter array. Non-trainable entries (batch-norm running
/// statistics) are persisted but skipped by the optimizer.
template <typename T>
struct Param {
    std::string name;
    std::vector<int> shape;
    Buffer<T> value;
    Buffer<T> grad;
    bool trainable = true;

    Param() = default;
    Param(std::string name_, std::vector<int> shape_, bool trainable_ = true) : name(std::move(name_)), shape(std::move(shape_)), trainable(trainable_) {
        std::size_t count = 1;
        for (int d : shape) count *= static_cast<std::size_t>(d);
        value.assign(count, T{});
        if (trainable) grad.assign(count, T{});
    }

    std::size_t size() const { return value.size(); }
};

}  // namespace qunet::nn
