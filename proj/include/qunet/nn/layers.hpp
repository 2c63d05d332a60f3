#pragma once

#include <cstdint>
#include <vector>

#include "qunet/core/random.hpp"
#include "qunet/nn/tensor.hpp"

namespace qunet::nn {

/// Same-padded square convolution with bias, stride 1.
template <typename T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(const std::string& name, int in_channels, int out_channels, int kernel);

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }
    int kernel() const { return k_; }

    /// He-uniform weights (fan-in = in * k * k), zero bias.
    void init(std::uint64_t seed);

    Tensor<T> forward(const Tensor<T>& x) const;
    /// Accumulates weight/bias gradients; returns dL/dx when `want_input_grad`.
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, bool want_input_grad = true);

    Param<T> weight;
    Param<T> bias;

private:
    int in_ = 0;
    int out_ = 0;
    int k_ = 0;
};

/// 2x2 transposed convolution with stride 2 and bias. Weight layout is
/// (out, 2, 2, in).
template <typename T>
class ConvTranspose2x2 {
public:
    ConvTranspose2x2() = default;
    ConvTranspose2x2(const std::string& name, int in_channels, int out_channels);

    void init(std::uint64_t seed);
    Tensor<T> forward(const Tensor<T>& x) const;
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy);

    Param<T> weight;
    Param<T> bias;

private:
    int in_ = 0;
    int out_ = 0;
};

/// Per-channel batch normalization over (N, H, W).
template <typename T>
class BatchNorm {
public:
    static constexpr double kEpsilon = 1e-3;
    /// Weight of the current batch when updating running statistics.
    static constexpr double kMomentum = 0.1;

    struct Cache {
        std::vector<T> inv_std;
        Tensor<T> normalized;
    };

    BatchNorm() = default;
    BatchNorm(const std::string& name, int channels);

    Tensor<T> forward_train(const Tensor<T>& x, Cache& cache);
    Tensor<T> forward_eval(const Tensor<T>& x) const;
    Tensor<T> backward(const Cache& cache, const Tensor<T>& dy);

    Param<T> gamma;
    Param<T> beta;
    Param<T> running_mean;
    Param<T> running_var;
};

template <typename T>
void relu_inplace(Tensor<T>& x);
/// dy masked by (y > 0), where y is the ReLU output.
template <typename T>
void relu_backward_inplace(const Tensor<T>& y, Tensor<T>& dy);

template <typename T>
void sigmoid_inplace(Tensor<T>& x);

/// 2x2 max pooling; `argmax` receives the winning offset (0..3) per output.
template <typename T>
Tensor<T> maxpool2(const Tensor<T>& x, std::vector<std::uint8_t>& argmax);
template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& dy, const std::vector<std::uint8_t>& argmax, int in_h, int in_w);

/// Inverted dropout; fills `mask` and scales survivors by 1/(1-rate).
template <typename T>
void dropout_inplace(Tensor<T>& x, double rate, Rng& rng, std::vector<std::uint8_t>& mask);
template <typename T>
void dropout_backward_inplace(Tensor<T>& dy, double rate, const std::vector<std::uint8_t>& mask);

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts);

/// Bilinear resampling of every channel (half-pixel convention).
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int out_h, int out_w);
/// Adjoint of upsample_bilinear.
template <typename T>
Tensor<T> upsample_bilinear_backward(const Tensor<T>& dy, int in_h, int in_w);

}  // namespace qunet::nn
