#pragma once

#include <vector>

#include "qunet/core/grid.hpp"

namespace qunet {

/// Two-tap linear interpolation weights for one output coordinate.
struct BilinearTap {
    int lo;
    int hi;
    double frac;
};

/// Taps for resampling `in` samples to `out` samples (half-pixel centers,
/// clamped at the border).
std::vector<BilinearTap> bilinear_taps(int in, int out);

/// Bilinear resampling with the half-pixel (align-corners = false) convention;
/// source coordinates are clamped at the border.
Image resize_bilinear(const Image& src, int out_height, int out_width);

/// Nearest-neighbor resampling using the same half-pixel convention.
template <typename T>
Grid<T> resize_nearest(const Grid<T>& src, int out_height, int out_width);

/// Separable Gaussian smoothing with replicate borders; radius = ceil(3 sigma).
Image gaussian_blur(const Image& src, double sigma);

/// 3x3 convolution with replicate padding.
Image convolve3x3_replicate(const Image& src, const double (&kernel)[3][3]);

/// Square median filter with replicate padding. `kernel` must be odd.
Image median_filter(const Image& src, int kernel);

extern template Grid<double> resize_nearest(const Grid<double>&, int, int);
extern template Grid<std::uint8_t> resize_nearest(const Grid<std::uint8_t>&, int, int);
extern template Grid<float> resize_nearest(const Grid<float>&, int, int);

}  // namespace qunet
