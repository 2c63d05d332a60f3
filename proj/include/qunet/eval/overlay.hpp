#pragma once

#include "qunet/core/png_io.hpp"

namespace qunet::eval {

inline constexpr Rgb kFalseNegative{255, 0, 0};
inline constexpr Rgb kFalsePositive{0, 0, 255};
inline constexpr Rgb kTruePositive{255, 0, 255};

/// Grayscale image with FN pixels red, FP blue and TP magenta.
RgbImage render_overlay(const Mask& prediction, const Mask& truth, const Image& image);

}  // namespace qunet::eval
