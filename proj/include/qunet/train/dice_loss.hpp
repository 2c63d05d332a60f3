#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qunet/core/grid.hpp"

namespace qunet::train {

/// Smoothed negative dice: -(2 sum P*Y) / (sum P + sum Y + 1). Range (-1, 0].
double dice_loss(std::span<const double> p, std::span<const double> y);
double dice_loss(const Image& p, const Mask& y);

/// dL/dP for dice_loss.
std::vector<double> dice_loss_gradient(std::span<const double> p, std::span<const double> y);

/// Loss plus gradient over raw buffers; the gradient is multiplied by
/// `scale` and written (not accumulated) to `grad`.
template <typename T>
double dice_loss_with_gradient(const T* p, const T* y, std::size_t n, T* grad, double scale);

using LossFn = std::function<double(std::span<const double>)>;
using GradFn = std::function<std::vector<double>(std::span<const double>)>;

/// Max relative error between `grad` and central finite differences of
/// `loss` at `point`. Relative error is |a - n| / max(|a|, |n|), and 0 when
/// both vanish.
double gradient_check(const LossFn& loss, const GradFn& grad, std::span<const double> point, double h = 1e-5);

/// Dice-loss specialization of gradient_check for maps of at most 4x4.
double gradient_check(const Image& p, const Mask& y, double h = 1e-5);

}  // namespace qunet::train
