#include "qunet/train/dice_loss.hpp"

#include <algorithm>
#include <cmath>

namespace qunet::train {

double dice_loss(std::span<const double> p, std::span<const double> y) {
    if (p.size() != y.size()) throw ShapeError("dice_loss: P and Y differ in size");
    double inter = 0.0;
    double sum_p = 0.0;
    double sum_y = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        inter += p[k] * y[k];
        sum_p += p[k];
        sum_y += y[k];
    }
    return -2.0 * inter / (sum_p + sum_y + 1.0);
}

double dice_loss(const Image& p, const Mask& y) {
    require_same_shape(p, y, "dice_loss");
    std::vector<double> yd(y.begin(), y.end());
    return dice_loss(p.values(), yd);
}

std::vector<double> dice_loss_gradient(std::span<const double> p, std::span<const double> y) {
    std::vector<double> g(p.size());
    dice_loss_with_gradient(p.data(), y.data(), p.size(), g.data(), 1.0);
    return g;
}

template <typename T>
double dice_loss_with_gradient(const T* p, const T* y, std::size_t n, T* grad, double scale) {
    double inter = 0.0;
    double sum_p = 0.0;
    double sum_y = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        inter += static_cast<double>(p[k]) * y[k];
        sum_p += p[k];
        sum_y += y[k];
    }
    const double s = sum_p + sum_y + 1.0;
    // d/dp_k of -2I/S = -2 y_k / S + 2 I / S^2
    const double common = 2.0 * inter / (s * s);
    const double direct = -2.0 / s;
    for (std::size_t k = 0; k < n; ++k) grad[k] = static_cast<T>(scale * (direct * y[k] + common));
    return -2.0 * inter / s;
}

template double dice_loss_with_gradient(const float*, const float*, std::size_t, float*, double);
template double dice_loss_with_gradient(const double*, const double*, std::size_t, double*, double);

double gradient_check(const LossFn& loss, const GradFn& grad, std::span<const double> point, double h) {
    const std::vector<double> analytic = grad(point);
    std::vector<double> x(point.begin(), point.end());
    double worst = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double orig = x[k];
        x[k] = orig + h;
        const double up = loss(x);
        x[k] = orig - h;
        const double down = loss(x);
        x[k] = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max(std::abs(analytic[k]), std::abs(numeric));
        if (denom > 0.0) worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
    }
    return worst;
}

double gradient_check(const Image& p, const Mask& y, double h) {
    require_same_shape(p, y, "gradient_check");
    if (p.height() > 4 || p.width() > 4) throw ShapeError("gradient_check: maps must be at most 4x4");
    const std::vector<double> yd(y.begin(), y.end());
    return gradient_check([&](std::span<const double> v) { return dice_loss(v, yd); },
                          [&](std::span<const double> v) { return dice_loss_gradient(v, yd); }, p.values(), h);
}

}  // namespace qunet::train
