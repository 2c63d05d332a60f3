#include "qunet/core/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace qunet {

namespace {

int nearest_index(int i, int in, int out) {
    const double src = (i + 0.5) * static_cast<double>(in) / out;
    return std::clamp(static_cast<int>(std::floor(src)), 0, in - 1);
}

int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

std::vector<BilinearTap> bilinear_taps(int in, int out) {
    std::vector<BilinearTap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
        double src = (i + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const int lo = static_cast<int>(std::floor(src));
        const int hi = std::min(lo + 1, in - 1);
        taps[i] = {lo, hi, src - lo};
    }
    return taps;
}

Image resize_bilinear(const Image& src, int out_height, int out_width) {
    if (out_height <= 0 || out_width <= 0) throw ShapeError("resize_bilinear: non-positive output size");
    if (src.empty()) throw ShapeError("resize_bilinear: empty source");
    const auto ty = bilinear_taps(src.height(), out_height);
    const auto tx = bilinear_taps(src.width(), out_width);
    Image out(out_height, out_width);
    for (int y = 0; y < out_height; ++y) {
        const auto& a = ty[y];
        for (int x = 0; x < out_width; ++x) {
            const auto& b = tx[x];
            const double top = src(a.lo, b.lo) * (1.0 - b.frac) + src(a.lo, b.hi) * b.frac;
            const double bottom = src(a.hi, b.lo) * (1.0 - b.frac) + src(a.hi, b.hi) * b.frac;
            out(y, x) = top * (1.0 - a.frac) + bottom * a.frac;
        }
    }
    return out;
}

template <typename T>
Grid<T> resize_nearest(const Grid<T>& src, int out_height, int out_width) {
    if (out_height <= 0 || out_width <= 0) throw ShapeError("resize_nearest: non-positive output size");
    if (src.empty()) throw ShapeError("resize_nearest: empty source");
    Grid<T> out(out_height, out_width);
    for (int y = 0; y < out_height; ++y) {
        const int sy = nearest_index(y, src.height(), out_height);
        for (int x = 0; x < out_width; ++x) out(y, x) = src(sy, nearest_index(x, src.width(), out_width));
    }
    return out;
}

template Grid<double> resize_nearest(const Grid<double>&, int, int);
template Grid<std::uint8_t> resize_nearest(const Grid<std::uint8_t>&, int, int);
template Grid<float> resize_nearest(const Grid<float>&, int, int);

Image gaussian_blur(const Image& src, double sigma) {
    if (sigma <= 0.0 || src.empty()) return src;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;

    const int h = src.height();
    const int w = src.width();
    Image tmp(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * src(y, clampi(x + i, 0, w - 1));
            tmp(y, x) = acc;
        }
    }
    Image out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp(clampi(y + i, 0, h - 1), x);
            out(y, x) = acc;
        }
    }
    return out;
}

Image convolve3x3_replicate(const Image& src, const double (&kernel)[3][3]) {
    const int h = src.height();
    const int w = src.width();
    Image out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    acc += kernel[dy + 1][dx + 1] * src(clampi(y + dy, 0, h - 1), clampi(x + dx, 0, w - 1));
                }
            }
            out(y, x) = acc;
        }
    }
    return out;
}

Image median_filter(const Image& src, int kernel) {
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("median_filter: kernel must be odd and positive");
    const int r = kernel / 2;
    const int h = src.height();
    const int w = src.width();
    Image out(h, w);
    std::vector<double> window(static_cast<std::size_t>(kernel * kernel));
    const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t n = 0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) window[n++] = src(clampi(y + dy, 0, h - 1), clampi(x + dx, 0, w - 1));
            }
            std::nth_element(window.begin(), mid, window.end());
            out(y, x) = *mid;
        }
    }
    return out;
}

}  // namespace qunet
