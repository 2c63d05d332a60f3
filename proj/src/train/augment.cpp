#include "qunet/train/augment.hpp"

#include <cmath>

namespace qunet::train {

AffineParams sample_affine(const AugmentConfig& config, Rng& rng) {
    AffineParams p;
    p.rotation = uniform(rng, -config.rotation, config.rotation);
    p.shift_x = uniform(rng, -config.width_shift, config.width_shift);
    p.shift_y = uniform(rng, -config.height_shift, config.height_shift);
    p.shear = uniform(rng, -config.shear, config.shear);
    const double flip_h = uniform01(rng);
    const double flip_v = uniform01(rng);
    p.flip_horizontal = config.horizontal_flip && flip_h < 0.5;
    p.flip_vertical = config.vertical_flip && flip_v < 0.5;
    return p;
}

std::pair<Image, Mask> apply_affine(const Image& image, const Mask& mask, const AffineParams& params) {
    require_same_shape(image, mask, "apply_affine");
    const int h = image.height();
    const int w = image.width();
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;

    // Forward map: rotation * shear, then translation. Invert it per output pixel.
    const double c = std::cos(params.rotation);
    const double s = std::sin(params.rotation);
    const double a00 = c;
    const double a01 = c * params.shear - s;
    const double a10 = s;
    const double a11 = s * params.shear + c;
    const double det = a00 * a11 - a01 * a10;
    const double i00 = a11 / det;
    const double i01 = -a01 / det;
    const double i10 = -a10 / det;
    const double i11 = a00 / det;
    const double tx = params.shift_x * w;
    const double ty = params.shift_y * h;

    const auto pixel = [&](int y, int x) -> double {
        if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
        return image(y, x);
    };

    Image out_image(h, w);
    Mask out_mask(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double ox = x - cx - tx;
            const double oy = y - cy - ty;
            double sx = i00 * ox + i01 * oy + cx;
            double sy = i10 * ox + i11 * oy + cy;
            if (params.flip_horizontal) sx = (w - 1) - sx;
            if (params.flip_vertical) sy = (h - 1) - sy;

            const double fx = std::floor(sx);
            const double fy = std::floor(sy);
            const int x0 = static_cast<int>(fx);
            const int y0 = static_cast<int>(fy);
            const double ax = sx - fx;
            const double ay = sy - fy;
            double v = (1 - ay) * (1 - ax) * pixel(y0, x0);
            if (ax > 0) v += (1 - ay) * ax * pixel(y0, x0 + 1);
            if (ay > 0) v += ay * (1 - ax) * pixel(y0 + 1, x0);
            if (ax > 0 && ay > 0) v += ay * ax * pixel(y0 + 1, x0 + 1);
            out_image(y, x) = v;

            const int nx = static_cast<int>(std::lround(sx));
            const int ny = static_cast<int>(std::lround(sy));
            out_mask(y, x) = (nx >= 0 && ny >= 0 && nx < w && ny < h) ? mask(ny, nx) : 0;
        }
    }
    return {std::move(out_image), std::move(out_mask)};
}

std::pair<Image, Mask> augment(const Image& image, const Mask& mask, const AugmentConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    return apply_affine(image, mask, sample_affine(config, rng));
}

}  // namespace qunet::train
