#pragma once

#include <cstdint>
#include <utility>

#include "qunet/core/grid.hpp"
#include "qunet/core/random.hpp"

namespace qunet::train {

/// Ranges of the random affine draw. Rotation is in radians, shifts are
/// fractions of the side length, shear is the x-per-y shear coefficient.
struct AugmentConfig {
    double rotation = 0.2;
    double width_shift = 0.2;
    double height_shift = 0.2;
    double shear = 0.2;
    bool horizontal_flip = true;
    bool vertical_flip = false;
};

struct AffineParams {
    double rotation = 0.0;
    double shift_x = 0.0;
    double shift_y = 0.0;
    double shear = 0.0;
    bool flip_horizontal = false;
    bool flip_vertical = false;
};

AffineParams sample_affine(const AugmentConfig& config, Rng& rng);

/// Applies one transform to both maps (about the image center): bilinear
/// for the image, nearest-neighbor for the mask; outside samples read 0.
std::pair<Image, Mask> apply_affine(const Image& image, const Mask& mask, const AffineParams& params);

/// sample_affine + apply_affine with an RNG seeded from `seed`.
std::pair<Image, Mask> augment(const Image& image, const Mask& mask, const AugmentConfig& config, std::uint64_t seed);

}  // namespace qunet::train
