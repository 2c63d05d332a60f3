#include "qunet/eval/overlay.hpp"

#include <algorithm>
#include <cmath>

namespace qunet::eval {

RgbImage render_overlay(const Mask& prediction, const Mask& truth, const Image& image) {
    require_same_shape(prediction, truth, "render_overlay");
    require_same_shape(prediction, image, "render_overlay");
    RgbImage out(image.height(), image.width());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const bool p = prediction[i] != 0;
        const bool y = truth[i] != 0;
        if (p && y) {
            out[i] = kTruePositive;
        } else if (y) {
            out[i] = kFalseNegative;
        } else if (p) {
            out[i] = kFalsePositive;
        } else {
            const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
            out[i] = {g, g, g};
        }
    }
    return out;
}

}  // namespace qunet::eval
