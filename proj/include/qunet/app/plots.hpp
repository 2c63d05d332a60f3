#pragma once

#include <span>
#include <vector>

#include "qunet/core/png_io.hpp"
#include "qunet/quality/initial_selection.hpp"
#include "qunet/train/trainer.hpp"

namespace qunet::app {

/// Minimal raster canvas for the report figures.
class Canvas {
public:
    Canvas(int width, int height, Rgb background);

    void fill_rect(int x0, int y0, int x1, int y1, Rgb color);
    void line(int x0, int y0, int x1, int y1, Rgb color);
    void disc(int cx, int cy, int radius, Rgb color);
    const RgbImage& pixels() const { return pixels_; }

private:
    void put(int x, int y, Rgb color);
    RgbImage pixels_;
};

/// One panel per stack: blurriness (x) against psnr_inv (y) with the
/// below-both-means quadrant shaded. S0 slices are red, slices removed by
/// deduplication orange, everything else gray. Sentinel blurriness is skipped.
RgbImage plot_quality_scatter(std::span<const quality::ScoredSlice> scores, const quality::InitialSelection& initial);

/// One panel per history: L1r..L4 losses (blue, green, orange, red) and the
/// combined loss (black) against epoch.
RgbImage plot_loss_curves(const std::vector<train::LossHistory>& histories);

}  // namespace qunet::app
