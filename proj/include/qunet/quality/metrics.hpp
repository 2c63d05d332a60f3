#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "qunet/core/grid.hpp"
#include "qunet/data/dataset.hpp"

namespace qunet::quality {

/// Blurriness of an image whose Laplacian has zero variance (e.g. constant).
inline constexpr double kMaxBlurriness = std::numeric_limits<double>::max();
inline constexpr int kDefaultMedianKernel = 5;

struct QualityScores {
    double blurriness = 0.0;
    double psnr_inv = 0.0;
    /// Absent when the ROI has no foreground pixel.
    std::optional<double> roi_cov;
    std::optional<double> roi_mean;

    bool blur_is_max() const { return blurriness == kMaxBlurriness; }
};

struct RoiStats {
    double cov = 0.0;
    double mean = 0.0;
};

/// Inverse variance of the 4-neighbor Laplacian response (replicate border).
/// Returns kMaxBlurriness when that variance is exactly zero.
double blurriness(const Image& image);

/// Var(image - median_filter(image)) / max(image); 0 for an all-black image.
double psnr_inv(const Image& image, int median_kernel = kDefaultMedianKernel);

/// Var/max and mean over ROI pixels. Throws ValidationError on an empty ROI.
RoiStats roi_stats(const Image& image, const Mask& roi_mask);

/// Population variance.
double variance(std::span<const double> values);

QualityScores score_slice(const data::SliceRecord& record, int median_kernel = kDefaultMedianKernel);

struct ScoredSlice {
    data::SliceKey key;
    QualityScores scores;
};

/// Scores the raw (un-normalized) images of the given records.
std::vector<ScoredSlice> score_records(const data::StackDataset& dataset, std::span<const std::size_t> indices,
                                       int median_kernel = kDefaultMedianKernel);

/// `stack_id,slice_index,blurriness,psnr_inv,roi_cov,roi_mean,selected_s0`;
/// the sentinel blurriness is written as `max` and absent ROI stats as empty.
void write_quality_csv(const std::filesystem::path& path, std::span<const ScoredSlice> scores,
                       std::span<const data::SliceKey> s0 = {});
std::vector<ScoredSlice> read_quality_csv(const std::filesystem::path& path);

}  // namespace qunet::quality
