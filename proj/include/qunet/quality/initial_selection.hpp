#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qunet/quality/metrics.hpp"

namespace qunet::quality {

struct Thresholds {
    double blurriness = 0.0;
    double psnr_inv = 0.0;
};

struct QuadrantSelection {
    std::vector<data::SliceKey> selected;
    std::map<std::string, Thresholds> thresholds;
};

/// Per stack, keeps slices strictly below the mean blurriness (over finite
/// values) and strictly below the mean psnr_inv. MAX-blurriness slices are
/// never selected. Output preserves input order.
QuadrantSelection select_initial(std::span<const ScoredSlice> scores);

struct DedupCandidate {
    data::SliceKey key;
    double blurriness = 0.0;
    double roi_cov = 0.0;
    double roi_mean = 0.0;
};

struct DedupResult {
    std::vector<data::SliceKey> kept;
    std::vector<data::SliceKey> eliminated;
};

/// Greedy near-duplicate removal in z-scored (roi_cov, roi_mean) space.
///
/// Candidates are visited in ascending blurriness; one is kept iff its
/// distance to every kept candidate exceeds eps0. At most `cap` survivors
/// (the sharpest) are kept. `kept` follows input order.
DedupResult dedup_epsilon(std::span<const DedupCandidate> candidates, double eps0, int cap);

struct InitialSelectionConfig {
    int median_kernel = kDefaultMedianKernel;
    double eps0 = 0.25;
    /// Per-stack upper bound on the initial set.
    int cap = 10;
    /// Stacks with fewer threshold survivors skip deduplication.
    int min_for_dedup = 5;
};

struct InitialSelection {
    std::vector<data::SliceKey> s0;
    std::map<std::string, Thresholds> thresholds_used;
    std::vector<data::SliceKey> eliminated_by_dedup;
};

void to_json(nlohmann::json& j, const InitialSelection& s);
void from_json(const nlohmann::json& j, InitialSelection& s);

/// Quadrant thresholding followed by per-stack deduplication.
InitialSelection select_initial_set(std::span<const ScoredSlice> scores, const InitialSelectionConfig& config);

}  // namespace qunet::quality
