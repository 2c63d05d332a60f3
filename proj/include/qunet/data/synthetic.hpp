#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "qunet/data/dataset.hpp"

namespace qunet::data {

struct IntRange {
    int lo = 0;
    int hi = 0;
};

struct RealRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Parameters of the desk-scale stack generator.
struct SyntheticSpec {
    int n_stacks = 3;
    int slices_per_stack = 60;
    int image_size = 64;
    IntRange lesion_count_range{0, 3};
    IntRange lesion_radius_range{3, 6};
    RealRange blur_sigma_range{1.0, 2.5};
    RealRange contrast_range{0.4, 0.7};
    double noise_level = 0.02;
    /// Fraction of slices per stack that receive extra blur and contrast loss.
    double degraded_fraction = 0.3;
    /// Fraction of slices per stack tagged as the held-out test split.
    double test_fraction = 0.25;
    std::uint64_t seed = 0;
};

void validate(const SyntheticSpec& spec);

void to_json(nlohmann::json& j, const SyntheticSpec& spec);
void from_json(const nlohmann::json& j, SyntheticSpec& spec);

/// Axis-aligned elliptical lesion centered on a pixel.
struct Lesion {
    int cx = 0;
    int cy = 0;
    int rx = 0;
    int ry = 0;

    bool contains(int x, int y) const {
        const double dx = static_cast<double>(x - cx) / rx;
        const double dy = static_cast<double>(y - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
    }
};

/// Generator output with the ground-truth geometry kept alongside.
struct SyntheticResult {
    StackDataset dataset;
    /// Parallel to dataset.records.
    std::vector<std::vector<Lesion>> lesions;
    std::vector<bool> degraded;
};

SyntheticResult generate_synthetic_detailed(const SyntheticSpec& spec);
StackDataset generate_synthetic_stack(const SyntheticSpec& spec);

/// Writes the manifest layout plus a `spec.json` echo. Returns the manifest path.
std::filesystem::path write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace qunet::data
