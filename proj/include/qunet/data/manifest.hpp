#pragma once

#include <filesystem>

#include "qunet/data/dataset.hpp"

namespace qunet::data {

/// Column header of the manifest CSV.
inline constexpr const char* kManifestHeader = "stack_id,slice_index,image_path,roi_mask_path,annotation_path,split";

/// Reads a manifest CSV; paths are resolved relative to the manifest's
/// directory and empty cells mean "absent". Mask PNGs must hold only 0 and
/// one foreground value (1 or 255). Annotation pixels outside the ROI are
/// cleared with a warning.
StackDataset load_manifest(const std::filesystem::path& path);

/// Writes every record as 8-bit PNGs under `dir` plus `dir/manifest.csv`.
/// Returns the manifest path.
std::filesystem::path write_manifest(const StackDataset& dataset, const std::filesystem::path& dir);

}  // namespace qunet::data
