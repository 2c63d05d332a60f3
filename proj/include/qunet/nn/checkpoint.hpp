#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "qunet/nn/unetpp.hpp"

namespace qunet::nn {

/// Checkpoint archive layout (all integers little-endian):
///
///   char[8]  magic "QUNETCKP"
///   u32      format version (1)
///   u64      metadata byte length, followed by UTF-8 JSON metadata
///   u32      array count, then per array:
///              u32 name length, name bytes
///              u8  dtype (1 = float32, 2 = float64)
///              u8  trainable flag
///              u32 ndim, ndim x u64 dims
///              row-major element data
///
/// Metadata always carries "model" (ModelConfig) and "seed"; callers may
/// add fields such as "epoch" and "loss_history".
struct Checkpoint {
    SegModel model;
    nlohmann::json metadata;
};

void save_checkpoint(const std::filesystem::path& path, const SegModel& model, nlohmann::json metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qunet::nn
