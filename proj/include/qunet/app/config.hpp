#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qunet/data/synthetic.hpp"
#include "qunet/select/pipeline.hpp"

namespace qunet::app {

/// Everything one CLI invocation needs. Loaded from an INI-style file with
/// sections [data], [quality], [model], [train], [selection], [baseline] and
/// [run]; `render_config` writes the same format back.
struct RunConfig {
    // [data]
    /// Manifest CSV; the synthetic generator is used when empty.
    std::string manifest;
    data::SyntheticSpec synthetic;
    /// Seed of the synthetic generator; follows run.seed when unset.
    std::optional<std::uint64_t> synthetic_seed;
    /// Side length slices are normalized to (the model input size).
    int image_size = 256;

    quality::InitialSelectionConfig quality;
    nn::ModelConfig model;
    train::TrainConfig train;
    /// Fine-tune overrides; 0 keeps the [train] value.
    int finetune_epochs = 0;
    double finetune_learning_rate = 0.0;

    // [selection]
    double q0 = select::kDefaultQ0;
    select::Mode mode = select::Mode::oracle;
    bool iterate = false;
    int max_rounds = 5;

    // [baseline]
    double baseline_fraction = 0.25;
    int baseline_runs = 20;

    // [run]
    std::string output_root = "runs";
    std::uint64_t seed = 0;

    /// Propagates shared fields (image size, seeds) and checks every value.
    void validate() const;
    data::SyntheticSpec synthetic_spec() const;
    select::PipelineConfig pipeline() const;
    train::TrainConfig finetune() const;
};

/// Sets one `section.key` entry from text. Throws ConfigError for unknown
/// keys and unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Every known key with its current value, in file order.
std::vector<std::pair<std::string, std::string>> list_settings(const RunConfig& config);

RunConfig parse_config(const std::string& text, const std::string& origin = "<string>");
RunConfig load_config(const std::filesystem::path& path);
std::string render_config(const RunConfig& config);

}  // namespace qunet::app
