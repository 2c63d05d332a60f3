#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "qunet/data/dataset.hpp"
#include "qunet/eval/metrics.hpp"
#include "qunet/quality/initial_selection.hpp"
#include "qunet/select/selection.hpp"
#include "qunet/train/trainer.hpp"

namespace qunet::select {

/// oracle: annotations of selected slices are available immediately.
/// flag: the selected slices are emitted for external annotation.
enum class Mode { oracle, flag };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct PipelineConfig {
    quality::InitialSelectionConfig quality;
    nn::ModelConfig model;
    train::TrainConfig train;
    /// Schedule for the fine-tune on S0 + S_m; `train` when absent.
    std::optional<train::TrainConfig> finetune;
    double q0 = kDefaultQ0;
    Mode mode = Mode::oracle;
    /// Repeat select + fine-tune until no further slice is selected.
    bool iterate = false;
    int max_rounds = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct PipelineResult {
    quality::InitialSelection initial;
    std::vector<quality::ScoredSlice> scores;
    SelectionReport report;
    std::optional<nn::SegModel> s0_model;
    std::optional<nn::SegModel> final_model;
    train::LossHistory s0_history;
    train::LossHistory final_history;
    std::optional<eval::Evaluation> evaluation;
    int rounds = 0;
};

/// Run-directory file names.
inline constexpr const char* kQualityCsv = "quality.csv";
inline constexpr const char* kInitialSelectionJson = "initial_selection.json";
inline constexpr const char* kSelectionReportJson = "selection_report.json";
inline constexpr const char* kCheckpointS0 = "checkpoint_s0.qckpt";
inline constexpr const char* kCheckpointFinal = "checkpoint_final.qckpt";
inline constexpr const char* kLossS0Csv = "loss_s0.csv";
inline constexpr const char* kLossFinalCsv = "loss_final.csv";
inline constexpr const char* kMetricsCsv = "metrics.csv";

/// Quality scan of the raw pool, S0, training on S0, selection over the
/// rest of the pool, then (oracle mode) fine-tuning on S0 + S_m and
/// evaluation on the test split.
///
/// In flag mode the S0 model is trained only when S0 is annotated;
/// otherwise `initial_model` is used, and without one the run stops after
/// S0. Artifacts go to `run_dir` unless it is empty.
PipelineResult run_pipeline(const data::StackDataset& raw, const PipelineConfig& config,
                            const std::filesystem::path& run_dir = {}, const nn::SegModel* initial_model = nullptr);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace qunet::select
