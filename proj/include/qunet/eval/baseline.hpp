#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "qunet/eval/metrics.hpp"
#include "qunet/train/trainer.hpp"

namespace qunet::eval {

struct BaselineConfig {
    double fraction = 0.25;
    int runs = 20;
    nn::ModelConfig model;
    train::TrainConfig train;
    std::uint64_t seed = 0;
    /// Explicit per-run seeds; when empty they are derived from `seed`.
    std::vector<std::uint64_t> run_seeds;
};

struct BaselineRun {
    int run = 0;
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    Metrics mean;
};

struct BaselineResult {
    std::vector<BaselineRun> runs;
    Metrics mean;
    Metrics stddev;
};

/// `k` records drawn without replacement, returned in input order.
std::vector<const data::SliceRecord*> random_subset(std::span<const data::SliceRecord* const> records, std::size_t k,
                                                    std::uint64_t seed);

/// Fresh model (initialized with `model_seed`), trained, then evaluated.
Evaluation train_and_evaluate(std::span<const data::SliceRecord* const> train_set,
                              std::span<const data::SliceRecord* const> test_set, const nn::ModelConfig& model,
                              const train::TrainConfig& train, std::uint64_t model_seed);

/// Per run: train on ceil(fraction * n) random records, evaluate on the rest.
BaselineResult random_baseline(std::span<const data::SliceRecord* const> records, const BaselineConfig& config);

/// One row per run followed by MEAN and STD rows.
void write_baseline_csv(const std::filesystem::path& path, const BaselineResult& result);

}  // namespace qunet::eval
