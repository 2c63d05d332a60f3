#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "qunet/data/dataset.hpp"
#include "qunet/nn/unetpp.hpp"
#include "qunet/train/augment.hpp"

namespace qunet::train {

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs = 60;
    int batch_size = 20;
    bool augmentation = true;
    AugmentConfig augment;
    // Adam moments.
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Per-level losses for L1r, L2r, L3r, L4.
using LevelLosses = std::array<double, nn::kHeads>;

struct LossHistory {
    std::vector<LevelLosses> levels;
    std::vector<double> combined;

    std::size_t epochs() const { return combined.size(); }
};

void to_json(nlohmann::json& j, const LossHistory& h);
void from_json(const nlohmann::json& j, LossHistory& h);
/// `epoch,l1,l2,l3,l4,combined`
void write_loss_csv(const std::filesystem::path& path, const LossHistory& history);
LossHistory read_loss_csv(const std::filesystem::path& path);

/// Deep-supervised loss of one batch: each head's map is upsampled to the
/// input resolution and scored with dice_loss against the whole-batch
/// annotation; the combined loss is the unweighted mean of the four.
/// Gradients are accumulated into the model when `backprop` is set.
template <typename T>
double deep_supervision_step(nn::UNetPlusPlus<T>& model, const nn::Tensor<T>& images, const nn::Tensor<T>& targets,
                             Rng& dropout_rng, LevelLosses* per_level, bool backprop = true);

/// Adam over the trainable parameters of one model.
template <typename T>
class Adam {
public:
    Adam(double learning_rate, double beta1, double beta2, double epsilon)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

    void step(nn::UNetPlusPlus<T>& model);

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    long step_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

using EpochCallback = std::function<void(int epoch, const LevelLosses& levels, double combined)>;

/// Mini-batch training with fresh augmentation every epoch. Every record
/// must be annotated and sized to the model input. Deterministic for a
/// fixed config seed.
LossHistory train(nn::SegModel& model, std::span<const data::SliceRecord* const> train_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace qunet::train
