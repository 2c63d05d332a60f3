#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qunet/core/grid.hpp"
#include "qunet/nn/layers.hpp"

namespace qunet::nn {

inline constexpr int kRows = 5;
inline constexpr int kHeads = 4;
/// Head biases start at logit(kHeadPrior) so that untrained maps are nearly
/// empty rather than 0.5 everywhere.
inline constexpr double kHeadPrior = 0.01;

struct ModelConfig {
    /// Square input side; must be divisible by 16 (four poolings).
    int input_size = 256;
    /// Row r (1..5) carries base_channels * 2^(r-1) channels.
    int base_channels = 32;
    double dropout_rate = 0.3;

    int width(int row) const { return base_channels << (row - 1); }
    void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Row/column of the node carrying deep-supervision head `level` (1..4):
/// X(4,2), X(3,3), X(2,4), X(1,5).
constexpr int head_row(int level) { return kRows - level; }
constexpr int head_col(int level) { return level + 1; }

/// One X(i,j) node: optional upsampling input, then two 3x3 conv + ReLU
/// stages. Batch norm exists only in the encoder column (j = 1).
template <typename T>
struct Node {
    int row = 0;
    int col = 0;
    bool dropout = false;
    std::optional<ConvTranspose2x2<T>> up;
    Conv2d<T> conv1;
    Conv2d<T> conv2;
    std::optional<BatchNorm<T>> bn1;
    std::optional<BatchNorm<T>> bn2;

    std::string name() const { return "X" + std::to_string(row) + "_" + std::to_string(col); }
};

/// Per-head sigmoid maps at native resolution: L1 (input/8) .. L4 (input).
template <typename T>
using HeadMaps = std::array<Tensor<T>, kHeads>;

/// Nested U-net++ with four deep-supervision heads on the decoder diagonal.
template <typename T>
class UNetPlusPlus {
public:
    struct NodeTrace {
        Tensor<T> input;
        std::vector<std::uint8_t> pool_argmax;
        typename BatchNorm<T>::Cache bn1;
        typename BatchNorm<T>::Cache bn2;
        Tensor<T> a1;
        Tensor<T> a2;
        std::vector<std::uint8_t> drop_mask;
        Tensor<T> out;
    };

    /// Activations kept by forward_train for backward.
    struct Trace {
        std::array<std::array<NodeTrace, kRows + 1>, kRows + 1> nodes;
        HeadMaps<T> heads;
    };

    UNetPlusPlus(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    std::uint64_t seed() const { return seed_; }

    /// Inference: running batch-norm statistics, no dropout. Input is
    /// N x 1 x input_size x input_size.
    HeadMaps<T> forward(const Tensor<T>& batch) const;
    /// Training mode: batch statistics (running stats updated) and dropout.
    HeadMaps<T> forward_train(const Tensor<T>& batch, Rng& dropout_rng, Trace& trace);
    /// Back-propagates dL/d(head probabilities) and accumulates gradients.
    void backward(const Trace& trace, const HeadMaps<T>& d_heads);

    void zero_grad();
    std::size_t count_params() const;

    Node<T>& node(int row, int col) { return nodes_[row][col]; }
    const Node<T>& node(int row, int col) const { return nodes_[row][col]; }
    Conv2d<T>& head(int level) { return heads_[level - 1]; }
    const Conv2d<T>& head(int level) const { return heads_[level - 1]; }

    /// Visits every parameter array (trainable and running statistics) in
    /// a fixed order: nodes row-major, then heads.
    template <typename F>
    void for_each_param(F&& f) {
        visit_params(*this, f);
    }
    template <typename F>
    void for_each_param(F&& f) const {
        visit_params(*this, f);
    }

    /// Lookup by name; nullptr when absent.
    Param<T>* find_param(const std::string& name);

private:
    template <typename Self, typename F>
    static void visit_params(Self& self, F& f) {
        for (int i = 1; i <= kRows; ++i) {
            for (int j = 1; i + j <= kRows + 1; ++j) {
                auto& n = self.nodes_[i][j];
                if (n.up) {
                    f(n.up->weight);
                    f(n.up->bias);
                }
                f(n.conv1.weight);
                f(n.conv1.bias);
                if (n.bn1) {
                    f(n.bn1->gamma);
                    f(n.bn1->beta);
                    f(n.bn1->running_mean);
                    f(n.bn1->running_var);
                }
                f(n.conv2.weight);
                f(n.conv2.bias);
                if (n.bn2) {
                    f(n.bn2->gamma);
                    f(n.bn2->beta);
                    f(n.bn2->running_mean);
                    f(n.bn2->running_var);
                }
            }
        }
        for (auto& h : self.heads_) {
            f(h.weight);
            f(h.bias);
        }
    }

    HeadMaps<T> run(const Tensor<T>& batch, bool training, Rng* rng, Trace* trace);

    ModelConfig config_;
    std::uint64_t seed_ = 0;
    std::array<std::array<Node<T>, kRows + 1>, kRows + 1> nodes_;
    std::array<Conv2d<T>, kHeads> heads_;
};

extern template class UNetPlusPlus<float>;
extern template class UNetPlusPlus<double>;

using SegModel = UNetPlusPlus<float>;

/// Probability maps of one image: L1..L4 at native resolution and, once
/// resized, L1r..L3r at input resolution.
struct LevelOutputs {
    std::array<Image, kHeads> levels;
    std::array<Image, kHeads - 1> resized;
    bool has_resized = false;

    const Image& full_resolution(int level) const { return level == kHeads ? levels[kHeads - 1] : resized[level - 1]; }
};

/// Bilinear upsampling of L1..L3 to the L4 resolution. Idempotent.
LevelOutputs resize_outputs(LevelOutputs outputs);

/// Converts the batch element `index` of a head-map set.
template <typename T>
LevelOutputs to_level_outputs(const HeadMaps<T>& maps, int index);

/// Inference on single images (each input_size x input_size).
std::vector<LevelOutputs> predict(const SegModel& model, const std::vector<const Image*>& images);
LevelOutputs predict(const SegModel& model, const Image& image);

/// Packs images into an N x 1 x H x W tensor.
template <typename T>
Tensor<T> to_tensor(const std::vector<const Image*>& images);

}  // namespace qunet::nn
