#include "qunet/nn/unetpp.hpp"

#include <algorithm>
#include <cmath>

#include "qunet/core/image_ops.hpp"

namespace qunet::nn {

void ModelConfig::validate() const {
    if (input_size <= 0 || input_size % 16 != 0) {
        throw ConfigError("model input_size must be a positive multiple of 16, got " + std::to_string(input_size));
    }
    if (base_channels <= 0) throw ConfigError("model base_channels must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("model dropout_rate must lie in [0,1)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"input_size", c.input_size}, {"base_channels", c.base_channels}, {"dropout_rate", c.dropout_rate}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    c = ModelConfig{};
    c.input_size = j.value("input_size", c.input_size);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
}

namespace {

template <typename T>
void accumulate(Tensor<T>& acc, const Tensor<T>& g) {
    if (acc.data.empty()) {
        acc = g;
        return;
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += g.data[i];
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int count) {
    Tensor<T> y(x.n, count, x.h, x.w);
    for (int i = 0; i < x.n; ++i) std::copy(x.channel(i, begin), x.channel(i, begin + count), y.sample(i));
    return y;
}

}  // namespace

template <typename T>
UNetPlusPlus<T>::UNetPlusPlus(const ModelConfig& config, std::uint64_t seed) : config_(config), seed_(seed) {
    config_.validate();
    for (int i = 1; i <= kRows; ++i) {
        for (int j = 1; i + j <= kRows + 1; ++j) {
            auto& n = nodes_[i][j];
            n.row = i;
            n.col = j;
            const std::string name = n.name();
            const int w = config_.width(i);
            if (j == 1) {
                const int in = i == 1 ? 1 : config_.width(i - 1);
                n.conv1 = Conv2d<T>(name + ".conv1", in, w, 3);
                n.bn1.emplace(name + ".bn1", w);
                n.conv2 = Conv2d<T>(name + ".conv2", w, w, 3);
                n.bn2.emplace(name + ".bn2", w);
                n.dropout = i >= 4;
            } else {
                n.up.emplace(name + ".up", config_.width(i + 1), w);
                n.conv1 = Conv2d<T>(name + ".conv1", j * w, w, 3);
                n.conv2 = Conv2d<T>(name + ".conv2", w, w, 3);
            }
            if (n.up) n.up->init(seed);
            n.conv1.init(seed);
            n.conv2.init(seed);
        }
    }
    for (int level = 1; level <= kHeads; ++level) {
        auto& h = heads_[level - 1];
        h = Conv2d<T>("head" + std::to_string(level), config_.width(head_row(level)), 1, 1);
        h.init(seed);
        std::fill(h.bias.value.begin(), h.bias.value.end(), static_cast<T>(std::log(kHeadPrior / (1.0 - kHeadPrior))));
    }
}

template <typename T>
HeadMaps<T> UNetPlusPlus<T>::run(const Tensor<T>& batch, bool training, Rng* rng, Trace* trace) {
    if (batch.c != 1 || batch.h != config_.input_size || batch.w != config_.input_size) {
        throw ShapeError("forward: expected Nx1x" + std::to_string(config_.input_size) + "x" +
                         std::to_string(config_.input_size) + " input, got " + batch.shape_string());
    }
    std::array<std::array<Tensor<T>, kRows + 1>, kRows + 1> local;
    auto out_of = [&](int i, int j) -> Tensor<T>& { return trace ? trace->nodes[i][j].out : local[i][j]; };

    for (int j = 1; j <= kRows; ++j) {
        for (int i = 1; i + j <= kRows + 1; ++i) {
            auto& n = nodes_[i][j];
            NodeTrace scratch;
            NodeTrace& t = trace ? trace->nodes[i][j] : scratch;

            if (j == 1) {
                t.input = i == 1 ? batch : maxpool2(out_of(i - 1, 1), t.pool_argmax);
            } else {
                const Tensor<T> up = n.up->forward(out_of(i + 1, j - 1));
                std::vector<const Tensor<T>*> parts{&up};
                for (int k = 1; k < j; ++k) parts.push_back(&out_of(i, k));
                t.input = concat_channels(parts);
            }

            Tensor<T> h = n.conv1.forward(t.input);
            if (n.bn1) h = training ? n.bn1->forward_train(h, t.bn1) : n.bn1->forward_eval(h);
            relu_inplace(h);
            t.a1 = std::move(h);

            h = n.conv2.forward(t.a1);
            if (n.bn2) h = training ? n.bn2->forward_train(h, t.bn2) : n.bn2->forward_eval(h);
            relu_inplace(h);
            if (training && n.dropout && config_.dropout_rate > 0.0) {
                t.a2 = h;
                dropout_inplace(h, config_.dropout_rate, *rng, t.drop_mask);
            } else if (trace) {
                t.a2 = h;
            }
            out_of(i, j) = std::move(h);
        }
    }

    HeadMaps<T> maps;
    for (int level = 1; level <= kHeads; ++level) {
        maps[level - 1] = heads_[level - 1].forward(out_of(head_row(level), head_col(level)));
        sigmoid_inplace(maps[level - 1]);
    }
    if (trace) trace->heads = maps;
    return maps;
}

template <typename T>
HeadMaps<T> UNetPlusPlus<T>::forward(const Tensor<T>& batch) const {
    return const_cast<UNetPlusPlus*>(this)->run(batch, false, nullptr, nullptr);
}

template <typename T>
HeadMaps<T> UNetPlusPlus<T>::forward_train(const Tensor<T>& batch, Rng& dropout_rng, Trace& trace) {
    return run(batch, true, &dropout_rng, &trace);
}

template <typename T>
void UNetPlusPlus<T>::backward(const Trace& trace, const HeadMaps<T>& d_heads) {
    std::array<std::array<Tensor<T>, kRows + 1>, kRows + 1> grads;

    for (int level = 1; level <= kHeads; ++level) {
        const auto& p = trace.heads[level - 1];
        Tensor<T> dz = d_heads[level - 1];
        if (!dz.same_shape(p)) throw ShapeError("backward: head gradient shape mismatch");
        for (std::size_t k = 0; k < dz.size(); ++k) dz.data[k] *= p.data[k] * (T{1} - p.data[k]);
        const int r = head_row(level);
        const int c = head_col(level);
        accumulate(grads[r][c], heads_[level - 1].backward(trace.nodes[r][c].out, dz));
    }

    for (int j = kRows; j >= 1; --j) {
        for (int i = kRows + 1 - j; i >= 1; --i) {
            auto& n = nodes_[i][j];
            const auto& t = trace.nodes[i][j];
            Tensor<T> d = std::move(grads[i][j]);
            if (d.data.empty()) continue;

            if (!t.drop_mask.empty()) dropout_backward_inplace(d, config_.dropout_rate, t.drop_mask);
            relu_backward_inplace(t.a2, d);
            if (n.bn2) d = n.bn2->backward(t.bn2, d);
            d = n.conv2.backward(t.a1, d);
            relu_backward_inplace(t.a1, d);
            if (n.bn1) d = n.bn1->backward(t.bn1, d);
            const bool need_input = !(i == 1 && j == 1);
            d = n.conv1.backward(t.input, d, need_input);
            if (!need_input) continue;

            if (j == 1) {
                const auto& below = trace.nodes[i - 1][1].out;
                accumulate(grads[i - 1][1], maxpool2_backward(d, t.pool_argmax, below.h, below.w));
            } else {
                const int w = config_.width(i);
                const Tensor<T> du = slice_channels(d, 0, w);
                accumulate(grads[i + 1][j - 1], n.up->backward(trace.nodes[i + 1][j - 1].out, du));
                for (int k = 1; k < j; ++k) accumulate(grads[i][k], slice_channels(d, k * w, w));
            }
        }
    }
}

template <typename T>
void UNetPlusPlus<T>::zero_grad() {
    for_each_param([](Param<T>& p) { std::fill(p.grad.begin(), p.grad.end(), T{}); });
}

template <typename T>
std::size_t UNetPlusPlus<T>::count_params() const {
    std::size_t total = 0;
    for_each_param([&](const Param<T>& p) {
        if (p.trainable) total += p.size();
    });
    return total;
}

template <typename T>
Param<T>* UNetPlusPlus<T>::find_param(const std::string& name) {
    Param<T>* found = nullptr;
    for_each_param([&](Param<T>& p) {
        if (p.name == name) found = &p;
    });
    return found;
}

template class UNetPlusPlus<float>;
template class UNetPlusPlus<double>;

LevelOutputs resize_outputs(LevelOutputs outputs) {
    const auto& full = outputs.levels[kHeads - 1];
    for (int k = 0; k < kHeads - 1; ++k) outputs.resized[k] = resize_bilinear(outputs.levels[k], full.height(), full.width());
    outputs.has_resized = true;
    return outputs;
}

template <typename T>
LevelOutputs to_level_outputs(const HeadMaps<T>& maps, int index) {
    LevelOutputs out;
    for (int k = 0; k < kHeads; ++k) {
        const auto& m = maps[k];
        Image img(m.h, m.w);
        const T* src = m.channel(index, 0);
        for (std::size_t p = 0; p < img.size(); ++p) img[p] = static_cast<double>(src[p]);
        out.levels[k] = std::move(img);
    }
    return out;
}

template LevelOutputs to_level_outputs(const HeadMaps<float>&, int);
template LevelOutputs to_level_outputs(const HeadMaps<double>&, int);

template <typename T>
Tensor<T> to_tensor(const std::vector<const Image*>& images) {
    if (images.empty()) return {};
    const int h = images.front()->height();
    const int w = images.front()->width();
    Tensor<T> t(static_cast<int>(images.size()), 1, h, w);
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i]->height() != h || images[i]->width() != w) throw ShapeError("to_tensor: images differ in size");
        T* dst = t.sample(static_cast<int>(i));
        for (std::size_t p = 0; p < images[i]->size(); ++p) dst[p] = static_cast<T>((*images[i])[p]);
    }
    return t;
}

template Tensor<float> to_tensor(const std::vector<const Image*>&);
template Tensor<double> to_tensor(const std::vector<const Image*>&);

std::vector<LevelOutputs> predict(const SegModel& model, const std::vector<const Image*>& images) {
    std::vector<LevelOutputs> out;
    out.reserve(images.size());
    constexpr std::size_t kChunk = 8;
    for (std::size_t start = 0; start < images.size(); start += kChunk) {
        const std::vector<const Image*> chunk(images.begin() + static_cast<std::ptrdiff_t>(start),
                                              images.begin() + static_cast<std::ptrdiff_t>(std::min(images.size(), start + kChunk)));
        const auto maps = model.forward(to_tensor<float>(chunk));
        for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back(resize_outputs(to_level_outputs(maps, static_cast<int>(i))));
    }
    return out;
}

LevelOutputs predict(const SegModel& model, const Image& image) { return predict(model, std::vector<const Image*>{&image}).front(); }

}  // namespace qunet::nn
