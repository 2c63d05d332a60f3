#include "qunet/train/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "qunet/train/dice_loss.hpp"

namespace qunet::train {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
    if (epochs <= 0) throw ConfigError("epochs must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"learning_rate", c.learning_rate},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"augmentation", c.augmentation},
                       {"rotation", c.augment.rotation},
                       {"width_shift", c.augment.width_shift},
                       {"height_shift", c.augment.height_shift},
                       {"shear", c.augment.shear},
                       {"horizontal_flip", c.augment.horizontal_flip},
                       {"vertical_flip", c.augment.vertical_flip},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    c = TrainConfig{};
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.augmentation = j.value("augmentation", c.augmentation);
    c.augment.rotation = j.value("rotation", c.augment.rotation);
    c.augment.width_shift = j.value("width_shift", c.augment.width_shift);
    c.augment.height_shift = j.value("height_shift", c.augment.height_shift);
    c.augment.shear = j.value("shear", c.augment.shear);
    c.augment.horizontal_flip = j.value("horizontal_flip", c.augment.horizontal_flip);
    c.augment.vertical_flip = j.value("vertical_flip", c.augment.vertical_flip);
    c.seed = j.value("seed", c.seed);
}

void to_json(nlohmann::json& j, const LossHistory& h) {
    j = nlohmann::json::array();
    for (std::size_t e = 0; e < h.epochs(); ++e) {
        j.push_back({{"epoch", e + 1}, {"levels", h.levels[e]}, {"combined", h.combined[e]}});
    }
}

void from_json(const nlohmann::json& j, LossHistory& h) {
    h = LossHistory{};
    for (const auto& row : j) {
        h.levels.push_back(row.at("levels").get<LevelLosses>());
        h.combined.push_back(row.at("combined").get<double>());
    }
}

void write_loss_csv(const std::filesystem::path& path, const LossHistory& history) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "epoch,l1,l2,l3,l4,combined\n";
    out.precision(17);
    for (std::size_t e = 0; e < history.epochs(); ++e) {
        out << e + 1;
        for (double v : history.levels[e]) out << ',' << v;
        out << ',' << history.combined[e] << '\n';
    }
}

LossHistory read_loss_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    LossHistory h;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(row, cell, ',')) v.push_back(std::stod(cell));
        if (v.size() != 6) throw ValidationError("malformed loss history row in " + path.string());
        h.levels.push_back({v[1], v[2], v[3], v[4]});
        h.combined.push_back(v[5]);
    }
    return h;
}

template <typename T>
double deep_supervision_step(nn::UNetPlusPlus<T>& model, const nn::Tensor<T>& images, const nn::Tensor<T>& targets,
                             Rng& dropout_rng, LevelLosses* per_level, bool backprop) {
    typename nn::UNetPlusPlus<T>::Trace trace;
    const auto maps = model.forward_train(images, dropout_rng, trace);
    nn::HeadMaps<T> d_heads;
    double combined = 0.0;
    const double weight = 1.0 / nn::kHeads;
    for (int k = 0; k < nn::kHeads; ++k) {
        const auto& native = maps[k];
        const bool full = native.h == targets.h && native.w == targets.w;
        const nn::Tensor<T> p = full ? native : nn::upsample_bilinear(native, targets.h, targets.w);
        nn::Tensor<T> dp(p.n, p.c, p.h, p.w);
        const double loss = dice_loss_with_gradient(p.data.data(), targets.data.data(), p.size(), dp.data.data(), weight);
        if (per_level) (*per_level)[k] = loss;
        combined += weight * loss;
        if (backprop) d_heads[k] = full ? std::move(dp) : nn::upsample_bilinear_backward(dp, native.h, native.w);
    }
    if (backprop) model.backward(trace, d_heads);
    return combined;
}

template double deep_supervision_step(nn::UNetPlusPlus<float>&, const nn::Tensor<float>&, const nn::Tensor<float>&, Rng&,
                                      LevelLosses*, bool);
template double deep_supervision_step(nn::UNetPlusPlus<double>&, const nn::Tensor<double>&, const nn::Tensor<double>&, Rng&,
                                      LevelLosses*, bool);

template <typename T>
void Adam<T>::step(nn::UNetPlusPlus<T>& model) {
    ++step_;
    std::size_t index = 0;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    model.for_each_param([&](nn::Param<T>& p) {
        if (!p.trainable) return;
        if (index >= m_.size()) {
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
        auto& m = m_[index];
        auto& v = v_[index];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double g = p.grad[k];
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
            const double update = lr_ * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps_);
            p.value[k] = static_cast<T>(p.value[k] - update);
        }
        ++index;
    });
}

template class Adam<float>;
template class Adam<double>;

LossHistory train(nn::SegModel& model, std::span<const data::SliceRecord* const> train_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    config.validate();
    if (train_set.empty()) throw ValidationError("train: empty training set");
    const int size = model.config().input_size;
    std::string missing;
    for (const auto* r : train_set) {
        if (!r->annotation) missing += (missing.empty() ? "" : ", ") + data::to_string(r->key());
        if (r->image.height() != size || r->image.width() != size) {
            throw ShapeError("train: slice " + data::to_string(r->key()) + " is not " + std::to_string(size) + "x" +
                             std::to_string(size));
        }
    }
    if (!missing.empty()) throw ValidationError("train: slices without annotation: " + missing);

    const auto n = train_set.size();
    const auto batch = static_cast<std::size_t>(config.batch_size);
    Adam<float> optimizer(config.learning_rate, config.beta1, config.beta2, config.epsilon);
    LossHistory history;
    std::vector<std::size_t> order(n);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(config.seed, 0x5eed, static_cast<std::uint64_t>(epoch)));
        shuffle(order.begin(), order.end(), shuffle_rng);

        LevelLosses epoch_levels{};
        double epoch_combined = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            nn::Tensor<float> images(static_cast<int>(count), 1, size, size);
            nn::Tensor<float> targets(static_cast<int>(count), 1, size, size);
            for (std::size_t b = 0; b < count; ++b) {
                const std::size_t idx = order[start + b];
                const auto& rec = *train_set[idx];
                Image img = rec.image;
                Mask ann = *rec.annotation;
                if (config.augmentation) {
                    std::tie(img, ann) = augment(img, ann, config.augment,
                                                 derive_seed(config.seed, static_cast<std::uint64_t>(epoch), idx + 1));
                }
                float* di = images.sample(static_cast<int>(b));
                float* dt = targets.sample(static_cast<int>(b));
                for (std::size_t p = 0; p < img.size(); ++p) {
                    di[p] = static_cast<float>(img[p]);
                    dt[p] = static_cast<float>(ann[p]);
                }
            }

            Rng dropout_rng(derive_seed(config.seed, 0xd0d0 + static_cast<std::uint64_t>(epoch), start));
            model.zero_grad();
            LevelLosses levels{};
            const double loss = deep_supervision_step(model, images, targets, dropout_rng, &levels);
            if (!std::isfinite(loss)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batches + 1));
            }
            optimizer.step(model);
            for (int k = 0; k < nn::kHeads; ++k) epoch_levels[k] += levels[k];
            epoch_combined += loss;
            ++batches;
        }
        for (auto& v : epoch_levels) v /= batches;
        epoch_combined /= batches;
        history.levels.push_back(epoch_levels);
        history.combined.push_back(epoch_combined);
        if (on_epoch) on_epoch(epoch, epoch_levels, epoch_combined);
    }
    return history;
}

}  // namespace qunet::train
