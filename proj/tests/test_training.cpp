#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include "qunet/data/synthetic.hpp"
#include "qunet/eval/metrics.hpp"
#include "qunet/nn/checkpoint.hpp"
#include "qunet/train/augment.hpp"
#include "qunet/train/dice_loss.hpp"
#include "qunet/train/trainer.hpp"
#include "support.hpp"

using namespace qunet;
using namespace qunet::train;

namespace {

std::vector<double> as_real(const Mask& m) { return {m.begin(), m.end()}; }

std::vector<data::SliceRecord> tiny_records(std::uint64_t seed, int n, int size) {
    data::SyntheticSpec spec;
    spec.n_stacks = 1;
    spec.slices_per_stack = n;
    spec.image_size = size;
    spec.lesion_count_range = {1, 2};
    spec.lesion_radius_range = {2, 3};
    spec.test_fraction = 0.0;
    spec.seed = seed;
    auto ds = data::normalize_dataset(data::generate_synthetic_stack(spec), size);
    return ds.records;
}

std::vector<const data::SliceRecord*> pointers(const std::vector<data::SliceRecord>& records) {
    std::vector<const data::SliceRecord*> out;
    for (const auto& r : records) out.push_back(&r);
    return out;
}

nn::ModelConfig tiny_model(int size) {
    nn::ModelConfig c;
    c.input_size = size;
    c.base_channels = 2;
    c.dropout_rate = 0.0;
    return c;
}

std::vector<float> trainable_values(const nn::SegModel& model) {
    std::vector<float> out;
    model.for_each_param([&](const nn::Param<float>& p) {
        if (p.trainable) out.insert(out.end(), p.value.begin(), p.value.end());
    });
    return out;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("dice loss examples") {
    const std::vector<double> zeros(16, 0.0);
    CHECK(dice_loss(zeros, zeros) == 0.0);

    Mask m(4, 4);
    for (int i = 0; i < 8; ++i) m[static_cast<std::size_t>(i)] = 1;
    const auto v = as_real(m);
    CHECK(dice_loss(v, v) == doctest::Approx(-16.0 / 17.0).epsilon(1e-12));

    Mask other(4, 4);
    for (int i = 8; i < 16; ++i) other[static_cast<std::size_t>(i)] = 1;
    CHECK(dice_loss(v, as_real(other)) == 0.0);

    CHECK_THROWS_AS(dice_loss(std::vector<double>(3, 0.0), std::vector<double>(4, 0.0)), ShapeError);
}

TEST_CASE("dice loss range and symmetry on binary maps") {
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        const auto a = as_real(testing::random_mask(rng, 5, 5, 0.4));
        const auto b = as_real(testing::random_mask(rng, 5, 5, 0.4));
        const double l = dice_loss(a, b);
        CHECK(l <= 0.0);
        CHECK(l > -1.0);
        CHECK(l == dice_loss(b, a));
    }
}

TEST_CASE("dice loss tends to the unsmoothed dice on large masks") {
    Rng rng(5);
    for (int t = 0; t < 3; ++t) {
        const Mask p = testing::random_mask(rng, 128, 128, 0.5);
        const Mask y = testing::random_mask(rng, 128, 128, 0.5);
        REQUIRE(count_nonzero(p) + count_nonzero(y) >= 10000);
        const double d = eval::seg_metrics(p, y).dice;
        CHECK(std::abs(-dice_loss(as_real(p), as_real(y)) - d) < 1e-3);
    }
}

TEST_CASE("gradient check on random 3x3 maps") {
    Rng rng(3);
    for (int t = 0; t < 20; ++t) {
        Image p = testing::random_image(rng, 3, 3);
        for (auto& v : p) v = 0.05 + 0.9 * v;
        const Mask y = testing::random_mask(rng, 3, 3, 0.5);
        CHECK(gradient_check(p, y) < 1e-4);
    }
}

TEST_CASE("gradient with empty ground truth is the denominator path only") {
    Rng rng(4);
    const Image p = testing::random_image(rng, 3, 3);
    const Mask y(3, 3);
    const std::vector<double> pv(p.begin(), p.end());
    const auto g = dice_loss_gradient(pv, as_real(y));
    for (double v : g) CHECK(v == 0.0);
    CHECK(gradient_check(p, y) < 1e-4);
}

TEST_CASE("gradient at uniform 0.5 with a single foreground pixel") {
    const std::vector<double> p(9, 0.5);
    std::vector<double> y(9, 0.0);
    y[4] = 1.0;
    // sum P = 4.5, sum Y = 1, sum PY = 0.5, denominator 6.5.
    const double shared = 2.0 * 0.5 / (6.5 * 6.5);
    const auto g = dice_loss_gradient(p, y);
    for (std::size_t k = 0; k < 9; ++k) {
        const double expected = (k == 4 ? -2.0 / 6.5 : 0.0) + shared;
        CHECK(g[k] == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(dice_loss(p, y) == doctest::Approx(-1.0 / 6.5).epsilon(1e-12));
}

TEST_CASE("gradient_check on a generic function") {
    const LossFn f = [](std::span<const double> x) { return x[0] * x[0] * x[1]; };
    const GradFn g = [](std::span<const double> x) { return std::vector<double>{2 * x[0] * x[1], x[0] * x[0]}; };
    const std::vector<double> point{0.7, -1.3};
    CHECK(gradient_check(f, g, point) < 1e-8);
    const GradFn wrong = [](std::span<const double> x) { return std::vector<double>{x[0] * x[1], x[0] * x[0]}; };
    CHECK(gradient_check(f, wrong, point) > 0.1);
}

TEST_CASE("zero affine draw is the identity") {
    Rng rng(8);
    const Image im = testing::random_image(rng, 12, 12);
    const Mask m = testing::random_mask(rng, 12, 12, 0.3);
    const auto [im2, m2] = apply_affine(im, m, AffineParams{});
    for (std::size_t i = 0; i < im.size(); ++i) CHECK(im2[i] == doctest::Approx(im[i]).epsilon(1e-12));
    CHECK(m2 == m);

    AugmentConfig none;
    none.rotation = none.width_shift = none.height_shift = none.shear = 0.0;
    none.horizontal_flip = false;
    const auto [im3, m3] = augment(im, m, none, 99);
    CHECK(m3 == m);
    for (std::size_t i = 0; i < im.size(); ++i) CHECK(im3[i] == doctest::Approx(im[i]).epsilon(1e-12));
}

TEST_CASE("horizontal flip reverses columns") {
    Rng rng(9);
    const Image im = testing::random_image(rng, 7, 10);
    const Mask m = testing::random_mask(rng, 7, 10, 0.4);
    AffineParams flip;
    flip.flip_horizontal = true;
    const auto [im2, m2] = apply_affine(im, m, flip);
    for (int y = 0; y < 7; ++y) {
        for (int x = 0; x < 10; ++x) {
            CHECK(im2(y, x) == doctest::Approx(im(y, 9 - x)).epsilon(1e-12));
            CHECK(m2(y, x) == m(y, 9 - x));
        }
    }
}

TEST_CASE("augmentation keeps masks binary, never flips vertically, and is seeded") {
    Rng rng(10);
    const Image im = testing::random_image(rng, 16, 16);
    const Mask m = testing::random_mask(rng, 16, 16, 0.5);
    const AugmentConfig config;
    for (std::uint64_t s = 0; s < 30; ++s) {
        const auto [a, am] = augment(im, m, config, s);
        const auto [b, bm] = augment(im, m, config, s);
        CHECK(is_binary(am));
        CHECK(a == b);
        CHECK(am == bm);
        Rng draw(s);
        const auto p = sample_affine(config, draw);
        CHECK_FALSE(p.flip_vertical);
        CHECK(std::abs(p.rotation) <= 0.2);
        CHECK(std::abs(p.shift_x) <= 0.2);
        CHECK(std::abs(p.shift_y) <= 0.2);
        CHECK(std::abs(p.shear) <= 0.2);
    }
}

TEST_CASE("train rejects an empty set and unannotated slices") {
    nn::SegModel model(tiny_model(16), 1);
    TrainConfig config;
    config.epochs = 1;
    std::vector<const data::SliceRecord*> none;
    CHECK_THROWS_AS(train::train(model, none, config), ValidationError);

    auto records = tiny_records(1, 2, 16);
    records[1].annotation.reset();
    const auto ptrs = pointers(records);
    CHECK_THROWS_WITH_AS(train::train(model, ptrs, config), doctest::Contains("stack0/1"), ValidationError);
}

TEST_CASE("zero learning rate leaves trainable parameters unchanged") {
    const auto records = tiny_records(2, 4, 16);
    const auto ptrs = pointers(records);
    nn::SegModel model(tiny_model(16), 3);
    const auto before = trainable_values(model);
    TrainConfig config;
    config.learning_rate = 0.0;
    config.epochs = 2;
    config.batch_size = 2;
    train::train(model, ptrs, config);
    CHECK(trainable_values(model) == before);
}

TEST_CASE("loss history has one entry per epoch and level") {
    const auto records = tiny_records(3, 4, 16);
    const auto ptrs = pointers(records);
    nn::SegModel model(tiny_model(16), 4);
    TrainConfig config;
    config.epochs = 3;
    config.batch_size = 2;
    config.learning_rate = 1e-3;
    int calls = 0;
    const auto h = train::train(model, ptrs, config, [&](int, const LevelLosses&, double) { ++calls; });
    CHECK(h.epochs() == 3);
    CHECK(h.levels.size() == 3);
    CHECK(calls == 3);
    for (std::size_t e = 0; e < 3; ++e) {
        double mean = 0.0;
        for (double v : h.levels[e]) mean += v / nn::kHeads;
        CHECK(h.combined[e] == doctest::Approx(mean).epsilon(1e-9));
    }

    testing::TempDir dir("loss");
    write_loss_csv(dir / "loss.csv", h);
    const auto back = read_loss_csv(dir / "loss.csv");
    REQUIRE(back.epochs() == 3);
    for (std::size_t e = 0; e < 3; ++e) CHECK(back.combined[e] == doctest::Approx(h.combined[e]).epsilon(1e-12));
}

TEST_CASE("combined loss decreases over five epochs") {
    int passes = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto records = tiny_records(100 + seed, 10, 32);
        const auto ptrs = pointers(records);
        nn::ModelConfig mc = tiny_model(32);
        mc.base_channels = 4;
        nn::SegModel model(mc, seed);
        TrainConfig config;
        config.epochs = 5;
        config.batch_size = 2;
        config.learning_rate = 1e-3;
        config.seed = seed;
        const auto h = train::train(model, ptrs, config);
        MESSAGE("seed " << seed << ": epoch 1 " << h.combined.front() << ", epoch 5 " << h.combined.back());
        passes += h.combined.back() < h.combined.front();
    }
    CHECK(passes >= 2);
}

TEST_CASE("training is reproducible for a fixed seed") {
    const auto records = tiny_records(5, 4, 16);
    const auto ptrs = pointers(records);
    TrainConfig config;
    config.epochs = 2;
    config.batch_size = 2;
    config.learning_rate = 1e-3;
    config.seed = 42;
    nn::ModelConfig mc = tiny_model(16);
    mc.dropout_rate = 0.3;
    nn::SegModel a(mc, 6);
    nn::SegModel b(mc, 6);
    const auto ha = train::train(a, ptrs, config);
    const auto hb = train::train(b, ptrs, config);
    CHECK(ha.combined == hb.combined);

    testing::TempDir dir("repro");
    nn::save_checkpoint(dir / "a.qckpt", a);
    nn::save_checkpoint(dir / "b.qckpt", b);
    std::ifstream fa(dir / "a.qckpt", std::ios::binary);
    std::ifstream fb(dir / "b.qckpt", std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {});
    const std::string sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(!sa.empty());
    CHECK(sa == sb);
}

TEST_CASE("a single repeated example is overfit") {
    data::SyntheticSpec spec;
    spec.n_stacks = 1;
    spec.slices_per_stack = 1;
    spec.image_size = 32;
    spec.lesion_count_range = {2, 2};
    spec.lesion_radius_range = {4, 6};
    spec.degraded_fraction = 0.0;
    spec.test_fraction = 0.0;
    spec.seed = 21;
    const auto ds = data::normalize_dataset(data::generate_synthetic_stack(spec), spec.image_size);
    const auto& rec = ds.records.front();
    std::vector<const data::SliceRecord*> copies(4, &rec);

    nn::ModelConfig mc;
    mc.input_size = spec.image_size;
    mc.base_channels = 8;
    mc.dropout_rate = 0.0;
    nn::SegModel model(mc, 8);
    TrainConfig config;
    config.epochs = 60;
    config.batch_size = 2;
    config.learning_rate = 1e-3;
    config.augmentation = false;
    train::train(model, copies, config);

    const auto out = nn::predict(model, rec.image);
    const double dice = eval::seg_metrics(binarize(out.levels[nn::kHeads - 1]), *rec.annotation).dice;
    MESSAGE("overfit dice " << dice);
    CHECK(dice > 0.9);
}

}  // TEST_SUITE
