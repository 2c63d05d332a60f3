#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "qunet/data/synthetic.hpp"
#include "qunet/eval/baseline.hpp"
#include "qunet/eval/metrics.hpp"
#include "qunet/eval/overlay.hpp"
#include "qunet/select/selection.hpp"
#include "support.hpp"

using namespace qunet;
using namespace qunet::eval;

namespace {

Mask mask_with(int h, int w, int count) {
    Mask m(h, w);
    for (int i = 0; i < count; ++i) m[static_cast<std::size_t>(i)] = 1;
    return m;
}

std::vector<const data::SliceRecord*> pointers(const data::StackDataset& ds) {
    std::vector<const data::SliceRecord*> out;
    for (const auto& r : ds.records) out.push_back(&r);
    return out;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("confusion counts") {
    Rng rng(1);
    const Mask y = testing::random_mask(rng, 8, 8, 0.4);
    auto c = confusion(y, y);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    Mask inv = y;
    for (auto& v : inv) v = 1 - v;
    c = confusion(inv, y);
    CHECK(c.tp == 0);
    CHECK(c.tn == 0);

    c = confusion(Mask(4, 4), Mask(4, 4));
    CHECK(c.tn == 16);
    CHECK(c.tp + c.fp + c.fn == 0);

    for (int t = 0; t < 20; ++t) {
        const Mask p = testing::random_mask(rng, 8, 8, 0.5);
        const Mask g = testing::random_mask(rng, 8, 8, 0.5);
        std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
        for (int yy = 0; yy < 8; ++yy) {
            for (int xx = 0; xx < 8; ++xx) {
                const bool a = p(yy, xx), b = g(yy, xx);
                tp += a && b;
                fp += a && !b;
                fn += !a && b;
                tn += !a && !b;
            }
        }
        const auto k = confusion(p, g);
        CHECK(k.tp == tp);
        CHECK(k.fp == fp);
        CHECK(k.fn == fn);
        CHECK(k.tn == tn);
        CHECK(k.total() == 64);
    }
    CHECK_THROWS_AS(confusion(Mask(2, 2), Mask(2, 3)), ShapeError);
}

TEST_CASE("metric formulas") {
    const Mask y = mask_with(4, 4, 5);
    const auto perfect = seg_metrics(y, y);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.jaccard == 1.0);
    CHECK(perfect.dice == 1.0);
    CHECK(perfect.accuracy == 1.0);

    const auto m = metrics_from_counts({2, 2, 4, 56});
    CHECK(m.precision == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.recall == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(m.jaccard == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(m.dice == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(m.accuracy == doctest::Approx(58.0 / 64.0).epsilon(1e-15));
}

TEST_CASE("empty mask conventions") {
    const auto both = seg_metrics(Mask(4, 4), Mask(4, 4));
    CHECK(both.precision == 1.0);
    CHECK(both.recall == 1.0);
    CHECK(both.jaccard == 1.0);
    CHECK(both.dice == 1.0);

    const auto missed = seg_metrics(Mask(4, 4), mask_with(4, 4, 3));
    CHECK(missed.precision == 0.0);
    CHECK(missed.recall == 0.0);
    CHECK(missed.jaccard == 0.0);

    const auto spurious = seg_metrics(mask_with(4, 4, 3), Mask(4, 4));
    CHECK(spurious.precision == 0.0);
    CHECK(spurious.recall == 0.0);
    CHECK(spurious.dice == 0.0);
}

TEST_CASE("metric identities on random pairs") {
    Rng rng(2);
    for (int t = 0; t < 100; ++t) {
        const Mask p = testing::random_mask(rng, 6, 6, uniform(rng, 0.0, 0.8));
        const Mask y = testing::random_mask(rng, 6, 6, uniform(rng, 0.0, 0.8));
        const auto m = seg_metrics(p, y);
        CHECK(std::abs(m.dice - 2 * m.jaccard / (1 + m.jaccard)) < 1e-12);
        CHECK(m.jaccard <= m.dice);
        for (double v : {m.precision, m.recall, m.jaccard, m.dice, m.accuracy}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        const auto c = confusion(p, y);
        CHECK(m.accuracy == doctest::Approx(1.0 - double(c.fp + c.fn) / c.total()).epsilon(1e-15));
        CHECK(std::abs(m.jaccard - select::jaccard(p, y)) < 1e-15);
    }
}

TEST_CASE("aggregation is a per-slice mean") {
    const std::vector<Metrics> v{metrics_from_counts({1, 0, 0, 3}), metrics_from_counts({0, 1, 1, 2})};
    const auto mean = mean_metrics(v);
    CHECK(mean.dice == doctest::Approx(0.5));
    CHECK(mean.accuracy == doctest::Approx((1.0 + 0.5) / 2));
    const auto sd = stddev_metrics(v);
    CHECK(sd.dice == doctest::Approx(0.5));
}

TEST_CASE("overlay colours") {
    Mask p(4, 4), y(4, 4);
    p(0, 0) = y(0, 0) = 1;  // tp
    p(1, 1) = 1;            // fp
    y(2, 2) = 1;            // fn
    Image im(4, 4, 0.5);
    im(3, 3) = 1.0;
    const auto rgb = render_overlay(p, y, im);
    CHECK(rgb(0, 0) == Rgb{255, 0, 255});
    CHECK(rgb(1, 1) == Rgb{0, 0, 255});
    CHECK(rgb(2, 2) == Rgb{255, 0, 0});
    CHECK(rgb(3, 3) == Rgb{255, 255, 255});
    CHECK(rgb(0, 3) == Rgb{128, 128, 128});

    const auto only_red = render_overlay(Mask(4, 4), y, im);
    for (int yy = 0; yy < 4; ++yy) {
        for (int xx = 0; xx < 4; ++xx) {
            const auto c = only_red(yy, xx);
            if (y(yy, xx)) CHECK(c == kFalseNegative);
            else CHECK((c[0] == c[1] && c[1] == c[2]));
        }
    }
    const auto same = render_overlay(y, y, im);
    for (std::size_t i = 0; i < same.size(); ++i) {
        const auto c = same[i];
        CHECK((y[i] ? c == kTruePositive : (c[0] == c[1] && c[1] == c[2])));
    }
    CHECK_THROWS_AS(render_overlay(Mask(4, 4), Mask(4, 4), Image(3, 4)), ShapeError);

    testing::TempDir dir("overlay");
    write_png_rgb(dir / "o.png", rgb);
    CHECK(read_png_rgb(dir / "o.png") == rgb);
}

TEST_CASE("metrics csv layout") {
    Evaluation ev;
    ev.per_slice.push_back({{"s", 0}, metrics_from_counts({2, 2, 4, 56})});
    ev.per_slice.push_back({{"s", 1}, metrics_from_counts({0, 0, 0, 64})});
    std::vector<Metrics> all{ev.per_slice[0].metrics, ev.per_slice[1].metrics};
    ev.mean = mean_metrics(all);
    testing::TempDir dir("metrics");
    write_metrics_csv(dir / "metrics.csv", ev);
    std::ifstream in(dir / "metrics.csv");
    std::string header, a, b, mean;
    std::getline(in, header);
    std::getline(in, a);
    std::getline(in, b);
    std::getline(in, mean);
    CHECK(header == "stack_id,slice_index,precision,recall,jaccard,dice,accuracy");
    CHECK(a.rfind("s,0,", 0) == 0);
    CHECK(mean.rfind("MEAN,", 0) == 0);
}

TEST_CASE("random subsets") {
    data::SyntheticSpec spec;
    spec.n_stacks = 1;
    spec.slices_per_stack = 20;
    spec.image_size = 16;
    spec.lesion_radius_range = {2, 3};
    const auto ds = data::generate_synthetic_stack(spec);
    const auto all = pointers(ds);
    const auto a = random_subset(all, 5, 3);
    const auto b = random_subset(all, 5, 3);
    CHECK(a == b);
    CHECK(a.size() == 5);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(std::set<const data::SliceRecord*>(a.begin(), a.end()).size() == 5);
}

TEST_CASE("baseline determinism and boundaries") {
    data::SyntheticSpec spec;
    spec.n_stacks = 1;
    spec.slices_per_stack = 8;
    spec.image_size = 16;
    spec.lesion_radius_range = {2, 3};
    const auto ds = data::normalize_dataset(data::generate_synthetic_stack(spec), 16);
    const auto all = pointers(ds);

    BaselineConfig cfg;
    cfg.fraction = 0.25;
    cfg.runs = 2;
    cfg.model.input_size = 16;
    cfg.model.base_channels = 2;
    cfg.train.epochs = 1;
    cfg.train.batch_size = 2;
    cfg.run_seeds = {7, 7};
    const auto r = random_baseline(all, cfg);
    REQUIRE(r.runs.size() == 2);
    CHECK(r.runs[0].n_train == 2);
    CHECK(r.runs[0].n_test == 6);
    CHECK(r.runs[0].mean.dice == r.runs[1].mean.dice);
    CHECK(r.runs[0].mean.precision == r.runs[1].mean.precision);
    CHECK(r.stddev.dice == 0.0);

    testing::TempDir dir("baseline");
    write_baseline_csv(dir / "baseline_runs.csv", r);
    std::ifstream in(dir / "baseline_runs.csv");
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 1 + 2 + 2);

    cfg.fraction = 0.99;
    CHECK_THROWS_AS(random_baseline(all, cfg), ValidationError);
    cfg.fraction = 1.0;
    CHECK_THROWS_AS(random_baseline(all, cfg), ConfigError);
    cfg.fraction = 0.0;
    CHECK_THROWS_AS(random_baseline(all, cfg), ConfigError);
}

TEST_CASE("desk-scale baseline beats an untrained model") {
    const auto ds = data::normalize_dataset(data::generate_synthetic_stack(data::SyntheticSpec{}), 64);
    const auto all = pointers(ds);
    BaselineConfig cfg;
    cfg.fraction = 0.25;
    cfg.runs = 5;
    cfg.model.input_size = 64;
    cfg.model.base_channels = 8;
    cfg.train.epochs = 10;
    cfg.train.batch_size = 2;
    cfg.train.learning_rate = 1e-3;
    cfg.seed = 11;
    const auto r = random_baseline(all, cfg);

    const nn::SegModel untrained(cfg.model, 11);
    const double floor = evaluate(untrained, all).mean.dice;
    MESSAGE("baseline dice " << r.mean.dice << " +- " << r.stddev.dice << ", untrained " << floor);
    CHECK(r.mean.dice > floor);
}

}  // TEST_SUITE
