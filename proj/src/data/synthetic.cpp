#include "qunet/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "qunet/core/image_ops.hpp"
#include "qunet/core/random.hpp"
#include "qunet/data/manifest.hpp"

namespace qunet::data {

namespace {

constexpr double kPi = std::numbers::pi;

struct Wave {
    double kx = 0.0;
    double ky = 0.0;
    double phase = 0.0;
    double drift = 0.0;
};

struct StackLayout {
    double cx = 0.0;
    double cy = 0.0;
    double ax = 0.0;
    double ay = 0.0;
    std::array<Wave, 4> waves{};
    std::vector<bool> degraded;
    std::vector<bool> test;
};

std::vector<bool> pick_subset(int n, int k, Rng& rng) {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[i] = i;
    shuffle(order.begin(), order.end(), rng);
    std::vector<bool> out(static_cast<std::size_t>(n), false);
    for (int i = 0; i < std::min(k, n); ++i) out[order[i]] = true;
    return out;
}

StackLayout make_layout(const SyntheticSpec& spec, int stack) {
    Rng rng(derive_seed(spec.seed, 0x57ac, static_cast<std::uint64_t>(stack)));
    const double s = spec.image_size;
    StackLayout l;
    l.cx = s * uniform(rng, 0.46, 0.54);
    l.cy = s * uniform(rng, 0.46, 0.54);
    l.ax = s * uniform(rng, 0.36, 0.42);
    l.ay = s * uniform(rng, 0.30, 0.36);
    for (auto& w : l.waves) {
        const double wavelength = uniform(rng, 5.0, 14.0) * s / 64.0;
        const double angle = uniform(rng, 0.0, kPi);
        w.kx = 2.0 * kPi / wavelength * std::cos(angle);
        w.ky = 2.0 * kPi / wavelength * std::sin(angle);
        w.phase = uniform(rng, 0.0, 2.0 * kPi);
        w.drift = uniform(rng, 0.05, 0.2);
    }
    const int n = spec.slices_per_stack;
    l.degraded = pick_subset(n, static_cast<int>(std::lround(spec.degraded_fraction * n)), rng);
    l.test = pick_subset(n, static_cast<int>(std::lround(spec.test_fraction * n)), rng);
    return l;
}

}  // namespace

void validate(const SyntheticSpec& spec) {
    const auto fail = [](const std::string& m) { throw ConfigError("synthetic spec: " + m); };
    if (spec.n_stacks <= 0) fail("n_stacks must be positive");
    if (spec.slices_per_stack <= 0) fail("slices_per_stack must be positive");
    if (spec.image_size < 16) fail("image_size must be >= 16");
    if (spec.lesion_count_range.lo < 0 || spec.lesion_count_range.lo > spec.lesion_count_range.hi) fail("empty lesion_count_range");
    if (spec.lesion_radius_range.lo < 1 || spec.lesion_radius_range.lo > spec.lesion_radius_range.hi) fail("empty lesion_radius_range");
    if (spec.lesion_radius_range.hi * 4 >= spec.image_size) fail("lesion radius too large for image_size");
    if (spec.blur_sigma_range.lo < 0 || spec.blur_sigma_range.lo > spec.blur_sigma_range.hi) fail("empty blur_sigma_range");
    if (spec.contrast_range.lo < 0 || spec.contrast_range.lo > spec.contrast_range.hi) fail("empty contrast_range");
    if (spec.noise_level < 0) fail("noise_level must be non-negative");
    if (spec.degraded_fraction < 0 || spec.degraded_fraction > 1) fail("degraded_fraction must lie in [0,1]");
    if (spec.test_fraction < 0 || spec.test_fraction >= 1) fail("test_fraction must lie in [0,1)");
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = nlohmann::json{
        {"n_stacks", s.n_stacks},
        {"slices_per_stack", s.slices_per_stack},
        {"image_size", s.image_size},
        {"lesion_count_range", {s.lesion_count_range.lo, s.lesion_count_range.hi}},
        {"lesion_radius_range", {s.lesion_radius_range.lo, s.lesion_radius_range.hi}},
        {"blur_sigma_range", {s.blur_sigma_range.lo, s.blur_sigma_range.hi}},
        {"contrast_range", {s.contrast_range.lo, s.contrast_range.hi}},
        {"noise_level", s.noise_level},
        {"degraded_fraction", s.degraded_fraction},
        {"test_fraction", s.test_fraction},
        {"seed", s.seed},
    };
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    s = SyntheticSpec{};
    s.n_stacks = j.value("n_stacks", s.n_stacks);
    s.slices_per_stack = j.value("slices_per_stack", s.slices_per_stack);
    s.image_size = j.value("image_size", s.image_size);
    if (j.contains("lesion_count_range")) s.lesion_count_range = {j["lesion_count_range"][0], j["lesion_count_range"][1]};
    if (j.contains("lesion_radius_range")) s.lesion_radius_range = {j["lesion_radius_range"][0], j["lesion_radius_range"][1]};
    if (j.contains("blur_sigma_range")) s.blur_sigma_range = {j["blur_sigma_range"][0], j["blur_sigma_range"][1]};
    if (j.contains("contrast_range")) s.contrast_range = {j["contrast_range"][0], j["contrast_range"][1]};
    s.noise_level = j.value("noise_level", s.noise_level);
    s.degraded_fraction = j.value("degraded_fraction", s.degraded_fraction);
    s.test_fraction = j.value("test_fraction", s.test_fraction);
    s.seed = j.value("seed", s.seed);
}

SyntheticResult generate_synthetic_detailed(const SyntheticSpec& spec) {
    validate(spec);
    const int size = spec.image_size;
    const double scale = size / 64.0;

    SyntheticResult result;
    result.dataset.image_size = size;

    for (int stack = 0; stack < spec.n_stacks; ++stack) {
        const StackLayout layout = make_layout(spec, stack);
        const std::string stack_id = "stack" + std::to_string(stack);

        for (int k = 0; k < spec.slices_per_stack; ++k) {
            Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(stack) + 1, static_cast<std::uint64_t>(k) + 1));

            // The ROI swells and shrinks through the stack like a lung field.
            const double t = (k + 0.5) / spec.slices_per_stack;
            const double grow = 0.8 + 0.2 * std::sin(kPi * t);
            const double ax = layout.ax * grow;
            const double ay = layout.ay * grow;

            Mask roi(size, size);
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    const double dx = (x + 0.5 - layout.cx) / ax;
                    const double dy = (y + 0.5 - layout.cy) / ay;
                    roi(y, x) = dx * dx + dy * dy <= 1.0 ? 1 : 0;
                }
            }

            std::vector<Lesion> lesions;
            const int count = uniform_int(rng, spec.lesion_count_range.lo, spec.lesion_count_range.hi);
            for (int n = 0; n < count; ++n) {
                Lesion les;
                les.rx = uniform_int(rng, spec.lesion_radius_range.lo, spec.lesion_radius_range.hi);
                les.ry = uniform_int(rng, spec.lesion_radius_range.lo, spec.lesion_radius_range.hi);
                bool placed = false;
                for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                    les.cx = uniform_int(rng, les.rx, size - 1 - les.rx);
                    les.cy = uniform_int(rng, les.ry, size - 1 - les.ry);
                    placed = true;
                    for (int y = les.cy - les.ry; y <= les.cy + les.ry && placed; ++y) {
                        for (int x = les.cx - les.rx; x <= les.cx + les.rx; ++x) {
                            if (les.contains(x, y) && !roi(y, x)) {
                                placed = false;
                                break;
                            }
                        }
                    }
                }
                if (!placed) {
                    les.cx = static_cast<int>(layout.cx);
                    les.cy = static_cast<int>(layout.cy);
                    les.rx = les.ry = spec.lesion_radius_range.lo;
                }
                lesions.push_back(les);
            }

            Mask annotation(size, size);
            for (const auto& les : lesions) {
                for (int y = std::max(0, les.cy - les.ry); y <= std::min(size - 1, les.cy + les.ry); ++y) {
                    for (int x = std::max(0, les.cx - les.rx); x <= std::min(size - 1, les.cx + les.rx); ++x) {
                        if (les.contains(x, y) && roi(y, x)) annotation(y, x) = 1;
                    }
                }
            }

            Image image(size, size);
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    double texture = 0.0;
                    for (const auto& w : layout.waves) {
                        texture += std::sin(w.kx * x + w.ky * y + w.phase + w.drift * k);
                    }
                    double v = roi(y, x) ? 0.35 + 0.03 * texture : 0.22 + 0.015 * texture;
                    if (annotation(y, x)) v += 0.3;
                    image(y, x) = v;
                }
            }

            const bool degraded = layout.degraded[k];
            double sigma = uniform(rng, 0.3, 0.8) * scale;
            double contrast = 1.0;
            if (degraded) {
                sigma = uniform(rng, spec.blur_sigma_range.lo, spec.blur_sigma_range.hi) * scale;
                contrast = uniform(rng, spec.contrast_range.lo, spec.contrast_range.hi);
            }
            image = gaussian_blur(image, sigma);
            if (contrast != 1.0) {
                double mean = 0.0;
                for (double v : image) mean += v;
                mean /= static_cast<double>(image.size());
                for (double& v : image) v = mean + contrast * (v - mean);
            }
            const double noise = spec.noise_level * uniform(rng, 0.5, 1.5);
            for (double& v : image) v = std::clamp(v + noise * standard_normal(rng), 0.0, 1.0);

            SliceRecord rec;
            rec.stack_id = stack_id;
            rec.slice_index = k;
            rec.image = std::move(image);
            rec.roi_mask = std::move(roi);
            rec.annotation = std::move(annotation);
            rec.split = layout.test[k] ? Split::test : Split::pool;
            result.dataset.records.push_back(std::move(rec));
            result.lesions.push_back(std::move(lesions));
            result.degraded.push_back(degraded);
        }
    }
    return result;
}

StackDataset generate_synthetic_stack(const SyntheticSpec& spec) { return generate_synthetic_detailed(spec).dataset; }

std::filesystem::path write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir) {
    const auto manifest = write_manifest(generate_synthetic_stack(spec), dir);
    std::ofstream out(dir / "spec.json");
    out << nlohmann::json(spec).dump(2) << '\n';
    return manifest;
}

}  // namespace qunet::data
