#include "qunet/app/plots.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace qunet::app {

namespace {

constexpr int kPanel = 320;
constexpr int kMargin = 24;
constexpr Rgb kWhite{255, 255, 255};
constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGray{140, 140, 140};
constexpr Rgb kShade{214, 236, 214};
constexpr Rgb kRed{220, 30, 30};
constexpr Rgb kOrange{240, 150, 20};
constexpr std::array<Rgb, 4> kLevelColors{{{40, 90, 220}, {30, 160, 60}, {240, 150, 20}, {220, 30, 30}}};

struct Axis {
    double lo = 0.0;
    double hi = 1.0;

    void include(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (hi <= lo) hi = lo + 1.0;
        const double d = 0.05 * (hi - lo);
        lo -= d;
        hi += d;
    }
    double frac(double v) const { return (v - lo) / (hi - lo); }
};

Axis fresh_axis() { return {std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()}; }

void frame(Canvas& c, int ox) {
    const int x0 = ox + kMargin;
    const int y1 = kPanel - kMargin;
    c.line(x0, kMargin, x0, y1, kBlack);
    c.line(x0, y1, ox + kPanel - kMargin, y1, kBlack);
}

int to_px(int ox, const Axis& ax, double v) {
    return ox + kMargin + static_cast<int>(std::lround(ax.frac(v) * (kPanel - 2 * kMargin)));
}

int to_py(const Axis& ay, double v) {
    return kPanel - kMargin - static_cast<int>(std::lround(ay.frac(v) * (kPanel - 2 * kMargin)));
}

}  // namespace

Canvas::Canvas(int width, int height, Rgb background) : pixels_(height, width, background) {}

void Canvas::put(int x, int y, Rgb color) {
    if (x >= 0 && y >= 0 && x < pixels_.width() && y < pixels_.height()) pixels_(y, x) = color;
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Rgb color) {
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) put(x, y, color);
    }
}

void Canvas::line(int x0, int y0, int x1, int y1, Rgb color) {
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        put(x0, y0, color);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void Canvas::disc(int cx, int cy, int radius, Rgb color) {
    for (int y = -radius; y <= radius; ++y) {
        for (int x = -radius; x <= radius; ++x) {
            if (x * x + y * y <= radius * radius) put(cx + x, cy + y, color);
        }
    }
}

RgbImage plot_quality_scatter(std::span<const quality::ScoredSlice> scores, const quality::InitialSelection& initial) {
    std::map<std::string, std::vector<const quality::ScoredSlice*>> by_stack;
    for (const auto& s : scores) by_stack[s.key.stack_id].push_back(&s);
    const std::set<data::SliceKey> s0(initial.s0.begin(), initial.s0.end());
    const std::set<data::SliceKey> dropped(initial.eliminated_by_dedup.begin(), initial.eliminated_by_dedup.end());

    Canvas canvas(kPanel * static_cast<int>(std::max<std::size_t>(by_stack.size(), 1)), kPanel, kWhite);
    int ox = 0;
    for (const auto& [stack, slices] : by_stack) {
        Axis ax = fresh_axis();
        Axis ay = fresh_axis();
        for (const auto* s : slices) {
            if (s->scores.blur_is_max()) continue;
            ax.include(s->scores.blurriness);
            ay.include(s->scores.psnr_inv);
        }
        const auto t = initial.thresholds_used.find(stack);
        if (t != initial.thresholds_used.end()) {
            ax.include(t->second.blurriness);
            ay.include(t->second.psnr_inv);
        }
        if (ax.lo > ax.hi) ax = {0.0, 1.0};
        if (ay.lo > ay.hi) ay = {0.0, 1.0};
        ax.pad();
        ay.pad();
        if (t != initial.thresholds_used.end()) {
            canvas.fill_rect(ox + kMargin + 1, to_py(ay, t->second.psnr_inv), to_px(ox, ax, t->second.blurriness),
                             kPanel - kMargin - 1, kShade);
        }
        frame(canvas, ox);
        for (const auto* s : slices) {
            if (s->scores.blur_is_max()) continue;
            const Rgb color = s0.count(s->key) ? kRed : dropped.count(s->key) ? kOrange : kGray;
            canvas.disc(to_px(ox, ax, s->scores.blurriness), to_py(ay, s->scores.psnr_inv), 3, color);
        }
        ox += kPanel;
    }
    return canvas.pixels();
}

RgbImage plot_loss_curves(const std::vector<train::LossHistory>& histories) {
    Canvas canvas(kPanel * static_cast<int>(std::max<std::size_t>(histories.size(), 1)), kPanel, kWhite);
    int ox = 0;
    for (const auto& h : histories) {
        frame(canvas, ox);
        const auto n = h.epochs();
        if (n > 0) {
            Axis ax{1.0, static_cast<double>(std::max<std::size_t>(n, 2))};
            Axis ay = fresh_axis();
            for (std::size_t e = 0; e < n; ++e) {
                ay.include(h.combined[e]);
                for (double v : h.levels[e]) ay.include(v);
            }
            ay.pad();
            const auto curve = [&](auto value, Rgb color) {
                for (std::size_t e = 1; e < n; ++e) {
                    canvas.line(to_px(ox, ax, static_cast<double>(e)), to_py(ay, value(e - 1)),
                                to_px(ox, ax, static_cast<double>(e + 1)), to_py(ay, value(e)), color);
                }
                if (n == 1) canvas.disc(to_px(ox, ax, 1.0), to_py(ay, value(0)), 2, color);
            };
            for (int k = 0; k < nn::kHeads; ++k) {
                curve([&](std::size_t e) { return h.levels[e][static_cast<std::size_t>(k)]; }, kLevelColors[static_cast<std::size_t>(k)]);
            }
            curve([&](std::size_t e) { return h.combined[e]; }, kBlack);
        }
        ox += kPanel;
    }
    return canvas.pixels();
}

}  // namespace qunet::app
