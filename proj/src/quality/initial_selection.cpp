#include "qunet/quality/initial_selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qunet::quality {

QuadrantSelection select_initial(std::span<const ScoredSlice> scores) {
    struct Acc {
        double blur_sum = 0.0;
        std::size_t blur_n = 0;
        double psnr_sum = 0.0;
        std::size_t psnr_n = 0;
    };
    std::map<std::string, Acc> acc;
    for (const auto& s : scores) {
        auto& a = acc[s.key.stack_id];
        if (!s.scores.blur_is_max()) {
            a.blur_sum += s.scores.blurriness;
            ++a.blur_n;
        }
        a.psnr_sum += s.scores.psnr_inv;
        ++a.psnr_n;
    }

    QuadrantSelection out;
    for (const auto& [stack, a] : acc) {
        out.thresholds[stack] = {a.blur_n ? a.blur_sum / static_cast<double>(a.blur_n) : 0.0,
                                 a.psnr_n ? a.psnr_sum / static_cast<double>(a.psnr_n) : 0.0};
    }
    for (const auto& s : scores) {
        if (s.scores.blur_is_max()) continue;
        const auto& a = acc[s.key.stack_id];
        if (a.blur_n == 0) continue;
        const auto& t = out.thresholds[s.key.stack_id];
        if (s.scores.blurriness < t.blurriness && s.scores.psnr_inv < t.psnr_inv) out.selected.push_back(s.key);
    }
    return out;
}

DedupResult dedup_epsilon(std::span<const DedupCandidate> candidates, double eps0, int cap) {
    if (eps0 < 0.0) throw ConfigError("dedup_epsilon: eps0 must be non-negative");
    if (cap <= 0) throw ConfigError("dedup_epsilon: cap must be positive");
    const std::size_t n = candidates.size();

    const auto zscore = [&](auto field) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = field(candidates[i]);
        const double sd = std::sqrt(variance(v));
        const double mean = n ? std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n) : 0.0;
        for (auto& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
        return v;
    };
    const auto cov = zscore([](const DedupCandidate& c) { return c.roi_cov; });
    const auto mean = zscore([](const DedupCandidate& c) { return c.roi_mean; });

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].blurriness < candidates[b].blurriness; });

    std::vector<std::size_t> survivors;
    std::vector<bool> keep(n, false);
    for (const auto i : order) {
        bool distinct = true;
        for (const auto j : survivors) {
            const double dc = cov[i] - cov[j];
            const double dm = mean[i] - mean[j];
            if (std::sqrt(dc * dc + dm * dm) <= eps0) {
                distinct = false;
                break;
            }
        }
        if (distinct) survivors.push_back(i);
    }
    if (survivors.size() > static_cast<std::size_t>(cap)) survivors.resize(static_cast<std::size_t>(cap));
    for (const auto i : survivors) keep[i] = true;

    DedupResult out;
    for (std::size_t i = 0; i < n; ++i) (keep[i] ? out.kept : out.eliminated).push_back(candidates[i].key);
    return out;
}

InitialSelection select_initial_set(std::span<const ScoredSlice> scores, const InitialSelectionConfig& config) {
    const auto quadrant = select_initial(scores);
    InitialSelection out;
    out.thresholds_used = quadrant.thresholds;

    std::map<std::string, std::vector<DedupCandidate>> per_stack;
    std::vector<std::string> stack_order;
    for (const auto& key : quadrant.selected) {
        const auto it = std::find_if(scores.begin(), scores.end(), [&](const ScoredSlice& s) { return s.key == key; });
        const auto& q = it->scores;
        if (!per_stack.contains(key.stack_id)) stack_order.push_back(key.stack_id);
        per_stack[key.stack_id].push_back({key, q.blurriness, q.roi_cov.value_or(0.0), q.roi_mean.value_or(0.0)});
    }
    for (const auto& stack : stack_order) {
        const auto& cands = per_stack[stack];
        if (static_cast<int>(cands.size()) < config.min_for_dedup) {
            for (const auto& c : cands) out.s0.push_back(c.key);
            continue;
        }
        auto r = dedup_epsilon(cands, config.eps0, config.cap);
        out.s0.insert(out.s0.end(), r.kept.begin(), r.kept.end());
        out.eliminated_by_dedup.insert(out.eliminated_by_dedup.end(), r.eliminated.begin(), r.eliminated.end());
    }
    return out;
}

}  // namespace qunet::quality

namespace qunet::quality {

namespace {

nlohmann::json keys_json(const std::vector<data::SliceKey>& keys) {
    auto a = nlohmann::json::array();
    for (const auto& k : keys) a.push_back({{"stack_id", k.stack_id}, {"slice_index", k.slice_index}});
    return a;
}

std::vector<data::SliceKey> keys_from(const nlohmann::json& j) {
    std::vector<data::SliceKey> out;
    for (const auto& k : j) out.push_back({k.at("stack_id").get<std::string>(), k.at("slice_index").get<int>()});
    return out;
}

}  // namespace

void to_json(nlohmann::json& j, const InitialSelection& s) {
    auto thresholds = nlohmann::json::object();
    for (const auto& [stack, t] : s.thresholds_used) {
        thresholds[stack] = {{"blurriness", t.blurriness}, {"psnr_inv", t.psnr_inv}};
    }
    j = {{"s0", keys_json(s.s0)}, {"thresholds", thresholds}, {"eliminated_by_dedup", keys_json(s.eliminated_by_dedup)}};
}

void from_json(const nlohmann::json& j, InitialSelection& s) {
    s = {};
    s.s0 = keys_from(j.at("s0"));
    for (const auto& [stack, t] : j.at("thresholds").items()) {
        s.thresholds_used[stack] = {t.at("blurriness").get<double>(), t.at("psnr_inv").get<double>()};
    }
    s.eliminated_by_dedup = keys_from(j.value("eliminated_by_dedup", nlohmann::json::array()));
}

}  // namespace qunet::quality
