#include "qunet/select/selection.hpp"

#include <algorithm>
#include <set>

namespace qunet::select {

double jaccard(const Mask& a, const Mask& b) {
    require_same_shape(a, b, "jaccard");
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] != 0;
        const bool y = b[i] != 0;
        inter += x && y;
        uni += x || y;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double agreement_score(const nn::LevelOutputs& outputs) {
    if (!outputs.has_resized) return agreement_score(nn::resize_outputs(outputs));
    return jaccard(binarize(outputs.full_resolution(3)), binarize(outputs.full_resolution(4)));
}

double quality_score(const nn::SegModel& model, const Image& image) {
    return agreement_score(nn::predict(model, image));
}

void check_q0(double q0) {
    if (!(q0 >= 0.0 && q0 <= kMaxQ0)) {
        throw ConfigError("q0 must lie in [0, " + std::to_string(kMaxQ0) + "], got " + std::to_string(q0));
    }
}

QualityVerdict make_verdict(const data::SliceKey& key, double q, double q0) {
    return {key, q, q < q0, q0};
}

std::vector<QualityVerdict> select_minimal(const nn::SegModel& model, std::span<const data::SliceRecord* const> pool,
                                           double q0) {
    check_q0(q0);
    if (pool.empty()) throw ValidationError("select_minimal: empty pool");
    std::vector<const Image*> images;
    std::vector<data::SliceKey> keys;
    for (const auto* r : pool) {
        images.push_back(&r->image);
        keys.push_back(r->key());
    }
    const auto outputs = nn::predict(model, images);
    std::vector<double> scores;
    scores.reserve(outputs.size());
    for (const auto& o : outputs) scores.push_back(agreement_score(o));
    return select_minimal(keys, scores, q0);
}

std::vector<QualityVerdict> select_minimal(std::span<const data::SliceKey> keys, std::span<const double> scores,
                                           double q0) {
    check_q0(q0);
    if (keys.size() != scores.size()) throw ShapeError("select_minimal: key/score count mismatch");
    std::vector<QualityVerdict> out;
    out.reserve(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) out.push_back(make_verdict(keys[i], scores[i], q0));
    return out;
}

std::vector<data::SliceKey> selected_keys(std::span<const QualityVerdict> verdicts) {
    std::vector<data::SliceKey> out;
    for (const auto& v : verdicts) {
        if (v.selected) out.push_back(v.key);
    }
    return out;
}

void finalize(SelectionReport& report) {
    report.s_m = selected_keys(report.verdicts);
    const std::set<data::SliceKey> s0(report.s0.begin(), report.s0.end());
    std::set<data::SliceKey> all = s0;
    for (const auto& k : report.s_m) {
        if (s0.count(k)) throw ValidationError("slice " + data::to_string(k) + " is in both S0 and S_m");
        all.insert(k);
    }
    report.fraction_selected =
        report.pool_size == 0 ? 0.0 : static_cast<double>(all.size()) / static_cast<double>(report.pool_size);
}

namespace {

nlohmann::json key_json(const data::SliceKey& k) { return {{"stack_id", k.stack_id}, {"slice_index", k.slice_index}}; }

data::SliceKey key_from(const nlohmann::json& j) {
    return {j.at("stack_id").get<std::string>(), j.at("slice_index").get<int>()};
}

}  // namespace

void to_json(nlohmann::json& j, const SelectionReport& r) {
    auto keys = [](const std::vector<data::SliceKey>& v) {
        auto a = nlohmann::json::array();
        for (const auto& k : v) a.push_back(key_json(k));
        return a;
    };
    auto verdicts = nlohmann::json::array();
    for (const auto& v : r.verdicts) {
        auto e = key_json(v.key);
        e["q"] = v.q;
        e["selected"] = v.selected;
        verdicts.push_back(std::move(e));
    }
    j = {{"q0", r.q0},
         {"s0", keys(r.s0)},
         {"s_m", keys(r.s_m)},
         {"verdicts", verdicts},
         {"pool_size", r.pool_size},
         {"fraction_selected", r.fraction_selected}};
}

void from_json(const nlohmann::json& j, SelectionReport& r) {
    r = {};
    r.q0 = j.at("q0").get<double>();
    for (const auto& k : j.at("s0")) r.s0.push_back(key_from(k));
    for (const auto& k : j.at("s_m")) r.s_m.push_back(key_from(k));
    for (const auto& v : j.at("verdicts")) {
        r.verdicts.push_back({key_from(v), v.at("q").get<double>(), v.at("selected").get<bool>(), r.q0});
    }
    r.pool_size = j.value("pool_size", std::size_t{0});
    r.fraction_selected = j.at("fraction_selected").get<double>();
}

}  // namespace qunet::select
