#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "qunet/core/grid.hpp"
#include "qunet/data/dataset.hpp"
#include "qunet/nn/unetpp.hpp"

namespace qunet::select {

inline constexpr double kDefaultQ0 = 0.9;
/// Largest accepted threshold; anything above 1 already selects every slice.
inline constexpr double kMaxQ0 = 1.01;

/// |A and B| / |A or B|; 1 when both maps are empty.
double jaccard(const Mask& a, const Mask& b);

/// Jaccard agreement between binarized L3r and L4.
double agreement_score(const nn::LevelOutputs& outputs);

/// Forward pass on one normalized image followed by agreement_score.
double quality_score(const nn::SegModel& model, const Image& image);

struct QualityVerdict {
    data::SliceKey key;
    double q = 0.0;
    bool selected = false;
    double q0_used = kDefaultQ0;
};

/// selected is q < q0.
QualityVerdict make_verdict(const data::SliceKey& key, double q, double q0);

void check_q0(double q0);

/// One verdict per pool slice, in pool order.
std::vector<QualityVerdict> select_minimal(const nn::SegModel& model, std::span<const data::SliceRecord* const> pool,
                                           double q0);

/// Same thresholding applied to precomputed scores.
std::vector<QualityVerdict> select_minimal(std::span<const data::SliceKey> keys, std::span<const double> scores,
                                           double q0);

std::vector<data::SliceKey> selected_keys(std::span<const QualityVerdict> verdicts);

struct SelectionReport {
    double q0 = kDefaultQ0;
    std::vector<data::SliceKey> s0;
    std::vector<data::SliceKey> s_m;
    std::vector<QualityVerdict> verdicts;
    std::size_t pool_size = 0;
    double fraction_selected = 0.0;
};

/// Fills s_m from the verdicts and recomputes fraction_selected as
/// |s0 + s_m| / pool_size. Throws ValidationError if s_m meets s0.
void finalize(SelectionReport& report);

void to_json(nlohmann::json& j, const SelectionReport& r);
void from_json(const nlohmann::json& j, SelectionReport& r);

}  // namespace qunet::select
