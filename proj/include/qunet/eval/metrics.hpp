#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "qunet/core/grid.hpp"
#include "qunet/data/dataset.hpp"
#include "qunet/nn/unetpp.hpp"

namespace qunet::eval {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Pixelwise counts of prediction `p` against ground truth `y`.
ConfusionCounts confusion(const Mask& p, const Mask& y);

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double jaccard = 0.0;
    double dice = 0.0;
    double accuracy = 0.0;
};

/// Precision/recall/Jaccard/Dice/accuracy. Empty-mask conventions:
/// Pr = 1 when nothing is predicted and nothing is missed (0 if ground truth
/// exists); Re symmetric; J = D = 1 when both masks are empty.
Metrics metrics_from_counts(const ConfusionCounts& c);
Metrics seg_metrics(const Mask& p, const Mask& y);

/// Arithmetic mean of each field.
Metrics mean_metrics(std::span<const Metrics> values);
/// Population standard deviation of each field.
Metrics stddev_metrics(std::span<const Metrics> values);

struct SliceMetrics {
    data::SliceKey key;
    Metrics metrics;
};

struct Evaluation {
    std::vector<SliceMetrics> per_slice;
    /// Macro average over slices.
    Metrics mean;
};

/// Binarized L4 (p >= 0.5) of the model versus each record's annotation.
Evaluation evaluate(const nn::SegModel& model, std::span<const data::SliceRecord* const> records);

/// `stack_id,slice_index,precision,recall,jaccard,dice,accuracy` plus a MEAN row.
void write_metrics_csv(const std::filesystem::path& path, const Evaluation& evaluation);

}  // namespace qunet::eval
