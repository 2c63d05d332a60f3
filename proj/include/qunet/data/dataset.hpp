#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "qunet/core/grid.hpp"

namespace qunet::data {

enum class Split { pool, test };

std::string to_string(Split split);
Split parse_split(const std::string& text);

/// Identifies one slice across the whole dataset.
struct SliceKey {
    std::string stack_id;
    int slice_index = 0;

    auto operator<=>(const SliceKey&) const = default;
    bool operator==(const SliceKey&) const = default;
};

std::string to_string(const SliceKey& key);

/// One grayscale slice of a 3-D stack.
///
/// The ROI mask marks where pathology may exist; the annotation marks the
/// pathology itself and is always contained in the ROI.
struct SliceRecord {
    std::string stack_id;
    int slice_index = 0;
    Image image;
    std::optional<Mask> roi_mask;
    std::optional<Mask> annotation;
    Split split = Split::pool;

    SliceKey key() const { return {stack_id, slice_index}; }
    /// The ROI mask, or an all-ones mask when none was supplied.
    Mask effective_roi() const;
};

/// Throws ValidationError naming the slice when shapes, binarity or ROI
/// containment are violated.
void validate(const SliceRecord& record);

struct StackDataset {
    std::vector<SliceRecord> records;
    /// Common square side; 0 when the records have not been normalized.
    int image_size = 0;

    std::vector<std::string> stack_ids() const;
    /// Indices into `records` for the given split, in dataset order.
    std::vector<std::size_t> indices(Split split) const;
    const SliceRecord& at(const SliceKey& key) const;
    std::optional<std::size_t> find(const SliceKey& key) const;
};

/// Checks every record plus slice_index uniqueness per stack.
void validate(const StackDataset& dataset);

/// Masks the image with its ROI, then resizes to size x size (bilinear for
/// intensities, nearest-neighbor for masks).
SliceRecord normalize_slice(const SliceRecord& record, int size);
StackDataset normalize_dataset(const StackDataset& dataset, int size);

}  // namespace qunet::data
