#include "qunet/data/dataset.hpp"

#include <algorithm>
#include <set>

#include "qunet/core/image_ops.hpp"

namespace qunet::data {

std::string to_string(Split split) { return split == Split::pool ? "pool" : "test"; }

Split parse_split(const std::string& text) {
    if (text == "pool" || text.empty()) return Split::pool;
    if (text == "test") return Split::test;
    throw ValidationError("unknown split tag '" + text + "' (expected pool or test)");
}

std::string to_string(const SliceKey& key) { return key.stack_id + "/" + std::to_string(key.slice_index); }

Mask SliceRecord::effective_roi() const {
    if (roi_mask) return *roi_mask;
    return Mask(image.height(), image.width(), 1);
}

void validate(const SliceRecord& record) {
    const auto where = [&] { return "slice " + to_string(record.key()); };
    if (record.slice_index < 0) throw ValidationError(where() + ": negative slice_index");
    if (record.image.empty()) throw ValidationError(where() + ": empty image");
    if (record.roi_mask) {
        if (!record.roi_mask->same_shape(record.image)) throw ValidationError(where() + ": roi_mask dimensions differ from image");
        if (!is_binary(*record.roi_mask)) throw ValidationError(where() + ": roi_mask is not binary");
    }
    if (record.annotation) {
        if (!record.annotation->same_shape(record.image)) throw ValidationError(where() + ": annotation dimensions differ from image");
        if (!is_binary(*record.annotation)) throw ValidationError(where() + ": annotation is not binary");
        if (record.roi_mask) {
            for (std::size_t i = 0; i < record.annotation->size(); ++i) {
                if ((*record.annotation)[i] && !(*record.roi_mask)[i]) {
                    throw ValidationError(where() + ": annotation extends outside roi_mask");
                }
            }
        }
    }
}

std::vector<std::string> StackDataset::stack_ids() const {
    std::vector<std::string> ids;
    for (const auto& r : records) {
        if (std::find(ids.begin(), ids.end(), r.stack_id) == ids.end()) ids.push_back(r.stack_id);
    }
    return ids;
}

std::vector<std::size_t> StackDataset::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].split == split) out.push_back(i);
    }
    return out;
}

std::optional<std::size_t> StackDataset::find(const SliceKey& key) const {
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].stack_id == key.stack_id && records[i].slice_index == key.slice_index) return i;
    }
    return std::nullopt;
}

const SliceRecord& StackDataset::at(const SliceKey& key) const {
    const auto i = find(key);
    if (!i) throw ValidationError("no slice " + to_string(key) + " in dataset");
    return records[*i];
}

void validate(const StackDataset& dataset) {
    std::set<SliceKey> seen;
    for (const auto& r : dataset.records) {
        validate(r);
        if (!seen.insert(r.key()).second) throw ValidationError("duplicate slice " + to_string(r.key()));
        if (dataset.image_size > 0 &&
            (r.image.height() != dataset.image_size || r.image.width() != dataset.image_size)) {
            throw ValidationError("slice " + to_string(r.key()) + " does not match dataset image_size");
        }
    }
}

SliceRecord normalize_slice(const SliceRecord& record, int size) {
    if (size < 16) throw ConfigError("normalize_slice: size must be >= 16, got " + std::to_string(size));
    validate(record);

    Image masked = record.image;
    if (record.roi_mask) {
        for (std::size_t i = 0; i < masked.size(); ++i) masked[i] *= (*record.roi_mask)[i];
    }

    SliceRecord out;
    out.stack_id = record.stack_id;
    out.slice_index = record.slice_index;
    out.split = record.split;
    out.image = resize_bilinear(masked, size, size);
    if (record.roi_mask) out.roi_mask = resize_nearest(*record.roi_mask, size, size);
    if (record.annotation) {
        out.annotation = resize_nearest(*record.annotation, size, size);
        if (out.roi_mask) {
            for (std::size_t i = 0; i < out.annotation->size(); ++i) (*out.annotation)[i] &= (*out.roi_mask)[i];
        }
    }
    return out;
}

StackDataset normalize_dataset(const StackDataset& dataset, int size) {
    StackDataset out;
    out.image_size = size;
    out.records.reserve(dataset.records.size());
    for (const auto& r : dataset.records) out.records.push_back(normalize_slice(r, size));
    return out;
}

}  // namespace qunet::data
