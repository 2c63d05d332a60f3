#include "qunet/eval/metrics.hpp"

#include <cmath>
#include <fstream>

namespace qunet::eval {

ConfusionCounts confusion(const Mask& p, const Mask& y) {
    require_same_shape(p, y, "confusion");
    ConfusionCounts c;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool pi = p[i] != 0;
        const bool yi = y[i] != 0;
        if (pi && yi) {
            ++c.tp;
        } else if (pi) {
            ++c.fp;
        } else if (yi) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
    const auto tp = static_cast<double>(c.tp);
    const auto fp = static_cast<double>(c.fp);
    const auto fn = static_cast<double>(c.fn);
    const auto tn = static_cast<double>(c.tn);
    Metrics m;
    m.precision = c.tp + c.fp > 0 ? tp / (tp + fp) : (c.fn == 0 ? 1.0 : 0.0);
    m.recall = c.tp + c.fn > 0 ? tp / (tp + fn) : (c.fp == 0 ? 1.0 : 0.0);
    const bool both_empty = c.tp + c.fp + c.fn == 0;
    m.jaccard = both_empty ? 1.0 : tp / (tp + fp + fn);
    m.dice = both_empty ? 1.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    m.accuracy = c.total() > 0 ? (tp + tn) / static_cast<double>(c.total()) : 1.0;
    return m;
}

Metrics seg_metrics(const Mask& p, const Mask& y) { return metrics_from_counts(confusion(p, y)); }

Metrics mean_metrics(std::span<const Metrics> values) {
    Metrics m;
    if (values.empty()) return m;
    for (const auto& v : values) {
        m.precision += v.precision;
        m.recall += v.recall;
        m.jaccard += v.jaccard;
        m.dice += v.dice;
        m.accuracy += v.accuracy;
    }
    const auto n = static_cast<double>(values.size());
    m.precision /= n;
    m.recall /= n;
    m.jaccard /= n;
    m.dice /= n;
    m.accuracy /= n;
    return m;
}

Metrics stddev_metrics(std::span<const Metrics> values) {
    Metrics s;
    if (values.empty()) return s;
    const Metrics mean = mean_metrics(values);
    for (const auto& v : values) {
        s.precision += (v.precision - mean.precision) * (v.precision - mean.precision);
        s.recall += (v.recall - mean.recall) * (v.recall - mean.recall);
        s.jaccard += (v.jaccard - mean.jaccard) * (v.jaccard - mean.jaccard);
        s.dice += (v.dice - mean.dice) * (v.dice - mean.dice);
        s.accuracy += (v.accuracy - mean.accuracy) * (v.accuracy - mean.accuracy);
    }
    const auto n = static_cast<double>(values.size());
    s.precision = std::sqrt(s.precision / n);
    s.recall = std::sqrt(s.recall / n);
    s.jaccard = std::sqrt(s.jaccard / n);
    s.dice = std::sqrt(s.dice / n);
    s.accuracy = std::sqrt(s.accuracy / n);
    return s;
}

Evaluation evaluate(const nn::SegModel& model, std::span<const data::SliceRecord* const> records) {
    std::vector<const Image*> images;
    for (const auto* r : records) {
        if (!r->annotation) throw ValidationError("evaluate: slice " + data::to_string(r->key()) + " has no annotation");
        images.push_back(&r->image);
    }
    const auto outputs = nn::predict(model, images);
    Evaluation ev;
    std::vector<Metrics> all;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const Mask pred = binarize(outputs[i].levels[nn::kHeads - 1]);
        const Metrics m = seg_metrics(pred, *records[i]->annotation);
        ev.per_slice.push_back({records[i]->key(), m});
        all.push_back(m);
    }
    ev.mean = mean_metrics(all);
    return ev;
}

void write_metrics_csv(const std::filesystem::path& path, const Evaluation& evaluation) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out.precision(10);
    out << "stack_id,slice_index,precision,recall,jaccard,dice,accuracy\n";
    const auto row = [&](const Metrics& m) {
        out << ',' << m.precision << ',' << m.recall << ',' << m.jaccard << ',' << m.dice << ',' << m.accuracy << '\n';
    };
    for (const auto& s : evaluation.per_slice) {
        out << s.key.stack_id << ',' << s.key.slice_index;
        row(s.metrics);
    }
    out << "MEAN,";
    row(evaluation.mean);
}

}  // namespace qunet::eval
