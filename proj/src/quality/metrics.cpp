#include "qunet/quality/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "qunet/core/image_ops.hpp"

namespace qunet::quality {

namespace {

constexpr double kLaplacian[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};

}  // namespace

double variance(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(values.size());
}

double blurriness(const Image& image) {
    if (image.height() < 3 || image.width() < 3) {
        throw ValidationError("blurriness: image must be at least 3x3");
    }
    const Image response = convolve3x3_replicate(image, kLaplacian);
    const double var = variance(response.values());
    if (var == 0.0) return kMaxBlurriness;
    return 1.0 / var;
}

double psnr_inv(const Image& image, int median_kernel) {
    if (median_kernel < 3 || median_kernel % 2 == 0) {
        throw ConfigError("psnr_inv: median kernel must be odd and >= 3, got " + std::to_string(median_kernel));
    }
    if (image.empty()) throw ValidationError("psnr_inv: empty image");
    const double peak = *std::max_element(image.begin(), image.end());
    if (peak <= 0.0) return 0.0;
    const Image smooth = median_filter(image, median_kernel);
    std::vector<double> diff(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) diff[i] = image[i] - smooth[i];
    return variance(diff) / peak;
}

RoiStats roi_stats(const Image& image, const Mask& roi_mask) {
    require_same_shape(image, roi_mask, "roi_stats");
    std::vector<double> pixels;
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (roi_mask[i]) pixels.push_back(image[i]);
    }
    if (pixels.empty()) throw ValidationError("roi_stats: ROI has no foreground pixel");
    const double peak = *std::max_element(pixels.begin(), pixels.end());
    double mean = 0.0;
    for (double v : pixels) mean += v;
    mean /= static_cast<double>(pixels.size());
    return {peak > 0.0 ? variance(pixels) / peak : 0.0, mean};
}

QualityScores score_slice(const data::SliceRecord& record, int median_kernel) {
    QualityScores s;
    s.blurriness = blurriness(record.image);
    s.psnr_inv = psnr_inv(record.image, median_kernel);
    const Mask roi = record.effective_roi();
    if (count_nonzero(roi) > 0) {
        const auto stats = roi_stats(record.image, roi);
        s.roi_cov = stats.cov;
        s.roi_mean = stats.mean;
    }
    return s;
}

std::vector<ScoredSlice> score_records(const data::StackDataset& dataset, std::span<const std::size_t> indices,
                                       int median_kernel) {
    std::vector<ScoredSlice> out(indices.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(indices.size()); ++i) {
        const auto& r = dataset.records[indices[i]];
        out[i] = {r.key(), score_slice(r, median_kernel)};
    }
    return out;
}

}  // namespace qunet::quality

namespace qunet::quality {

void write_quality_csv(const std::filesystem::path& path, std::span<const ScoredSlice> scores,
                       std::span<const data::SliceKey> s0) {
    const std::set<data::SliceKey> chosen(s0.begin(), s0.end());
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out.precision(17);
    out << "stack_id,slice_index,blurriness,psnr_inv,roi_cov,roi_mean,selected_s0\n";
    for (const auto& s : scores) {
        out << s.key.stack_id << ',' << s.key.slice_index << ',';
        if (s.scores.blur_is_max()) {
            out << "max";
        } else {
            out << s.scores.blurriness;
        }
        out << ',' << s.scores.psnr_inv << ',';
        if (s.scores.roi_cov) out << *s.scores.roi_cov;
        out << ',';
        if (s.scores.roi_mean) out << *s.scores.roi_mean;
        out << ',' << (chosen.count(s.key) ? 1 : 0) << '\n';
    }
}

std::vector<ScoredSlice> read_quality_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<ScoredSlice> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != 7) throw LoadError(path.string() + ": malformed row '" + line + "'");
        ScoredSlice s;
        s.key = {cells[0], std::stoi(cells[1])};
        s.scores.blurriness = cells[2] == "max" ? kMaxBlurriness : std::stod(cells[2]);
        s.scores.psnr_inv = std::stod(cells[3]);
        if (!cells[4].empty()) s.scores.roi_cov = std::stod(cells[4]);
        if (!cells[5].empty()) s.scores.roi_mean = std::stod(cells[5]);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace qunet::quality
