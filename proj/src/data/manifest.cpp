#include "qunet/data/manifest.hpp"

#include <fstream>
#include <sstream>

#include "qunet/core/log.hpp"
#include "qunet/core/png_io.hpp"

namespace qunet::data {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

Mask load_mask(const fs::path& path, const std::string& what, const SliceKey& key) {
    const auto raw = read_png_gray(path);
    Mask m(raw.height(), raw.width());
    std::uint8_t fg = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto v = raw[i];
        if (v == 0) continue;
        if ((v != 1 && v != 255) || (fg != 0 && v != fg)) {
            throw ValidationError(what + " of slice " + to_string(key) + " is not binary (" + path.string() + ")");
        }
        fg = v;
        m[i] = 1;
    }
    return m;
}

std::string mask_file_name(const SliceKey& key, const char* suffix) {
    std::ostringstream name;
    name << key.stack_id << "_" << key.slice_index << suffix << ".png";
    return name.str();
}

}  // namespace

StackDataset load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open manifest: " + path.string());
    const fs::path base = path.parent_path();

    std::string line;
    if (!std::getline(in, line)) throw LoadError("empty manifest: " + path.string());
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line) != kManifestHeader) {
        throw ValidationError("manifest header mismatch in " + path.string() + "; expected '" + kManifestHeader + "'");
    }

    StackDataset dataset;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(trim(line));
        if (cells.size() != 6) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 6 columns, got " +
                                  std::to_string(cells.size()));
        }
        for (auto& c : cells) c = trim(c);

        SliceRecord r;
        r.stack_id = cells[0];
        try {
            r.slice_index = std::stoi(cells[1]);
        } catch (const std::exception&) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad slice_index '" + cells[1] + "'");
        }
        r.split = parse_split(cells[5]);
        if (cells[2].empty()) throw ValidationError("slice " + to_string(r.key()) + ": image_path is required");
        r.image = from_u8(read_png_gray(base / cells[2]));
        if (!cells[3].empty()) r.roi_mask = load_mask(base / cells[3], "roi_mask", r.key());
        if (!cells[4].empty()) r.annotation = load_mask(base / cells[4], "annotation", r.key());

        if (r.roi_mask && !r.roi_mask->same_shape(r.image)) {
            throw ValidationError("slice " + to_string(r.key()) + ": roi_mask dimensions differ from image");
        }
        if (r.annotation && !r.annotation->same_shape(r.image)) {
            throw ValidationError("slice " + to_string(r.key()) + ": annotation dimensions differ from image");
        }
        if (r.annotation && r.roi_mask) {
            std::size_t cleared = 0;
            for (std::size_t i = 0; i < r.annotation->size(); ++i) {
                if ((*r.annotation)[i] && !(*r.roi_mask)[i]) {
                    (*r.annotation)[i] = 0;
                    ++cleared;
                }
            }
            if (cleared > 0) {
                log_warning("slice " + to_string(r.key()) + ": cleared " + std::to_string(cleared) +
                            " annotation pixels outside the ROI");
            }
        }
        validate(r);
        dataset.records.push_back(std::move(r));
    }

    if (!dataset.records.empty()) {
        const int side = dataset.records.front().image.height();
        bool uniform = true;
        for (const auto& r : dataset.records) uniform = uniform && r.image.height() == side && r.image.width() == side;
        dataset.image_size = uniform ? side : 0;
    }
    validate(dataset);
    return dataset;
}

fs::path write_manifest(const StackDataset& dataset, const fs::path& dir) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    const fs::path manifest = dir / "manifest.csv";
    std::ofstream out(manifest);
    if (!out) throw LoadError("cannot write manifest: " + manifest.string());
    out << kManifestHeader << '\n';

    const auto write_mask = [&](const Mask& m, const SliceKey& key, const char* suffix) {
        Grid<std::uint8_t> px(m.height(), m.width());
        for (std::size_t i = 0; i < m.size(); ++i) px[i] = m[i] ? 255 : 0;
        const std::string rel = "masks/" + mask_file_name(key, suffix);
        write_png_gray(dir / rel, px);
        return rel;
    };

    for (const auto& r : dataset.records) {
        const std::string image_rel = "images/" + mask_file_name(r.key(), "");
        write_png_gray(dir / image_rel, to_u8(r.image));
        const std::string roi_rel = r.roi_mask ? write_mask(*r.roi_mask, r.key(), "_roi") : "";
        const std::string ann_rel = r.annotation ? write_mask(*r.annotation, r.key(), "_ann") : "";
        out << r.stack_id << ',' << r.slice_index << ',' << image_rel << ',' << roi_rel << ',' << ann_rel << ','
            << to_string(r.split) << '\n';
    }
    return manifest;
}

}  // namespace qunet::data
