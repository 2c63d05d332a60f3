#include "qunet/core/png_io.hpp"

#include <png.h>

#include <algorithm>

#include <cmath>
#include <cstdio>
#include <memory>

namespace qunet {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) throw LoadError("cannot open file: " + path.string());
    return f;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw LoadError(std::string("libpng: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

struct ReadHandles {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~ReadHandles() { png_destroy_read_struct(&png, info ? &info : nullptr, nullptr); }
};

struct WriteHandles {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~WriteHandles() { png_destroy_write_struct(&png, info ? &info : nullptr); }
};

template <typename Pixel>
Grid<Pixel> read_png(const std::filesystem::path& path, bool gray) {
    auto file = open_file(path, "rb");
    ReadHandles h;
    h.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!h.png) throw LoadError("png_create_read_struct failed");
    h.info = png_create_info_struct(h.png);
    if (!h.info) throw LoadError("png_create_info_struct failed");

    try {
        png_init_io(h.png, file.get());
        png_read_info(h.png, h.info);
        const auto color = png_get_color_type(h.png, h.info);
        if (png_get_bit_depth(h.png, h.info) == 16) png_set_strip_16(h.png);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(h.png);
        if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(h.png, h.info) < 8) png_set_expand_gray_1_2_4_to_8(h.png);
        png_set_strip_alpha(h.png);
        const bool is_color = (color & PNG_COLOR_MASK_COLOR) != 0 || color == PNG_COLOR_TYPE_PALETTE;
        if (gray && is_color) png_set_rgb_to_gray_fixed(h.png, 1, -1, -1);
        if (!gray && !is_color) png_set_gray_to_rgb(h.png);
        png_read_update_info(h.png, h.info);

        const int w = static_cast<int>(png_get_image_width(h.png, h.info));
        const int ht = static_cast<int>(png_get_image_height(h.png, h.info));
        Grid<Pixel> out(ht, w);
        std::vector<png_bytep> rows(static_cast<std::size_t>(ht));
        for (int y = 0; y < ht; ++y) rows[y] = reinterpret_cast<png_bytep>(&out(y, 0));
        png_read_image(h.png, rows.data());
        png_read_end(h.png, nullptr);
        return out;
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

template <typename Pixel>
void write_png(const std::filesystem::path& path, const Grid<Pixel>& pixels, int color_type) {
    auto file = open_file(path, "wb");
    WriteHandles h;
    h.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!h.png) throw LoadError("png_create_write_struct failed");
    h.info = png_create_info_struct(h.png);
    if (!h.info) throw LoadError("png_create_info_struct failed");

    png_init_io(h.png, file.get());
    png_set_IHDR(h.png, h.info, static_cast<png_uint_32>(pixels.width()), static_cast<png_uint_32>(pixels.height()), 8,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(h.png, h.info);
    for (int y = 0; y < pixels.height(); ++y) {
        png_write_row(h.png, reinterpret_cast<png_const_bytep>(&pixels(y, 0)));
    }
    png_write_end(h.png, nullptr);
}

}  // namespace

Grid<std::uint8_t> read_png_gray(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw LoadError("missing image file: " + path.string());
    return read_png<std::uint8_t>(path, true);
}

RgbImage read_png_rgb(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw LoadError("missing image file: " + path.string());
    return read_png<Rgb>(path, false);
}

void write_png_gray(const std::filesystem::path& path, const Grid<std::uint8_t>& pixels) {
    write_png(path, pixels, PNG_COLOR_TYPE_GRAY);
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& pixels) {
    static_assert(sizeof(Rgb) == 3);
    write_png(path, pixels, PNG_COLOR_TYPE_RGB);
}

Grid<std::uint8_t> to_u8(const Image& image) {
    Grid<std::uint8_t> out(image.height(), image.width());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = std::clamp(image[i], 0.0, 1.0);
        out[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

Image from_u8(const Grid<std::uint8_t>& pixels) {
    Image out(pixels.height(), pixels.width());
    for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = pixels[i] / 255.0;
    return out;
}

}  // namespace qunet
