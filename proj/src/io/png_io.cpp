#include "tdg/io/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace tdg {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void write_png_bytes(const std::string& path, const uint8_t* bytes, int h, int w, int channels) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png: create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png: create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: write error for " + path);
    }
    png_init_io(png, fp.get());
    int color = (channels == 1) ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(bytes + static_cast<size_t>(y) * w * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<uint8_t> read_png_bytes(const std::string& path, int* out_h, int* out_w,
                                    int want_channels) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png: create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png: create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: read error for " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (want_channels == 3)
        png_set_gray_to_rgb(png);
    else
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);
    int h = static_cast<int>(png_get_image_height(png, info));
    int w = static_cast<int>(png_get_image_width(png, info));
    std::vector<uint8_t> bytes(static_cast<size_t>(h) * w * want_channels);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[y] = bytes.data() + static_cast<size_t>(y) * w * want_channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    *out_h = h;
    *out_w = w;
    return bytes;
}

}  // namespace

void write_mask_png(const std::string& path, const MaskU8& mask) {
    std::vector<uint8_t> bytes(mask.data.size());
    for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
    write_png_bytes(path, bytes.data(), mask.h, mask.w, 1);
}

MaskU8 read_mask_png(const std::string& path) {
    int h = 0, w = 0;
    std::vector<uint8_t> bytes = read_png_bytes(path, &h, &w, 1);
    MaskU8 mask(h, w);
    for (size_t i = 0; i < bytes.size(); ++i) mask.data[i] = bytes[i] ? 255 : 0;
    return mask;
}

void write_rgb_png(const std::string& path, const ImageF& img) {
    if (img.c != 3) throw std::invalid_argument("write_rgb_png: need 3 channels");
    std::vector<uint8_t> bytes(img.data.size());
    for (size_t i = 0; i < bytes.size(); ++i) {
        float v = img.data[i];
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
    write_png_bytes(path, bytes.data(), img.h, img.w, 3);
}

ImageF read_rgb_png(const std::string& path) {
    int h = 0, w = 0;
    std::vector<uint8_t> bytes = read_png_bytes(path, &h, &w, 3);
    ImageF img(h, w, 3);
    for (size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0f;
    return img;
}

void write_rgb8_png(const std::string& path, const ImageU8& img) {
    if (img.c != 3) throw std::invalid_argument("write_rgb8_png: need 3 channels");
    write_png_bytes(path, img.data.data(), img.h, img.w, 3);
}

ImageU8 read_rgb8_png(const std::string& path) {
    ImageU8 img;
    img.c = 3;
    img.data = read_png_bytes(path, &img.h, &img.w, 3);
    return img;
}

}  // namespace tdg
