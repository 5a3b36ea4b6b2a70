#pragma once

#include <string>

#include "tdg/image.hpp"

namespace tdg {

// 8-bit grayscale; 255 = foreground. Reading maps any nonzero byte to 255.
void write_mask_png(const std::string& path, const MaskU8& mask);
MaskU8 read_mask_png(const std::string& path);

// 8-bit RGB. Float channels in [0,1] are rounded to bytes on write and
// divided by 255 on read.
void write_rgb_png(const std::string& path, const ImageF& img);
ImageF read_rgb_png(const std::string& path);

// Raw 8-bit RGB (no float conversion); used where bit-exactness matters.
struct ImageU8 {
    int h = 0, w = 0, c = 3;
    std::vector<uint8_t> data;
    uint8_t& at(int y, int x, int ch) { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
    uint8_t at(int y, int x, int ch) const { return data[(static_cast<size_t>(y) * w + x) * c + ch]; }
};
void write_rgb8_png(const std::string& path, const ImageU8& img);
ImageU8 read_rgb8_png(const std::string& path);

}  // namespace tdg
