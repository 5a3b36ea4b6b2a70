#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace tdg {

// Row-major float image with `c` interleaved channels. Pixel (y, x) covers
// the unit square [x, x+1) x [y, y+1); its center sits at (x + 0.5, y + 0.5).
struct ImageF {
    int h = 0;
    int w = 0;
    int c = 1;
    std::vector<float> data;

    ImageF() = default;
    ImageF(int h_, int w_, int c_, float fill = 0.0f)
        : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {
        if (h_ < 0 || w_ < 0 || c_ < 1) throw std::invalid_argument("ImageF: bad dimensions");
    }

    bool empty() const { return data.empty(); }
    bool same_shape(const ImageF& o) const { return h == o.h && w == o.w && c == o.c; }
    bool inside(int y, int x) const { return y >= 0 && y < h && x >= 0 && x < w; }

    float& at(int y, int x, int ch = 0) {
        return data[(static_cast<size_t>(y) * w + x) * c + ch];
    }
    float at(int y, int x, int ch = 0) const {
        return data[(static_cast<size_t>(y) * w + x) * c + ch];
    }

    // Bilinear sample in pixel-center coordinates, clamped at the border.
    // sample(x + 0.5, y + 0.5, ch) returns at(y, x, ch) exactly.
    float sample(double x, double y, int ch) const;
};

// 8-bit single-channel mask; nonzero = foreground.
struct MaskU8 {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> data;

    MaskU8() = default;
    MaskU8(int h_, int w_, uint8_t fill = 0)
        : h(h_), w(w_), data(static_cast<size_t>(h_) * w_, fill) {
        if (h_ < 0 || w_ < 0) throw std::invalid_argument("MaskU8: bad dimensions");
    }

    bool empty() const { return data.empty(); }
    bool same_shape(const MaskU8& o) const { return h == o.h && w == o.w; }
    bool inside(int y, int x) const { return y >= 0 && y < h && x >= 0 && x < w; }

    uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * w + x]; }

    size_t count_nonzero() const;
};

// Mirror image columns (x -> w-1-x). Vector-valued channels are copied
// verbatim; callers transform vector data themselves where needed.
ImageF flip_x(const ImageF& img);
MaskU8 flip_x(const MaskU8& m);

// Block-average downsample by an integer factor; dims must divide evenly.
ImageF area_downsample(const ImageF& img, int factor);

inline float pos_inf() { return std::numeric_limits<float>::infinity(); }

}  // namespace tdg
