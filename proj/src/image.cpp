#include "tdg/image.hpp"

#include <algorithm>

namespace tdg {

float ImageF::sample(double x, double y, int ch) const {
    double u = x - 0.5;
    double v = y - 0.5;
    double fx = std::floor(u);
    double fy = std::floor(v);
    int x0 = static_cast<int>(fx);
    int y0 = static_cast<int>(fy);
    double ax = u - fx;
    double ay = v - fy;
    auto clampx = [&](int xx) { return std::clamp(xx, 0, w - 1); };
    auto clampy = [&](int yy) { return std::clamp(yy, 0, h - 1); };
    float v00 = at(clampy(y0), clampx(x0), ch);
    float v01 = at(clampy(y0), clampx(x0 + 1), ch);
    float v10 = at(clampy(y0 + 1), clampx(x0), ch);
    float v11 = at(clampy(y0 + 1), clampx(x0 + 1), ch);
    float top = static_cast<float>((1.0 - ax) * v00 + ax * v01);
    float bot = static_cast<float>((1.0 - ax) * v10 + ax * v11);
    return static_cast<float>((1.0 - ay) * top + ay * bot);
}

size_t MaskU8::count_nonzero() const {
    size_t n = 0;
    for (uint8_t v : data) n += (v != 0);
    return n;
}

ImageF flip_x(const ImageF& img) {
    ImageF out(img.h, img.w, img.c);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) out.at(y, x, ch) = img.at(y, img.w - 1 - x, ch);
    return out;
}

MaskU8 flip_x(const MaskU8& m) {
    MaskU8 out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) out.at(y, x) = m.at(y, m.w - 1 - x);
    return out;
}

ImageF area_downsample(const ImageF& img, int factor) {
    if (factor < 1) throw std::invalid_argument("area_downsample: factor must be >= 1");
    if (img.h % factor != 0 || img.w % factor != 0)
        throw std::invalid_argument("area_downsample: dimensions not divisible by factor");
    ImageF out(img.h / factor, img.w / factor, img.c);
    double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        acc += img.at(y * factor + dy, x * factor + dx, ch);
                out.at(y, x, ch) = static_cast<float>(acc * inv);
            }
    return out;
}

}  // namespace tdg
