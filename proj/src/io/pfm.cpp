#include "tdg/io/pfm.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace tdg {

void write_pfm(const std::string& path, const ImageF& img) {
    if (img.c != 1 && img.c != 3)
        throw std::invalid_argument("write_pfm: only 1- or 3-channel images");
    if (img.h < 1 || img.w < 1) throw std::invalid_argument("write_pfm: empty image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pfm: cannot open " + path);
    out << (img.c == 1 ? "Pf" : "PF") << '\n' << img.w << ' ' << img.h << '\n' << "-1.0" << '\n';
    for (int y = img.h - 1; y >= 0; --y) {
        const float* row = &img.data[static_cast<size_t>(y) * img.w * img.c];
        out.write(reinterpret_cast<const char*>(row), static_cast<std::streamsize>(sizeof(float) * img.w * img.c));
    }
    if (!out) throw std::runtime_error("write_pfm: write failed for " + path);
}

namespace {

std::string next_token(std::istream& in) {
    std::string tok;
    in >> tok;
    if (!in) throw std::runtime_error("read_pfm: truncated header");
    return tok;
}

}  // namespace

ImageF read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pfm: cannot open " + path);
    std::string magic = next_token(in);
    int channels;
    if (magic == "Pf")
        channels = 1;
    else if (magic == "PF")
        channels = 3;
    else
        throw std::runtime_error("read_pfm: bad magic in " + path);
    int w = std::stoi(next_token(in));
    int h = std::stoi(next_token(in));
    double scale = std::stod(next_token(in));
    if (scale >= 0) throw std::runtime_error("read_pfm: big-endian PFM not supported");
    in.get();  // single whitespace byte after the scale line
    ImageF img(h, w, channels);
    for (int y = h - 1; y >= 0; --y) {
        float* row = &img.data[static_cast<size_t>(y) * w * channels];
        in.read(reinterpret_cast<char*>(row), static_cast<std::streamsize>(sizeof(float) * w * channels));
        if (!in) throw std::runtime_error("read_pfm: truncated pixel data in " + path);
    }
    return img;
}

}  // namespace tdg
