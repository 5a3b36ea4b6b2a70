#pragma once

#include <string>

#include "tdg/image.hpp"

namespace tdg {

// Portable Float Map. "Pf" for 1 channel, "PF" for 3; scale line -1.0
// (little endian); rows stored bottom-up as the format requires.
void write_pfm(const std::string& path, const ImageF& img);
ImageF read_pfm(const std::string& path);

}  // namespace tdg
