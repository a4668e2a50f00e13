#pragma once

#include "mvil/image.hpp"

#include <string>

namespace mvil {

// 8-bit RGB PNG. Values are quantized with round(v * 255).
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// 1-bit grayscale PNG for masks.
void write_mask_png(const std::string& path, const Mask& mask);
Mask read_mask_png(const std::string& path);

}  // namespace mvil
