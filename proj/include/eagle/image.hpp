#pragma once

#include <cstdint>
#include <vector>

#include "eagle/tensor.hpp"

namespace eagle {

/// 8-bit RGB image, row-major, 3 bytes per pixel.
struct image_u8 {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> rgb;

    image_u8() = default;
    image_u8(int height, int width) : h(height), w(width), rgb(static_cast<size_t>(height) * width * 3, 0) {}

    uint8_t* px(int y, int x) { return rgb.data() + (static_cast<size_t>(y) * w + x) * 3; }
    const uint8_t* px(int y, int x) const { return rgb.data() + (static_cast<size_t>(y) * w + x) * 3; }
};

}  // namespace eagle
