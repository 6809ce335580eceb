#pragma once

// Minimal deterministic codecs for the formats the CLI accepts: PNG
// (8-bit gray/RGB/RGBA, non-interlaced) and raw RGB with explicit dims;
// 16-bit little-endian PCM mono for audio.

#include <string>
#include <vector>

#include "eagle/image.hpp"

namespace eagle {

image_u8 png_decode(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> png_encode(const image_u8& img);

image_u8 read_image_file(const std::string& path);            // .png
image_u8 read_raw_rgb_file(const std::string& path, int h, int w);
void write_png_file(const std::string& path, const image_u8& img);

std::vector<float> read_pcm16_file(const std::string& path);  // scaled to [-1, 1)
void write_pcm16_file(const std::string& path, const std::vector<float>& samples);

std::vector<uint8_t> read_file_bytes(const std::string& path);
// Writes via a temp file in the same directory plus an atomic rename, so a
// failed run never leaves a partial output behind.
void write_file_atomic(const std::string& path, const void* data, size_t len);

}  // namespace eagle
