#pragma once

// Single-file checkpoint container ("EGLT"), little-endian:
//   magic "EGLT" | u32 version=1 | u64 config_len | config JSON (UTF-8)
//   u32 tensor_count
//   per tensor: u16 name_len | name | u8 dtype (0=f32, 1=int8-grouped,
//     2=int4-grouped) | u8 ndim | u64 dims[ndim] | u32 group_size (0 for f32)
//     | u64 data_offset | u64 data_len
//   data region, first byte 64-aligned; per quantized tensor the data is the
//   per-group f32 scales followed by packed codes (int8 = signed bytes; int4
//   = unsigned nibble code+8, two per byte, low nibble first).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "eagle/config.hpp"
#include "eagle/quant.hpp"
#include "eagle/tensor.hpp"
#include "eagle/weights.hpp"

namespace eagle {

enum : uint8_t { dtype_f32 = 0, dtype_int8 = 1, dtype_int4 = 2 };

struct stored_tensor {
    uint8_t dtype = dtype_f32;
    tensor f32;         // dtype_f32
    quantized_tensor q; // dtype_int8 / dtype_int4

    const std::vector<int64_t>& dims() const { return dtype == dtype_f32 ? f32.shape : q.shape; }
    int64_t numel() const;
    int bits() const { return dtype == dtype_f32 ? 32 : (dtype == dtype_int8 ? 8 : 4); }
    uint64_t data_len() const;
};

struct lora_info {
    int rank = 0;
    float alpha = 0.0f;
    std::vector<std::string> targets;
    bool enabled() const { return rank > 0; }
};

struct checkpoint_meta {
    eagle_config model;
    std::string kind = "f32"; // "f32" | "quantized" | "quantized_lora"
    double target_avg_bits = 0.0;
    double achieved_avg_bits = 0.0;
    lora_info lora;

    std::string to_json() const;
    static checkpoint_meta from_json(const std::string& text);
};

struct checkpoint_data {
    checkpoint_meta meta;
    std::map<std::string, stored_tensor> tensors;

    double average_bits() const; // parameter-weighted
    int64_t total_params() const;
};

void save_checkpoint(const std::string& path, const checkpoint_data& ckpt);
checkpoint_data load_checkpoint_file(const std::string& path);

checkpoint_data checkpoint_from_weights(const model_weights& w);
// packs every tensor according to the plan
checkpoint_data quantize_checkpoint(const model_weights& w, const quant_plan& plan);
// all stored tensors dequantized back to f32 weights (lora tensors excluded)
model_weights weights_from_checkpoint(const checkpoint_data& ckpt);

}  // namespace eagle
