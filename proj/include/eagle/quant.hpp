#pragma once

// Group-wise symmetric weight quantization (int8/int4), straight-through
// gradients, mixed-precision planning and size accounting.
//
// Layout: groups run along the last dimension, group_size values each; a row
// whose length is not a multiple of group_size ends with one short group (the
// conceptual zero padding never enters scale computation and is not stored).
// Codes are packed flat in row-major value order: int8 as one signed byte per
// value, int4 as unsigned nibble = code + 8, two per byte, low nibble first.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "eagle/errors.hpp"
#include "eagle/tensor.hpp"

namespace eagle {

struct quant_spec {
    int bits = 8;        // 4 or 8
    int group_size = 32; // power of two, along the last dimension
    bool symmetric = true;

    int qmax() const { return bits == 8 ? 127 : 7; }
    void validate() const;
};

struct quantized_tensor {
    quant_spec spec;
    std::vector<int64_t> shape;
    std::vector<uint8_t> packed; // ceil(numel * bits / 8) bytes
    std::vector<float> scales;   // one per group

    int64_t numel() const;
    int64_t last_dim() const { return shape.empty() ? 1 : shape.back(); }
    int64_t groups_per_row() const;
    int64_t num_groups() const;
    int64_t packed_bytes() const; // expected packed size from shape/spec
    int get_code(int64_t flat_index) const;
    void validate() const; // throws format_error on inconsistent sizes
};

quantized_tensor quantize(const tensor& w, const quant_spec& spec);
tensor dequantize(const quantized_tensor& q);

// Dequantize one row (last-dim slice) into out[last_dim]. Runtime matmuls use
// this so packed inference multiplies exactly the values fake_quant produces.
void dequantize_row(const quantized_tensor& q, int64_t row, float* out);

// dequantize(quantize(w, spec)), by the same code path as the inference
// dequantizer; bit-identical to loading a packed tensor.
tensor fake_quant(const tensor& w, const quant_spec& spec);

// Straight-through estimator: passes upstream where w lies inside the clip
// range |w| <= qmax * scale of its group, zero where clipped.
tensor ste_grad(const tensor& upstream, const tensor& w, const quant_spec& spec);
tensor ste_grad(const tensor& upstream, const tensor& w, const quant_spec& spec,
                const std::vector<float>& scales);

// Scales as quantize() would compute them (one per group).
std::vector<float> group_scales(const tensor& w, const quant_spec& spec);

struct sensitivity_report {
    // loss increase on the calibration batch when that tensor alone is
    // quantized to 4 bits (clamped at zero)
    std::map<std::string, double> loss_delta;
};

struct quant_plan {
    std::map<std::string, quant_spec> assignments;
    double target_avg_bits = 0.0;
    double achieved_avg_bits = 0.0;
};

// Greedy mixed-precision assignment: tensors ranked by sensitivity per
// parameter get 8 bits while the parameter-weighted average stays within
// target; everything else gets 4. forced_int8 tensors rank first.
quant_plan build_mixed_plan(const sensitivity_report& report,
                            const std::map<std::string, int64_t>& param_counts,
                            double target_avg_bits,
                            const std::set<std::string>& forced_int8 = {},
                            int group_size = 32);

double plan_average_bits(const quant_plan& plan, const std::map<std::string, int64_t>& param_counts);

struct size_estimate {
    uint64_t code_bytes = 0;
    uint64_t scale_bytes = 0;
    uint64_t header_bytes = 0;
    uint64_t total() const { return code_bytes + scale_bytes + header_bytes; }
};

constexpr uint64_t k_checkpoint_header_estimate = 16384;

// Pure arithmetic; never allocates param_count anything.
size_estimate estimate_size_bytes(uint64_t param_count, double avg_bits, int group_size,
                                  uint64_t header_bytes = k_checkpoint_header_estimate);

}  // namespace eagle
