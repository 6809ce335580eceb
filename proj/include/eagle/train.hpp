#pragma once

// Training: Adam with decoupled weight decay, the two-stage schedule
// (projectors first, then everything), and quantization-aware fine-tuning in
// full-parameter and low-rank-adapter modes. Per-sample gradients may be
// computed in parallel; reduction always runs in sample order, so a fixed
// seed gives bit-identical results at any thread count.

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "eagle/checkpoint.hpp"
#include "eagle/config.hpp"
#include "eagle/dataset.hpp"
#include "eagle/quant.hpp"
#include "eagle/weights.hpp"

namespace eagle {

struct train_config {
    double lr = 3e-4;
    int batch_size = 8;
    int steps = 200;
    uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    double clip_norm = 1.0;
    int log_every = 25;

    std::string to_json() const;
    static train_config from_json(const std::string& text);
};

// "step=N loss=... lr=... wall_ms=..." lines
using metrics_sink = std::function<void(const std::string&)>;

enum class qat_mode { full, lora };

struct lora_adapters {
    int rank = 8;
    float alpha = 16.0f;
    std::vector<std::string> targets;     // adapted matrices (decoder q/v)
    std::map<std::string, tensor> a, b;   // per target: A [out x r], B [r x in]

    float scaling() const { return alpha / static_cast<float>(rank); }
};

lora_adapters init_lora(const model_weights& w, int rank, float alpha, uint64_t seed);
std::vector<std::string> default_lora_targets(const eagle_config& cfg);

// Seeded shuffle split: first `fraction` of the permuted indices is the
// stage-1 subset, the rest is stage 2.
std::pair<std::vector<size_t>, std::vector<size_t>> split_pretrain_subset(size_t n, double fraction,
                                                                          uint64_t seed);

// Stage 1: towers and decoder frozen, projectors train.
void train_stage1(model_weights& w, const std::vector<sample>& data, const train_config& cfg,
                  const metrics_sink& sink = {});
// Stage 2: everything trains.
void train_stage2(model_weights& w, const std::vector<sample>& data, const train_config& cfg,
                  const metrics_sink& sink = {});

// Quantization-aware fine-tuning. mode full updates the latent full-precision
// weights through the straight-through estimator; mode lora freezes the
// quantized base and trains adapters. Returns the exported checkpoint
// (quantized latents, or quantized base + f32 adapters).
checkpoint_data qat_finetune(model_weights& w, const quant_plan& plan, qat_mode mode,
                             const std::vector<sample>& data, const train_config& cfg,
                             const metrics_sink& sink = {}, lora_adapters* out_adapters = nullptr);

// Loss increase per tensor when that tensor alone is fake-quantized to 4
// bits on the calibration batch (nonnegative). Uses cached tower outputs for
// tensors that cannot affect them.
sensitivity_report compute_sensitivity(const model_weights& w, const std::vector<sample>& calib,
                                       const metrics_sink& sink = {});

// Sensitivity sweep + greedy mixed assignment honoring the forced-int8 set.
quant_plan plan_mixed_precision(const model_weights& w, const std::vector<sample>& calib,
                                double target_avg_bits, const metrics_sink& sink = {});

// Plan file: human-readable, line oriented, lossless round-trip.
std::string plan_to_text(const quant_plan& plan);
quant_plan plan_from_text(const std::string& text);
void save_plan(const std::string& path, const quant_plan& plan);
quant_plan load_plan(const std::string& path);

}  // namespace eagle
