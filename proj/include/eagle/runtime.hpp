#pragma once

// Autoregressive inference over float or packed-quantized weights. Packed
// matrices stay packed in memory; each matmul dequantizes one weight row at a
// time into a scratch buffer and runs the same dot-product routine as the
// dense path, so packed and fake-quant inference produce bit-identical
// logits.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "eagle/checkpoint.hpp"
#include "eagle/config.hpp"
#include "eagle/dataset.hpp"
#include "eagle/prep.hpp"
#include "eagle/quant.hpp"
#include "eagle/rng.hpp"
#include "eagle/tensor.hpp"
#include "eagle/weights.hpp"

namespace eagle {

struct runtime_weight {
    bool packed = false;
    tensor dense;
    quantized_tensor q;

    int64_t rows() const { return packed ? q.shape[0] : dense.shape[0]; }
    int64_t cols() const { return packed ? q.last_dim() : dense.last_dim(); }
};

struct runtime_model {
    eagle_config cfg;
    vocabulary vocab;
    std::map<std::string, runtime_weight> weights;
    std::string kind = "f32";
    double avg_bits = 32.0;

    static runtime_model from_weights(const model_weights& w);
    static runtime_model from_checkpoint(const checkpoint_data& ckpt);

    const runtime_weight& rw(const std::string& name) const;
    runtime_weight& rw_mut(const std::string& name);
    // accessor for tensors kept dense at load: norm gains, positions,
    // resampler queries, lora-adapted matrices
    const tensor& vec(const std::string& name) const;
};

// y = x * W^T with dense or packed W (row-wise dequantization).
tensor rt_linear(const runtime_model& m, const std::string& name, const tensor& x);
tensor rt_embed_rows(const runtime_model& m, const std::vector<int>& ids);

// towers
tensor rt_vision_block(const runtime_model& m, const tensor& patches); // [128 x vw]
tensor rt_audio(const runtime_model& m, const tensor& mel);            // [T x aw]
tensor rt_project(const runtime_model& m, const std::string& which, const tensor& x);

// Per-sample cache of projected non-text segment embeddings, keyed by
// segment index. Used by sensitivity sweeps to skip unchanged towers.
struct segment_cache {
    std::map<int, tensor> embeds;
};

// Towers + text embedding + interleave. With a cache, segments of a modality
// marked fresh are recomputed without touching the cache (for temporary
// weight swaps); other segments come from the cache, filled on first use.
packed_sequence assemble_embeddings(const runtime_model& m, const prepared_sample& ps,
                                    segment_cache* cache = nullptr, bool fresh_vision = false,
                                    bool fresh_audio = false);

struct kv_cache {
    int64_t max_len = 0;
    int64_t len = 0;
    std::vector<tensor> k, v; // per layer [max_len x d_model]
};

kv_cache make_cache(const eagle_config& cfg);

// Causal decoder over already-interleaved embeddings starting at position
// cache.len; returns logits for every input row and advances the cache.
tensor decoder_prefill(const runtime_model& m, const tensor& embeddings, kv_cache& cache);

// Single-token step: embedding row of `token` at position cache.len.
tensor decode_step(const runtime_model& m, int token, kv_cache& cache);

// Full forward (fresh cache): all-position logits for a prepared sample.
tensor forward_logits(const runtime_model& m, const prepared_sample& ps);

double masked_cross_entropy(const tensor& logits, const std::vector<int>& targets,
                            const std::vector<uint8_t>& mask);

// mean per-sample masked cross-entropy, deterministic summation order
double eval_loss(const runtime_model& m, const std::vector<sample>& samples);
// teacher-forced exact match over the answer rows, in percent
double eval_accuracy(const runtime_model& m, const std::vector<sample>& samples);
bool eval_exact_match(const runtime_model& m, const sample& s);

struct generation_config {
    int max_new_tokens = 32;
    float temperature = 0.0f; // 0 = greedy argmax, ties to the lowest id
    int top_k = 1;
    uint64_t seed = 0;
    std::vector<int> stop_tokens = {tok_eos};
};

struct generation_metrics {
    double ttft_ms = 0.0;        // raw input handed over -> first token out
    double tokens_per_sec = 0.0; // steady-state decode rate, 0 if < 8 steps
    int64_t prefill_tokens = 0;
    int64_t decode_tokens = 0;
};

enum class stop_reason { stop_token, max_tokens, context_overflow };

struct generation_result {
    std::vector<int> tokens;
    generation_metrics metrics;
    stop_reason reason = stop_reason::max_tokens;
};

int sample_token(const float* logits, int n, const generation_config& cfg, rng& r);

generation_result generate(const runtime_model& m, const sample& input, const generation_config& cfg,
                           const std::function<void(int)>& on_token = {});

struct bench_workload {
    int prompt_tokens = 64;
    int decode_tokens = 32;
};

struct bench_report {
    std::string model;
    double avg_bits = 32.0;
    int prefill_tokens = 0;
    int decode_tokens = 0;
    double ttft_ms_median = 0.0, ttft_ms_p90 = 0.0;
    double tokens_per_sec_median = 0.0, tokens_per_sec_p90 = 0.0;

    std::string to_text() const; // key-value lines
};

// one warm-up run, then `reps` measured runs; median and nearest-rank p90
bench_report bench_model(const runtime_model& m, const bench_workload& wl, int reps,
                         const std::string& model_name);

}  // namespace eagle
