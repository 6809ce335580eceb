#include "eagle/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "eagle/graph.hpp"
#include "eagle/kernels.hpp"

namespace eagle {

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// Tensors consumed elementwise rather than through a matmul; these stay dense
// in memory (dequantized once at load).
bool dense_consumed(const std::string& name, const std::vector<int64_t>& dims) {
    return dims.size() == 1 || name == "vision.pos" || name == "vision.resampler.queries";
}

}  // namespace

runtime_model runtime_model::from_weights(const model_weights& w) {
    runtime_model m;
    m.cfg = w.cfg;
    m.vocab = default_vocabulary();
    for (const auto& [name, t] : w.tensors) {
        runtime_weight rw;
        rw.packed = false;
        rw.dense = t;
        m.weights.emplace(name, std::move(rw));
    }
    return m;
}

runtime_model runtime_model::from_checkpoint(const checkpoint_data& ckpt) {
    runtime_model m;
    m.cfg = ckpt.meta.model;
    m.vocab = default_vocabulary();
    m.kind = ckpt.meta.kind;
    m.avg_bits = ckpt.average_bits();
    for (const auto& [name, st] : ckpt.tensors) {
        if (name.find(".lora_") != std::string::npos) continue;
        runtime_weight rw;
        if (st.dtype == dtype_f32) {
            rw.packed = false;
            rw.dense = st.f32;
        } else if (dense_consumed(name, st.q.shape)) {
            rw.packed = false;
            rw.dense = dequantize(st.q);
        } else {
            rw.packed = true;
            rw.q = st.q;
        }
        m.weights.emplace(name, std::move(rw));
    }
    // adapted matrices are materialized: W = base + (alpha/rank) * A*B
    if (ckpt.meta.lora.enabled()) {
        const float s = ckpt.meta.lora.alpha / static_cast<float>(ckpt.meta.lora.rank);
        for (const auto& target : ckpt.meta.lora.targets) {
            auto a_it = ckpt.tensors.find(target + ".lora_a");
            auto b_it = ckpt.tensors.find(target + ".lora_b");
            if (a_it == ckpt.tensors.end() || b_it == ckpt.tensors.end())
                throw format_error("checkpoint: missing adapter tensors for '" + target + "'");
            runtime_weight& rw = m.rw_mut(target);
            const tensor base = rw.packed ? dequantize(rw.q) : rw.dense;
            rw.dense = add(base, scale(matmul(a_it->second.f32, b_it->second.f32), s));
            rw.packed = false;
            rw.q = quantized_tensor{};
        }
    }
    return m;
}

const runtime_weight& runtime_model::rw(const std::string& name) const {
    auto it = weights.find(name);
    if (it == weights.end()) throw std::invalid_argument("runtime: unknown tensor " + name);
    return it->second;
}

runtime_weight& runtime_model::rw_mut(const std::string& name) {
    auto it = weights.find(name);
    if (it == weights.end()) throw std::invalid_argument("runtime: unknown tensor " + name);
    return it->second;
}

const tensor& runtime_model::vec(const std::string& name) const {
    const runtime_weight& w = rw(name);
    if (w.packed) throw std::logic_error("runtime: vector weight left packed: " + name);
    return w.dense;
}

tensor rt_linear(const runtime_model& m, const std::string& name, const tensor& x) {
    const runtime_weight& w = m.rw(name);
    if (x.last_dim() != w.cols())
        throw shape_error("rt_linear(" + name + "): " + shape_str(x.shape) + " x [" +
                          std::to_string(w.rows()) + "x" + std::to_string(w.cols()) + "]^T");
    if (!w.packed) return matmul_nt(x, w.dense);

    const int64_t rows = x.rows2d(), n = w.rows(), k = w.cols();
    tensor y({rows, n});
#pragma omp parallel
    {
        std::vector<float> scratch(static_cast<size_t>(k));
#pragma omp for schedule(static)
        for (int64_t o = 0; o < n; ++o) {
            dequantize_row(w.q, o, scratch.data());
            for (int64_t i = 0; i < rows; ++i)
                y.data[i * n + o] = dot(x.row(i), scratch.data(), k);
        }
    }
    return y;
}

tensor rt_embed_rows(const runtime_model& m, const std::vector<int>& ids) {
    const runtime_weight& w = m.rw("decoder.embed");
    const int64_t d = w.cols();
    tensor out({static_cast<int64_t>(ids.size()), d});
    for (size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] < 0 || ids[r] >= w.rows())
            throw std::invalid_argument("token id out of range: " + std::to_string(ids[r]));
        if (w.packed)
            dequantize_row(w.q, ids[r], out.row(static_cast<int64_t>(r)));
        else
            std::copy_n(w.dense.row(ids[r]), d, out.row(static_cast<int64_t>(r)));
    }
    return out;
}

namespace {

// Multi-head attention of q rows (absolute positions base..base+m-1) against
// keys/values [0, kv_len_of_row). Same softmax and accumulation order as the
// training graph.
tensor mh_attention(const tensor& q, const tensor& k, const tensor& v, int heads, bool causal,
                    int64_t base = 0, int64_t kv_len = -1) {
    const int64_t mrows = q.shape[0], d = q.shape[1];
    const int64_t dh = d / heads;
    const float sc = 1.0f / std::sqrt(static_cast<float>(dh));
    const int64_t n = kv_len >= 0 ? kv_len : k.shape[0];
    tensor out({mrows, d});
#pragma omp parallel
    {
        std::vector<float> p(static_cast<size_t>(n));
#pragma omp for schedule(static) collapse(2)
        for (int h = 0; h < heads; ++h) {
            for (int64_t i = 0; i < mrows; ++i) {
                const int64_t lim = causal ? base + i + 1 : n;
                float mx = -std::numeric_limits<float>::infinity();
                for (int64_t j = 0; j < lim; ++j) {
                    p[j] = sc * dot(q.row(i) + h * dh, k.row(j) + h * dh, dh);
                    mx = std::max(mx, p[j]);
                }
                float sum = 0.0f;
                for (int64_t j = 0; j < lim; ++j) {
                    p[j] = std::exp(p[j] - mx);
                    sum += p[j];
                }
                const float inv = 1.0f / sum;
                float* orow = out.row(i) + h * dh;
                for (int64_t j = 0; j < lim; ++j) axpy(orow, v.row(j) + h * dh, p[j] * inv, dh);
            }
        }
    }
    return out;
}

tensor rt_encoder_tower_layer(const runtime_model& m, const std::string& prefix, const tensor& x,
                              int heads, bool use_rope) {
    const float eps = m.cfg.norm_eps;
    tensor xn = rmsnorm(x, m.vec(prefix + "attn_norm"), eps);
    tensor q = rt_linear(m, prefix + "attn.wq", xn);
    tensor k = rt_linear(m, prefix + "attn.wk", xn);
    tensor v = rt_linear(m, prefix + "attn.wv", xn);
    if (use_rope) {
        q = graphf::rope_apply(q, heads, 0, m.cfg.rope_theta, false);
        k = graphf::rope_apply(k, heads, 0, m.cfg.rope_theta, false);
    }
    tensor att = mh_attention(q, k, v, heads, false);
    tensor h = add(x, rt_linear(m, prefix + "attn.wo", att));
    tensor fn = rmsnorm(h, m.vec(prefix + "ffn_norm"), eps);
    tensor up = gelu(rt_linear(m, prefix + "ffn.w_up", fn));
    return add(h, rt_linear(m, prefix + "ffn.w_down", up));
}

}  // namespace

tensor rt_vision_block(const runtime_model& m, const tensor& patches) {
    const auto& cfg = m.cfg;
    if (patches.shape[0] != cfg.patches_per_block())
        throw shape_error("rt_vision_block: expected " + std::to_string(cfg.patches_per_block()) +
                          " patches, got " + shape_str(patches.shape));
    tensor x = rt_linear(m, "vision.patch_embed", patches);
    x = add(x, m.vec("vision.pos"));
    for (int i = 0; i < cfg.vision_layers; ++i)
        x = rt_encoder_tower_layer(m, "vision.l" + std::to_string(i) + ".", x, cfg.vision_heads,
                                   false);
    x = rmsnorm(x, m.vec("vision.final_norm"), cfg.norm_eps);
    const tensor& queries = m.vec("vision.resampler.queries");
    tensor q = rt_linear(m, "vision.resampler.wq", queries);
    tensor k = rt_linear(m, "vision.resampler.wk", x);
    tensor v = rt_linear(m, "vision.resampler.wv", x);
    tensor att = mh_attention(q, k, v, cfg.vision_heads, false);
    tensor out = add(queries, rt_linear(m, "vision.resampler.wo", att));
    return rmsnorm(out, m.vec("vision.resampler.norm"), cfg.norm_eps);
}

tensor rt_audio(const runtime_model& m, const tensor& mel) {
    const auto& cfg = m.cfg;
    // pair-merge = stride-2 conv patchify
    const int64_t frames = mel.shape[0], w = mel.shape[1];
    const int64_t out_rows = (frames + cfg.conv_stride - 1) / cfg.conv_stride;
    tensor merged({out_rows, w * cfg.conv_stride});
    for (int64_t t = 0; t < out_rows; ++t)
        for (int f = 0; f < cfg.conv_stride; ++f) {
            const int64_t src = t * cfg.conv_stride + f;
            if (src < frames)
                std::copy_n(mel.row(src), w, merged.row(t) + f * w);
        }
    tensor x = gelu(rt_linear(m, "audio.frame_embed", merged));
    for (int i = 0; i < cfg.audio_layers; ++i)
        x = rt_encoder_tower_layer(m, "audio.l" + std::to_string(i) + ".", x, cfg.audio_heads, true);
    x = rmsnorm(x, m.vec("audio.final_norm"), cfg.norm_eps);
    // ragged mean pool
    const int64_t rows = x.shape[0], d = x.shape[1];
    const int64_t pooled = (rows + cfg.pool_factor - 1) / cfg.pool_factor;
    tensor out({pooled, d});
    for (int64_t t = 0; t < pooled; ++t) {
        const int64_t lo = t * cfg.pool_factor, hi = std::min<int64_t>(lo + cfg.pool_factor, rows);
        float* orow = out.row(t);
        for (int64_t r = lo; r < hi; ++r) axpy(orow, x.row(r), 1.0f, d);
        const float inv = 1.0f / static_cast<float>(hi - lo);
        for (int64_t j = 0; j < d; ++j) orow[j] *= inv;
    }
    return out;
}

tensor rt_project(const runtime_model& m, const std::string& which, const tensor& x) {
    tensor h = gelu(rt_linear(m, "proj." + which + ".w1", x));
    return rt_linear(m, "proj." + which + ".w2", h);
}

packed_sequence assemble_embeddings(const runtime_model& m, const prepared_sample& ps,
                                    segment_cache* cache, bool fresh_vision, bool fresh_audio) {
    std::vector<segment_embedding> segments;
    for (size_t i = 0; i < ps.segments.size(); ++i) {
        const auto& seg = ps.segments[i];
        segment_embedding se;
        se.kind = seg.kind;
        switch (seg.kind) {
            case modality::text:
                se.embeddings = rt_embed_rows(m, seg.tokens);
                break;
            case modality::image:
            case modality::audio: {
                // fresh: recompute without touching the cache (temporary
                // weight swaps); otherwise reuse the cache, filling it on
                // first use
                const bool fresh = seg.kind == modality::image ? fresh_vision : fresh_audio;
                if (cache && !fresh && cache->embeds.count(static_cast<int>(i))) {
                    se.embeddings = cache->embeds.at(static_cast<int>(i));
                    break;
                }
                if (seg.kind == modality::image) {
                    std::vector<tensor> blocks;
                    for (const auto& b : seg.blocks) blocks.push_back(rt_vision_block(m, b));
                    tensor img;
                    if (blocks.size() == 1) {
                        img = std::move(blocks[0]);
                    } else {
                        int64_t rows = 0;
                        for (auto& b : blocks) rows += b.shape[0];
                        img = tensor({rows, blocks[0].shape[1]});
                        int64_t pos = 0;
                        for (auto& b : blocks) {
                            std::copy(b.data.begin(), b.data.end(), img.row(pos));
                            pos += b.shape[0];
                        }
                    }
                    se.embeddings = rt_project(m, "vision", img);
                } else {
                    se.embeddings = rt_project(m, "audio", rt_audio(m, seg.mel));
                }
                if (cache && !fresh) cache->embeds[static_cast<int>(i)] = se.embeddings;
                break;
            }
        }
        segments.push_back(std::move(se));
    }
    sentinel_rows sent;
    sent.rows = rt_embed_rows(m, {tok_img_begin, tok_img_end, tok_aud_begin, tok_aud_end});
    return interleave(segments, sent);
}

kv_cache make_cache(const eagle_config& cfg) {
    kv_cache c;
    c.max_len = cfg.max_seq_len;
    c.len = 0;
    for (int i = 0; i < cfg.n_layers; ++i) {
        c.k.emplace_back(std::vector<int64_t>{cfg.max_seq_len, cfg.d_model});
        c.v.emplace_back(std::vector<int64_t>{cfg.max_seq_len, cfg.d_model});
    }
    return c;
}

tensor decoder_prefill(const runtime_model& m, const tensor& embeddings, kv_cache& cache) {
    const auto& cfg = m.cfg;
    const int64_t n = embeddings.shape[0];
    const int64_t base = cache.len;
    if (base + n > cache.max_len)
        throw std::invalid_argument("decoder_prefill: sequence length " + std::to_string(base + n) +
                                    " exceeds max_seq_len " + std::to_string(cache.max_len));
    tensor x = embeddings;
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string prefix = "decoder.l" + std::to_string(l) + ".";
        tensor xn = rmsnorm(x, m.vec(prefix + "attn_norm"), cfg.norm_eps);
        tensor q = rt_linear(m, prefix + "attn.wq", xn);
        tensor k = rt_linear(m, prefix + "attn.wk", xn);
        tensor v = rt_linear(m, prefix + "attn.wv", xn);
        q = graphf::rope_apply(q, cfg.n_heads, base, cfg.rope_theta, false);
        k = graphf::rope_apply(k, cfg.n_heads, base, cfg.rope_theta, false);
        std::copy(k.data.begin(), k.data.end(), cache.k[l].row(base));
        std::copy(v.data.begin(), v.data.end(), cache.v[l].row(base));
        tensor att = mh_attention(q, cache.k[l], cache.v[l], cfg.n_heads, true, base);
        x = add(x, rt_linear(m, prefix + "attn.wo", att));
        tensor fn = rmsnorm(x, m.vec(prefix + "ffn_norm"), cfg.norm_eps);
        tensor h = mul(silu(rt_linear(m, prefix + "ffn.w_gate", fn)),
                       rt_linear(m, prefix + "ffn.w_up", fn));
        x = add(x, rt_linear(m, prefix + "ffn.w_down", h));
    }
    cache.len = base + n;
    x = rmsnorm(x, m.vec("decoder.final_norm"), cfg.norm_eps);
    return rt_linear(m, "decoder.embed", x);
}

tensor decode_step(const runtime_model& m, int token, kv_cache& cache) {
    const tensor row = rt_embed_rows(m, {token});
    return decoder_prefill(m, row, cache);
}

tensor forward_logits(const runtime_model& m, const prepared_sample& ps) {
    kv_cache cache = make_cache(m.cfg);
    const packed_sequence seq = assemble_embeddings(m, ps);
    return decoder_prefill(m, seq.embeddings, cache);
}

double masked_cross_entropy(const tensor& logits, const std::vector<int>& targets,
                            const std::vector<uint8_t>& mask) {
    const int64_t rows = logits.shape[0], vsz = logits.shape[1];
    double loss = 0.0;
    int64_t count = 0;
    for (int64_t r = 0; r < rows; ++r) {
        if (!mask[static_cast<size_t>(r)]) continue;
        const float* p = logits.row(r);
        float mx = p[0];
        for (int64_t j = 1; j < vsz; ++j) mx = std::max(mx, p[j]);
        double sum = 0.0;
        for (int64_t j = 0; j < vsz; ++j) sum += std::exp(static_cast<double>(p[j]) - mx);
        loss += std::log(sum) + mx - p[targets[static_cast<size_t>(r)]];
        ++count;
    }
    return count ? loss / static_cast<double>(count) : 0.0;
}

double eval_loss(const runtime_model& m, const std::vector<sample>& samples) {
    std::vector<double> losses(samples.size());
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(samples.size()); ++i) {
        const prepared_sample ps = prepare_sample(samples[static_cast<size_t>(i)], m.cfg, true);
        const tensor logits = forward_logits(m, ps);
        losses[static_cast<size_t>(i)] = masked_cross_entropy(logits, ps.targets, ps.mask);
    }
    double total = 0.0;
    for (double l : losses) total += l;
    return total / static_cast<double>(samples.size());
}

bool eval_exact_match(const runtime_model& m, const sample& s) {
    const prepared_sample ps = prepare_sample(s, m.cfg, true);
    const tensor logits = forward_logits(m, ps);
    for (size_t i = 0; i < ps.answer.size(); ++i) {
        const float* row = logits.row(ps.ans_pos + static_cast<int64_t>(i));
        int best = 0;
        for (int64_t j = 1; j < logits.shape[1]; ++j)
            if (row[j] > row[best]) best = static_cast<int>(j);
        if (best != ps.answer[i]) return false;
    }
    return true;
}

double eval_accuracy(const runtime_model& m, const std::vector<sample>& samples) {
    std::vector<uint8_t> hit(samples.size(), 0);
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(samples.size()); ++i)
        hit[static_cast<size_t>(i)] = eval_exact_match(m, samples[static_cast<size_t>(i)]) ? 1 : 0;
    int64_t n = 0;
    for (uint8_t h : hit) n += h;
    return 100.0 * static_cast<double>(n) / static_cast<double>(samples.size());
}

int sample_token(const float* logits, int n, const generation_config& cfg, rng& r) {
    if (cfg.temperature <= 0.0f || cfg.top_k <= 1) {
        int best = 0;
        for (int j = 1; j < n; ++j)
            if (logits[j] > logits[best]) best = j; // ties keep the lowest id
        return best;
    }
    const int k = std::min(cfg.top_k, n);
    // top-k by (logit desc, id asc)
    std::vector<int> idx(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) idx[static_cast<size_t>(j)] = j;
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
        if (logits[a] != logits[b]) return logits[a] > logits[b];
        return a < b;
    });
    float mx = logits[idx[0]];
    double sum = 0.0;
    std::vector<double> p(static_cast<size_t>(k));
    for (int j = 0; j < k; ++j) {
        p[static_cast<size_t>(j)] = std::exp((logits[idx[static_cast<size_t>(j)]] - mx) / cfg.temperature);
        sum += p[static_cast<size_t>(j)];
    }
    const double u = static_cast<double>(r.next_float()) * sum;
    double acc = 0.0;
    for (int j = 0; j < k; ++j) {
        acc += p[static_cast<size_t>(j)];
        if (u < acc) return idx[static_cast<size_t>(j)];
    }
    return idx[static_cast<size_t>(k - 1)];
}

generation_result generate(const runtime_model& m, const sample& input, const generation_config& cfg,
                           const std::function<void(int)>& on_token) {
    const double t0 = now_ms();
    generation_result res;
    const prepared_sample ps = prepare_sample(input, m.cfg, false);
    kv_cache cache = make_cache(m.cfg);
    const packed_sequence seq = assemble_embeddings(m, ps);
    res.metrics.prefill_tokens = seq.total_len();

    rng r(cfg.seed, hash_str64("generate"));
    tensor logits = decoder_prefill(m, seq.embeddings, cache);
    int token = sample_token(logits.row(logits.shape[0] - 1), m.cfg.vocab_size, cfg, r);
    double t_first = now_ms();
    res.metrics.ttft_ms = t_first - t0;

    auto is_stop = [&](int t) {
        return std::find(cfg.stop_tokens.begin(), cfg.stop_tokens.end(), t) != cfg.stop_tokens.end();
    };

    res.reason = stop_reason::max_tokens;
    double t_last = t_first;
    for (int produced = 0; produced < cfg.max_new_tokens; ++produced) {
        if (is_stop(token)) {
            res.reason = stop_reason::stop_token;
            break;
        }
        res.tokens.push_back(token);
        if (on_token) on_token(token);
        if (produced + 1 >= cfg.max_new_tokens) break;
        if (cache.len >= cache.max_len) {
            res.reason = stop_reason::context_overflow;
            break;
        }
        logits = decode_step(m, token, cache);
        ++res.metrics.decode_tokens;
        token = sample_token(logits.row(0), m.cfg.vocab_size, cfg, r);
        t_last = now_ms();
    }
    if (res.metrics.decode_tokens >= 8)
        res.metrics.tokens_per_sec = static_cast<double>(res.metrics.decode_tokens) /
                                     ((t_last - t_first) / 1000.0);
    return res;
}

std::string bench_report::to_text() const {
    std::ostringstream os;
    os << "model " << model << "\n";
    os << "avg_bits " << avg_bits << "\n";
    os << "prefill_tokens " << prefill_tokens << "\n";
    os << "decode_tokens " << decode_tokens << "\n";
    os << "ttft_ms_median " << ttft_ms_median << "\n";
    os << "ttft_ms_p90 " << ttft_ms_p90 << "\n";
    os << "tokens_per_sec_median " << tokens_per_sec_median << "\n";
    os << "tokens_per_sec_p90 " << tokens_per_sec_p90 << "\n";
    return os.str();
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double p90_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t rank = static_cast<size_t>(std::ceil(0.9 * static_cast<double>(v.size())));
    return v[std::max<size_t>(rank, 1) - 1];
}

}  // namespace

bench_report bench_model(const runtime_model& m, const bench_workload& wl, int reps,
                         const std::string& model_name) {
    if (reps < 1) throw std::invalid_argument("bench: reps must be >= 1");
    if (wl.prompt_tokens < 1 || wl.decode_tokens < 1)
        throw std::invalid_argument("bench: workload sizes must be positive");
    // deterministic synthetic text prompt over the word vocabulary
    const vocabulary vocab = default_vocabulary();
    rng pr(0xBE0C5, hash_str64("bench_prompt"));
    sample s;
    mm_segment seg;
    seg.kind = modality::text;
    for (int i = 0; i < wl.prompt_tokens; ++i)
        seg.tokens.push_back(tok_first_word +
                             static_cast<int>(pr.next_range(vocab.size() - tok_first_word)));
    s.segments.push_back(seg);

    generation_config gc;
    gc.max_new_tokens = wl.decode_tokens;
    gc.temperature = 0.0f;
    gc.stop_tokens = {}; // run the full decode length
    std::vector<double> ttft, tps;
    for (int run = 0; run <= reps; ++run) {
        const generation_result r = generate(m, s, gc);
        if (run == 0) continue; // warm-up
        ttft.push_back(r.metrics.ttft_ms);
        tps.push_back(r.metrics.tokens_per_sec);
    }
    bench_report report;
    report.model = model_name;
    report.avg_bits = m.avg_bits;
    report.prefill_tokens = wl.prompt_tokens;
    report.decode_tokens = wl.decode_tokens;
    report.ttft_ms_median = median_of(ttft);
    report.ttft_ms_p90 = p90_of(ttft);
    report.tokens_per_sec_median = median_of(tps);
    report.tokens_per_sec_p90 = p90_of(tps);
    return report;
}

}  // namespace eagle
