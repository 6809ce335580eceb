#pragma once

// Graph-building forward pass for the full model (towers, projectors,
// decoder). Templated on the scalar type: float for training and evaluation,
// double for the finite-difference harness.

#include <map>
#include <set>
#include <string>

#include "eagle/config.hpp"
#include "eagle/graph.hpp"
#include "eagle/prep.hpp"
#include "eagle/weights.hpp"

namespace eagle {

template <typename T>
struct bound_weights {
    std::map<std::string, typename graph<T>::value> values;

    typename graph<T>::value at(const std::string& name) const {
        auto it = values.find(name);
        if (it == values.end()) throw std::invalid_argument("bound_weights: unknown tensor " + name);
        return it->second;
    }
    bool has(const std::string& name) const { return values.count(name) != 0; }
};

// Plain binding: every tensor becomes a graph input; tensors in `trainable`
// request gradients.
template <typename T>
bound_weights<T> bind_weights(graph<T>& g, const model_weights& w,
                              const std::set<std::string>& trainable) {
    bound_weights<T> bw;
    for (const auto& [name, t] : w.tensors)
        bw.values[name] = g.input(cast_tensor<T>(t), trainable.count(name) != 0);
    return bw;
}

// One pre-norm transformer block. Decoder blocks are causal with rotary
// positions and a gated FFN; tower blocks are bidirectional with a plain
// gelu FFN (vision adds learned positions before the stack instead).
template <typename T>
typename graph<T>::value encoder_layer(graph<T>& g, const bound_weights<T>& bw,
                                       const std::string& prefix, typename graph<T>::value x,
                                       int heads, bool causal, bool use_rope, bool gated_ffn,
                                       T theta, T eps, int64_t pos_offset = 0) {
    auto xn = g.rmsnorm(x, bw.at(prefix + "attn_norm"), eps);
    auto q = g.linear(xn, bw.at(prefix + "attn.wq"));
    auto k = g.linear(xn, bw.at(prefix + "attn.wk"));
    auto v = g.linear(xn, bw.at(prefix + "attn.wv"));
    if (use_rope) {
        q = g.rope(q, heads, pos_offset, theta);
        k = g.rope(k, heads, pos_offset, theta);
    }
    auto att = g.attention(q, k, v, heads, causal);
    x = g.add(x, g.linear(att, bw.at(prefix + "attn.wo")));
    auto fn = g.rmsnorm(x, bw.at(prefix + "ffn_norm"), eps);
    if (gated_ffn) {
        auto h = g.mul(g.silu(g.linear(fn, bw.at(prefix + "ffn.w_gate"))),
                       g.linear(fn, bw.at(prefix + "ffn.w_up")));
        return g.add(x, g.linear(h, bw.at(prefix + "ffn.w_down")));
    }
    auto h = g.gelu(g.linear(fn, bw.at(prefix + "ffn.w_up")));
    return g.add(x, g.linear(h, bw.at(prefix + "ffn.w_down")));
}

// One 336x336 block -> exactly queries_per_block rows of width vision_width.
// Patch embedding, learned positions, encoder stack, then a cross-attention
// resampler whose learned queries fix the output row count at 128.
template <typename T>
typename graph<T>::value vision_block_forward(graph<T>& g, const bound_weights<T>& bw,
                                              const eagle_config& cfg, const tensor& patches) {
    const T eps = static_cast<T>(cfg.norm_eps);
    auto p = g.constant(cast_tensor<T>(patches));
    auto x = g.linear(p, bw.at("vision.patch_embed"));
    x = g.add(x, bw.at("vision.pos"));
    for (int i = 0; i < cfg.vision_layers; ++i)
        x = encoder_layer(g, bw, "vision.l" + std::to_string(i) + ".", x, cfg.vision_heads, false,
                          false, false, static_cast<T>(cfg.rope_theta), eps);
    x = g.rmsnorm(x, bw.at("vision.final_norm"), eps);
    auto q = g.linear(bw.at("vision.resampler.queries"), bw.at("vision.resampler.wq"));
    auto k = g.linear(x, bw.at("vision.resampler.wk"));
    auto v = g.linear(x, bw.at("vision.resampler.wv"));
    auto att = g.attention(q, k, v, cfg.vision_heads, false);
    auto out = g.add(bw.at("vision.resampler.queries"), g.linear(att, bw.at("vision.resampler.wo")));
    return g.rmsnorm(out, bw.at("vision.resampler.norm"), eps);
}

// Log-mel frames -> audio_token_count rows of width audio_width: pair-merge
// (the stride-2 conv), encoder stack with rotary positions, mean-pool.
template <typename T>
typename graph<T>::value audio_forward(graph<T>& g, const bound_weights<T>& bw,
                                       const eagle_config& cfg, const tensor& mel) {
    const T eps = static_cast<T>(cfg.norm_eps);
    auto m = g.constant(cast_tensor<T>(mel));
    auto x = g.gelu(g.linear(g.merge_rows(m, cfg.conv_stride), bw.at("audio.frame_embed")));
    for (int i = 0; i < cfg.audio_layers; ++i)
        x = encoder_layer(g, bw, "audio.l" + std::to_string(i) + ".", x, cfg.audio_heads, false,
                          true, false, static_cast<T>(cfg.rope_theta), eps);
    x = g.rmsnorm(x, bw.at("audio.final_norm"), eps);
    return g.mean_pool_rows(x, cfg.pool_factor);
}

template <typename T>
typename graph<T>::value project(graph<T>& g, const bound_weights<T>& bw, const std::string& which,
                                 typename graph<T>::value x) {
    auto h = g.gelu(g.linear(x, bw.at("proj." + which + ".w1")));
    return g.linear(h, bw.at("proj." + which + ".w2"));
}

// Causal decoder over an already-interleaved [len x d_model] sequence;
// logits via the tied embedding.
template <typename T>
typename graph<T>::value decoder_forward(graph<T>& g, const bound_weights<T>& bw,
                                         const eagle_config& cfg, typename graph<T>::value seq) {
    const T eps = static_cast<T>(cfg.norm_eps);
    auto x = seq;
    for (int i = 0; i < cfg.n_layers; ++i)
        x = encoder_layer(g, bw, "decoder.l" + std::to_string(i) + ".", x, cfg.n_heads, true, true,
                          true, static_cast<T>(cfg.rope_theta), eps);
    x = g.rmsnorm(x, bw.at("decoder.final_norm"), eps);
    return g.linear(x, bw.at("decoder.embed"));
}

template <typename T>
struct sample_graph {
    typename graph<T>::value embeddings; // interleaved [total_len x d_model]
    typename graph<T>::value logits;     // [total_len x vocab]
    typename graph<T>::value loss;       // scalar, only when with_loss
};

// Full forward for one prepared sample: towers -> projectors -> interleave
// with sentinel embeddings -> decoder (-> masked cross-entropy).
template <typename T>
sample_graph<T> build_sample_graph(graph<T>& g, const bound_weights<T>& bw,
                                   const eagle_config& cfg, const prepared_sample& ps,
                                   bool with_loss) {
    auto embed_table = bw.at("decoder.embed");
    std::vector<typename graph<T>::value> parts;
    static const int sentinel_tokens[4] = {tok_img_begin, tok_img_end, tok_aud_begin, tok_aud_end};
    for (const auto& e : sequence_layout(ps.kinds)) {
        if (e.kind == layout_entry::sentinel) {
            parts.push_back(g.embed(embed_table, {sentinel_tokens[e.sentinel_row]}));
            continue;
        }
        const auto& seg = ps.segments[static_cast<size_t>(e.seg_index)];
        switch (seg.kind) {
            case modality::text:
                parts.push_back(g.embed(embed_table, seg.tokens));
                break;
            case modality::image: {
                std::vector<typename graph<T>::value> blocks;
                for (const auto& b : seg.blocks)
                    blocks.push_back(vision_block_forward(g, bw, cfg, b));
                auto img = blocks.size() == 1 ? blocks[0] : g.concat_rows(blocks);
                parts.push_back(project(g, bw, "vision", img));
                break;
            }
            case modality::audio:
                parts.push_back(project(g, bw, "audio", audio_forward(g, bw, cfg, seg.mel)));
                break;
        }
    }
    sample_graph<T> sg;
    sg.embeddings = parts.size() == 1 ? parts[0] : g.concat_rows(parts);
    sg.logits = decoder_forward(g, bw, cfg, sg.embeddings);
    if (with_loss)
        sg.loss = g.cross_entropy(sg.logits, std::vector<int>(ps.targets.begin(), ps.targets.end()),
                                  ps.mask);
    return sg;
}

}  // namespace eagle
