#include "eagle/weights.hpp"

#include <cmath>
#include <stdexcept>

#include "eagle/rng.hpp"

namespace eagle {

std::vector<tensor_spec> tensor_specs(const eagle_config& cfg) {
    std::vector<tensor_spec> specs;
    auto add = [&](std::string name, std::vector<int64_t> shape, init_kind k) {
        specs.push_back({std::move(name), std::move(shape), k});
    };
    const int64_t d = cfg.d_model, ff = cfg.d_ff, v = cfg.vocab_size;

    add("decoder.embed", {v, d}, init_kind::small_gaussian);
    for (int i = 0; i < cfg.n_layers; ++i) {
        const std::string p = "decoder.l" + std::to_string(i) + ".";
        add(p + "attn_norm", {d}, init_kind::ones);
        add(p + "attn.wq", {d, d}, init_kind::fan_in_gaussian);
        add(p + "attn.wk", {d, d}, init_kind::fan_in_gaussian);
        add(p + "attn.wv", {d, d}, init_kind::fan_in_gaussian);
        add(p + "attn.wo", {d, d}, init_kind::fan_in_gaussian);
        add(p + "ffn_norm", {d}, init_kind::ones);
        add(p + "ffn.w_gate", {ff, d}, init_kind::fan_in_gaussian);
        add(p + "ffn.w_up", {ff, d}, init_kind::fan_in_gaussian);
        add(p + "ffn.w_down", {d, ff}, init_kind::fan_in_gaussian);
    }
    add("decoder.final_norm", {d}, init_kind::ones);

    const int64_t vw = cfg.vision_width, vff = cfg.vision_ff;
    const int64_t patch_dim = static_cast<int64_t>(cfg.vision_patch_px) * cfg.vision_patch_px * 3;
    add("vision.patch_embed", {vw, patch_dim}, init_kind::fan_in_gaussian);
    add("vision.pos", {cfg.patches_per_block(), vw}, init_kind::small_gaussian);
    for (int i = 0; i < cfg.vision_layers; ++i) {
        const std::string p = "vision.l" + std::to_string(i) + ".";
        add(p + "attn_norm", {vw}, init_kind::ones);
        add(p + "attn.wq", {vw, vw}, init_kind::fan_in_gaussian);
        add(p + "attn.wk", {vw, vw}, init_kind::fan_in_gaussian);
        add(p + "attn.wv", {vw, vw}, init_kind::fan_in_gaussian);
        add(p + "attn.wo", {vw, vw}, init_kind::fan_in_gaussian);
        add(p + "ffn_norm", {vw}, init_kind::ones);
        add(p + "ffn.w_up", {vff, vw}, init_kind::fan_in_gaussian);
        add(p + "ffn.w_down", {vw, vff}, init_kind::fan_in_gaussian);
    }
    add("vision.final_norm", {vw}, init_kind::ones);
    add("vision.resampler.queries", {cfg.queries_per_block, vw}, init_kind::small_gaussian);
    add("vision.resampler.wq", {vw, vw}, init_kind::fan_in_gaussian);
    add("vision.resampler.wk", {vw, vw}, init_kind::fan_in_gaussian);
    add("vision.resampler.wv", {vw, vw}, init_kind::fan_in_gaussian);
    add("vision.resampler.wo", {vw, vw}, init_kind::fan_in_gaussian);
    add("vision.resampler.norm", {vw}, init_kind::ones);

    const int64_t aw = cfg.audio_width, aff = cfg.audio_ff;
    add("audio.frame_embed", {aw, static_cast<int64_t>(cfg.n_mels) * cfg.conv_stride},
        init_kind::fan_in_gaussian);
    for (int i = 0; i < cfg.audio_layers; ++i) {
        const std::string p = "audio.l" + std::to_string(i) + ".";
        add(p + "attn_norm", {aw}, init_kind::ones);
        add(p + "attn.wq", {aw, aw}, init_kind::fan_in_gaussian);
        add(p + "attn.wk", {aw, aw}, init_kind::fan_in_gaussian);
        add(p + "attn.wv", {aw, aw}, init_kind::fan_in_gaussian);
        add(p + "attn.wo", {aw, aw}, init_kind::fan_in_gaussian);
        add(p + "ffn_norm", {aw}, init_kind::ones);
        add(p + "ffn.w_up", {aff, aw}, init_kind::fan_in_gaussian);
        add(p + "ffn.w_down", {aw, aff}, init_kind::fan_in_gaussian);
    }
    add("audio.final_norm", {aw}, init_kind::ones);

    add("proj.vision.w1", {cfg.proj_hidden, vw}, init_kind::fan_in_gaussian);
    add("proj.vision.w2", {d, cfg.proj_hidden}, init_kind::fan_in_gaussian);
    add("proj.audio.w1", {cfg.proj_hidden, aw}, init_kind::fan_in_gaussian);
    add("proj.audio.w2", {d, cfg.proj_hidden}, init_kind::fan_in_gaussian);
    return specs;
}

tensor& model_weights::at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::invalid_argument("unknown tensor: " + name);
    return it->second;
}

const tensor& model_weights::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::invalid_argument("unknown tensor: " + name);
    return it->second;
}

int64_t model_weights::total_params() const {
    int64_t total = 0;
    for (const auto& [name, t] : tensors) total += t.numel();
    return total;
}

model_weights init_weights(const eagle_config& cfg, uint64_t seed) {
    cfg.validate();
    model_weights w;
    w.cfg = cfg;
    for (const auto& spec : tensor_specs(cfg)) {
        tensor t(spec.shape);
        // per-tensor stream keyed by name, so init order never matters
        rng r(seed, hash_str64(spec.name.c_str()));
        switch (spec.init) {
            case init_kind::ones:
                std::fill(t.data.begin(), t.data.end(), 1.0f);
                break;
            case init_kind::small_gaussian:
                for (float& v : t.data) v = 0.02f * r.next_gaussian();
                break;
            case init_kind::fan_in_gaussian: {
                const float s = 1.0f / std::sqrt(static_cast<float>(t.last_dim()));
                for (float& v : t.data) v = s * r.next_gaussian();
                break;
            }
        }
        w.tensors.emplace(spec.name, std::move(t));
    }
    return w;
}

std::map<std::string, int64_t> param_counts(const model_weights& w) {
    std::map<std::string, int64_t> counts;
    for (const auto& [name, t] : w.tensors) counts[name] = t.numel();
    return counts;
}

std::set<std::string> forced_int8_tensors(const eagle_config&) {
    return {"decoder.embed", "decoder.final_norm", "vision.final_norm", "audio.final_norm"};
}

uint64_t tensor_bytes_hash(const tensor& t) {
    uint64_t h = 0xcbf29ce484222325ULL;
    const uint8_t* p = reinterpret_cast<const uint8_t*>(t.data.data());
    const size_t n = t.data.size() * sizeof(float);
    for (size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 0x100000001b3ULL;
    return h;
}

uint64_t weights_hash(const model_weights& w, const std::set<std::string>& subset) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, t] : w.tensors) {
        if (!subset.empty() && !subset.count(name)) continue;
        h = mix64(h ^ hash_str64(name.c_str()));
        h = mix64(h ^ tensor_bytes_hash(t));
    }
    return h;
}

std::set<std::string> projector_tensor_names(const eagle_config&) {
    return {"proj.vision.w1", "proj.vision.w2", "proj.audio.w1", "proj.audio.w2"};
}

}  // namespace eagle
