#pragma once

#include <map>
#include <string>
#include <vector>

namespace eagle {

// Reserved token ids. Sentinels mark modality-span boundaries in the
// interleaved decoder sequence; tok_ans marks where the answer begins.
enum : int {
    tok_pad = 0,
    tok_bos = 1,
    tok_eos = 2,
    tok_sep = 3,
    tok_img_begin = 4,
    tok_img_end = 5,
    tok_aud_begin = 6,
    tok_aud_end = 7,
    tok_ans = 8,
    tok_first_word = 9,
};

struct vocabulary {
    std::vector<std::string> words; // index = token id
    std::map<std::string, int> lookup;

    int id(const std::string& word) const; // throws on unknown word
    const std::string& word(int id) const;
    std::vector<int> encode(const std::string& text) const; // whitespace split
    std::string decode(const std::vector<int>& ids) const;
    int size() const { return static_cast<int>(words.size()); }
};

vocabulary default_vocabulary();

struct eagle_config {
    // decoder
    int d_model = 256;
    int n_layers = 4;
    int n_heads = 4;
    int d_ff = 512;
    int vocab_size = 512;
    int max_seq_len = 1024;
    float rope_theta = 10000.0f;
    float norm_eps = 1e-5f;

    // vision tower
    int block_px = 336;
    int vision_patch_px = 48;
    int vision_layers = 2;
    int vision_width = 128;
    int vision_heads = 4;
    int vision_ff = 256;
    int queries_per_block = 128; // locked to the per-block token budget

    // audio tower
    int sample_rate = 16000;
    int n_mels = 80;
    int hop = 160;
    int conv_stride = 2;
    int pool_factor = 16;
    int audio_layers = 2;
    int audio_width = 128;
    int audio_heads = 4;
    int audio_ff = 256;

    // projectors
    int proj_hidden = 256;

    int head_dim() const { return d_model / n_heads; }
    int patches_per_block() const {
        const int g = block_px / vision_patch_px;
        return g * g;
    }
    int audio_samples_per_token() const { return hop * conv_stride * pool_factor; }
    double audio_token_rate() const {
        return static_cast<double>(sample_rate) / audio_samples_per_token();
    }

    void validate() const; // throws std::invalid_argument
    std::string to_json() const;
    static eagle_config from_json(const std::string& json_text);
};

}  // namespace eagle
