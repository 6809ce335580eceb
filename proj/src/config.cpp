#include "eagle/config.hpp"

#include <stdexcept>

#include "json.hpp"

namespace eagle {

int vocabulary::id(const std::string& word) const {
    auto it = lookup.find(word);
    if (it == lookup.end()) throw std::invalid_argument("unknown token: '" + word + "'");
    return it->second;
}

const std::string& vocabulary::word(int id) const {
    if (id < 0 || id >= size()) throw std::invalid_argument("token id out of range: " + std::to_string(id));
    return words[static_cast<size_t>(id)];
}

std::vector<int> vocabulary::encode(const std::string& text) const {
    std::vector<int> ids;
    std::string cur;
    for (char c : text + " ") {
        if (c == ' ' || c == '\t' || c == '\n') {
            if (!cur.empty()) ids.push_back(id(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    return ids;
}

std::string vocabulary::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int t : ids) {
        if (!out.empty()) out += ' ';
        out += word(t);
    }
    return out;
}

vocabulary default_vocabulary() {
    vocabulary v;
    v.words = {"<pad>", "<bos>", "<eos>", "<sep>", "<img>", "</img>", "<aud>", "</aud>", "<ans>"};
    const char* extra[] = {
        // colors
        "red", "green", "blue", "yellow", "orange", "purple", "white", "gray",
        // digits
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
        // prompt template words
        "what", "color", "is", "at", "the", "digits", "in", "audio", "image", "then", "grid",
        "and", "of", "say",
        // row / column markers
        "r0", "r1", "r2", "r3", "c0", "c1", "c2", "c3"};
    for (const char* w : extra) v.words.push_back(w);
    for (size_t i = 0; i < v.words.size(); ++i) v.lookup[v.words[i]] = static_cast<int>(i);
    return v;
}

void eagle_config::validate() const {
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 || vocab_size < 1)
        throw std::invalid_argument("config: decoder dimensions must be positive");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("config: d_model must be divisible by n_heads");
    if (queries_per_block != 128)
        throw std::invalid_argument("config: queries_per_block is fixed at 128, got " +
                                    std::to_string(queries_per_block));
    if (block_px % vision_patch_px != 0)
        throw std::invalid_argument("config: block_px must be divisible by vision_patch_px");
    if (vision_width % vision_heads != 0 || audio_width % audio_heads != 0)
        throw std::invalid_argument("config: tower width must be divisible by tower heads");
    if (sample_rate < 1 || n_mels < 1 || hop < 1 || conv_stride < 1 || pool_factor < 1)
        throw std::invalid_argument("config: audio frontend fields must be positive");
    if (vocab_size < static_cast<int>(default_vocabulary().words.size()))
        throw std::invalid_argument("config: vocab_size smaller than the built-in token set");
    if (max_seq_len < 8) throw std::invalid_argument("config: max_seq_len too small");
}

std::string eagle_config::to_json() const {
    nlohmann::json j;
    j["d_model"] = d_model;
    j["n_layers"] = n_layers;
    j["n_heads"] = n_heads;
    j["d_ff"] = d_ff;
    j["vocab_size"] = vocab_size;
    j["max_seq_len"] = max_seq_len;
    j["rope_theta"] = rope_theta;
    j["norm_eps"] = norm_eps;
    j["block_px"] = block_px;
    j["vision_patch_px"] = vision_patch_px;
    j["vision_layers"] = vision_layers;
    j["vision_width"] = vision_width;
    j["vision_heads"] = vision_heads;
    j["vision_ff"] = vision_ff;
    j["queries_per_block"] = queries_per_block;
    j["sample_rate"] = sample_rate;
    j["n_mels"] = n_mels;
    j["hop"] = hop;
    j["conv_stride"] = conv_stride;
    j["pool_factor"] = pool_factor;
    j["audio_layers"] = audio_layers;
    j["audio_width"] = audio_width;
    j["audio_heads"] = audio_heads;
    j["audio_ff"] = audio_ff;
    j["proj_hidden"] = proj_hidden;
    return j.dump(2);
}

eagle_config eagle_config::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    eagle_config c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("d_model", c.d_model);
    get("n_layers", c.n_layers);
    get("n_heads", c.n_heads);
    get("d_ff", c.d_ff);
    get("vocab_size", c.vocab_size);
    get("max_seq_len", c.max_seq_len);
    get("rope_theta", c.rope_theta);
    get("norm_eps", c.norm_eps);
    get("block_px", c.block_px);
    get("vision_patch_px", c.vision_patch_px);
    get("vision_layers", c.vision_layers);
    get("vision_width", c.vision_width);
    get("vision_heads", c.vision_heads);
    get("vision_ff", c.vision_ff);
    get("queries_per_block", c.queries_per_block);
    get("sample_rate", c.sample_rate);
    get("n_mels", c.n_mels);
    get("hop", c.hop);
    get("conv_stride", c.conv_stride);
    get("pool_factor", c.pool_factor);
    get("audio_layers", c.audio_layers);
    get("audio_width", c.audio_width);
    get("audio_heads", c.audio_heads);
    get("audio_ff", c.audio_ff);
    get("proj_hidden", c.proj_hidden);
    c.validate();
    return c;
}

}  // namespace eagle
