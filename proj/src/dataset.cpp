#include "eagle/dataset.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "eagle/errors.hpp"
#include "eagle/image_io.hpp"
#include "eagle/rng.hpp"

namespace eagle {

namespace {

constexpr double k_pi = 3.14159265358979323846;

const vocabulary& vocab() {
    static const vocabulary v = default_vocabulary();
    return v;
}

std::vector<int> words(const std::string& text) { return vocab().encode(text); }

// int16-representable sample values so PCM16 file round-trips are bit-exact
float quantize_pcm(float v) {
    v = std::max(-1.0f, std::min(1.0f, v));
    return static_cast<float>(std::lrint(v * 32767.0f)) / 32768.0f;
}

}  // namespace

const char* task_name(synth_task t) {
    switch (t) {
        case synth_task::color_grid: return "color_grid";
        case synth_task::tone_digits: return "tone_digits";
        case synth_task::interleaved: return "interleaved";
    }
    return "?";
}

synth_task task_from_name(const std::string& name) {
    if (name == "color_grid") return synth_task::color_grid;
    if (name == "tone_digits") return synth_task::tone_digits;
    if (name == "interleaved") return synth_task::interleaved;
    throw std::invalid_argument("unknown task: " + name);
}

const std::vector<std::array<uint8_t, 3>>& grid_colors() {
    static const std::vector<std::array<uint8_t, 3>> colors = {
        {220, 40, 40},   // red
        {40, 180, 60},   // green
        {40, 80, 220},   // blue
        {230, 220, 50},  // yellow
        {240, 150, 40},  // orange
        {150, 60, 200},  // purple
        {240, 240, 240}, // white
        {128, 128, 128}, // gray
    };
    return colors;
}

int color_token(int color_index) { return vocab().id("red") + color_index; }

double digit_tone_hz(int digit) { return 300.0 + 250.0 * digit; }

int digit_token(int digit) { return vocab().id("zero") + digit; }

namespace {

struct grid_task {
    mm_segment text_seg;
    mm_segment image_seg;
    int answer_token;
};

grid_task make_grid_task(rng& r) {
    const int g = 2 + static_cast<int>(r.next_range(3)); // 2..4
    const int cell = k_block_px / g;
    std::vector<int> cells(static_cast<size_t>(g) * g);
    for (int& c : cells) c = static_cast<int>(r.next_range(grid_colors().size()));
    const int qr = static_cast<int>(r.next_range(g));
    const int qc = static_cast<int>(r.next_range(g));

    grid_task t;
    t.image_seg.kind = modality::image;
    t.image_seg.img = image_u8(k_block_px, k_block_px);
    for (int y = 0; y < k_block_px; ++y)
        for (int x = 0; x < k_block_px; ++x) {
            const int color = cells[static_cast<size_t>(std::min(y / cell, g - 1)) * g +
                                    std::min(x / cell, g - 1)];
            std::memcpy(t.image_seg.img.px(y, x), grid_colors()[color].data(), 3);
        }
    t.text_seg.kind = modality::text;
    t.text_seg.tokens = words("what color is at r" + std::to_string(qr) + " c" + std::to_string(qc));
    t.answer_token = color_token(cells[static_cast<size_t>(qr) * g + qc]);
    return t;
}

struct tone_task {
    mm_segment text_seg;
    mm_segment audio_seg;
    std::vector<int> answer_tokens;
};

tone_task make_tone_task(rng& r) {
    const int n = 3 + static_cast<int>(r.next_range(4)); // 3..6 digits
    tone_task t;
    t.text_seg.kind = modality::text;
    t.text_seg.tokens = words("say the digits in the audio");
    t.audio_seg.kind = modality::audio;
    const int tone_len = static_cast<int>(k_tone_seconds * k_audio_sample_rate);
    const int gap_len = static_cast<int>(k_tone_gap_seconds * k_audio_sample_rate);
    const int total = n * tone_len + (n - 1) * gap_len;
    t.audio_seg.audio.assign(static_cast<size_t>(total), 0.0f);
    for (int i = 0; i < n; ++i) {
        const int digit = static_cast<int>(r.next_range(10));
        t.answer_tokens.push_back(digit_token(digit));
        const double f = digit_tone_hz(digit);
        const int off = i * (tone_len + gap_len);
        for (int s = 0; s < tone_len; ++s) {
            // 5 ms linear fade at both ends
            const int fade = k_audio_sample_rate / 200;
            double env = 1.0;
            if (s < fade) env = static_cast<double>(s) / fade;
            if (tone_len - 1 - s < fade) env = std::min(env, static_cast<double>(tone_len - 1 - s) / fade);
            const double v = 0.5 * env * std::sin(2.0 * k_pi * f * s / k_audio_sample_rate);
            t.audio_seg.audio[static_cast<size_t>(off + s)] = quantize_pcm(static_cast<float>(v));
        }
    }
    return t;
}

}  // namespace

sample gen_color_grid(uint64_t seed) {
    rng r(seed, hash_str64("color_grid"));
    auto task = make_grid_task(r);
    sample s;
    s.seed = seed;
    if (r.next_range(2) == 0) {
        s.segments = {task.text_seg, task.image_seg};
    } else {
        s.segments = {task.image_seg, task.text_seg};
    }
    s.target = {task.answer_token};
    return s;
}

sample gen_tone_digits(uint64_t seed) {
    rng r(seed, hash_str64("tone_digits"));
    auto task = make_tone_task(r);
    sample s;
    s.seed = seed;
    if (r.next_range(2) == 0) {
        s.segments = {task.text_seg, task.audio_seg};
    } else {
        s.segments = {task.audio_seg, task.text_seg};
    }
    s.target = task.answer_tokens;
    return s;
}

sample gen_interleaved(uint64_t seed) {
    rng r(seed, hash_str64("interleaved"));
    auto grid = make_grid_task(r);
    auto tone = make_tone_task(r);
    sample s;
    s.seed = seed;
    mm_segment link;
    link.kind = modality::text;
    link.tokens = words("then");
    if (r.next_range(2) == 0) {
        s.segments = {grid.text_seg, grid.image_seg, link, tone.text_seg, tone.audio_seg};
        s.target = {grid.answer_token, tok_sep};
        s.target.insert(s.target.end(), tone.answer_tokens.begin(), tone.answer_tokens.end());
    } else {
        s.segments = {tone.text_seg, tone.audio_seg, link, grid.text_seg, grid.image_seg};
        s.target = tone.answer_tokens;
        s.target.push_back(tok_sep);
        s.target.push_back(grid.answer_token);
    }
    return s;
}

sample generate_sample(synth_task task, uint64_t seed) {
    switch (task) {
        case synth_task::color_grid: return gen_color_grid(seed);
        case synth_task::tone_digits: return gen_tone_digits(seed);
        case synth_task::interleaved: return gen_interleaved(seed);
    }
    throw std::invalid_argument("bad task");
}

namespace {

template <typename T>
void put(std::string& buf, T v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct reader {
    const uint8_t* p;
    size_t len;
    size_t pos = 0;

    template <typename T>
    T get() {
        if (pos + sizeof(T) > len)
            throw format_error("dataset: truncated record", static_cast<int64_t>(pos));
        T v;
        std::memcpy(&v, p + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    const uint8_t* bytes(size_t n) {
        if (pos + n > len) throw format_error("dataset: truncated record", static_cast<int64_t>(pos));
        const uint8_t* q = p + pos;
        pos += n;
        return q;
    }
};

}  // namespace

void write_dataset(const std::string& path, const std::vector<sample>& samples) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw format_error("cannot open file for writing: " + tmp);
        std::string head = "EGDS";
        put(head, static_cast<uint32_t>(1));
        put(head, static_cast<uint64_t>(samples.size()));
        f.write(head.data(), static_cast<std::streamsize>(head.size()));
        for (const auto& s : samples) {
            std::string buf;
            put(buf, s.seed);
            put(buf, static_cast<uint8_t>(s.segments.size()));
            for (const auto& seg : s.segments) {
                put(buf, static_cast<uint8_t>(seg.kind));
                switch (seg.kind) {
                    case modality::text: {
                        put(buf, static_cast<uint32_t>(seg.tokens.size()));
                        for (int t : seg.tokens) put(buf, static_cast<uint32_t>(t));
                        break;
                    }
                    case modality::image: {
                        const auto png = png_encode(seg.img);
                        put(buf, static_cast<uint8_t>(1)); // png
                        put(buf, static_cast<uint32_t>(seg.img.h));
                        put(buf, static_cast<uint32_t>(seg.img.w));
                        put(buf, static_cast<uint64_t>(png.size()));
                        buf.append(reinterpret_cast<const char*>(png.data()), png.size());
                        break;
                    }
                    case modality::audio: {
                        put(buf, static_cast<uint64_t>(seg.audio.size()));
                        for (float v : seg.audio)
                            put(buf, static_cast<int16_t>(std::lrint(
                                         std::max(-1.0f, std::min(1.0f, v)) * 32768.0f)));
                        break;
                    }
                }
            }
            put(buf, static_cast<uint32_t>(s.target.size()));
            for (int t : s.target) put(buf, static_cast<uint32_t>(t));
            f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        }
        if (!f) throw format_error("short write: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw format_error("rename failed: " + tmp + " -> " + path);
    }
}

std::vector<sample> read_dataset(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    reader r{bytes.data(), bytes.size()};
    const uint8_t* magic = r.bytes(4);
    if (std::memcmp(magic, "EGDS", 4) != 0) throw format_error("dataset: bad magic in " + path, 0);
    const uint32_t version = r.get<uint32_t>();
    if (version != 1)
        throw format_error("dataset: unsupported version " + std::to_string(version), 4);
    const uint64_t count = r.get<uint64_t>();
    std::vector<sample> samples;
    samples.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        sample s;
        s.seed = r.get<uint64_t>();
        const uint8_t n_segs = r.get<uint8_t>();
        for (uint8_t k = 0; k < n_segs; ++k) {
            mm_segment seg;
            const uint8_t kind = r.get<uint8_t>();
            if (kind > 2) throw format_error("dataset: bad segment kind", static_cast<int64_t>(r.pos));
            seg.kind = static_cast<modality>(kind);
            switch (seg.kind) {
                case modality::text: {
                    const uint32_t n = r.get<uint32_t>();
                    seg.tokens.resize(n);
                    for (uint32_t t = 0; t < n; ++t) seg.tokens[t] = static_cast<int>(r.get<uint32_t>());
                    break;
                }
                case modality::image: {
                    const uint8_t enc = r.get<uint8_t>();
                    const uint32_t h = r.get<uint32_t>();
                    const uint32_t w = r.get<uint32_t>();
                    if (enc == 1) {
                        const uint64_t n = r.get<uint64_t>();
                        const uint8_t* png = r.bytes(n);
                        seg.img = png_decode(std::vector<uint8_t>(png, png + n));
                    } else if (enc == 0) {
                        const uint64_t n = r.get<uint64_t>();
                        if (n != static_cast<uint64_t>(h) * w * 3)
                            throw format_error("dataset: raw image size mismatch",
                                               static_cast<int64_t>(r.pos));
                        const uint8_t* raw = r.bytes(n);
                        seg.img = image_u8(static_cast<int>(h), static_cast<int>(w));
                        std::memcpy(seg.img.rgb.data(), raw, n);
                    } else {
                        throw format_error("dataset: unknown image encoding",
                                           static_cast<int64_t>(r.pos));
                    }
                    if (seg.img.h != static_cast<int>(h) || seg.img.w != static_cast<int>(w))
                        throw format_error("dataset: image dims mismatch", static_cast<int64_t>(r.pos));
                    break;
                }
                case modality::audio: {
                    const uint64_t n = r.get<uint64_t>();
                    seg.audio.resize(n);
                    for (uint64_t t = 0; t < n; ++t)
                        seg.audio[t] = static_cast<float>(r.get<int16_t>()) / 32768.0f;
                    break;
                }
            }
            s.segments.push_back(std::move(seg));
        }
        const uint32_t tlen = r.get<uint32_t>();
        s.target.resize(tlen);
        for (uint32_t t = 0; t < tlen; ++t) s.target[t] = static_cast<int>(r.get<uint32_t>());
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace eagle
