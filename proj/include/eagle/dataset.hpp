#pragma once

// Deterministic toy multi-modal task generators plus the dataset container
// format. Every sample is a pure function of (task, seed): regenerating is
// bit-identical, and every target is checkable by an oracle that never sees
// the model (pixel counting for grids, spectral peaks for tones).

#include <cstdint>
#include <string>
#include <vector>

#include "eagle/config.hpp"
#include "eagle/image.hpp"
#include "eagle/packing.hpp"

namespace eagle {

struct mm_segment {
    modality kind = modality::text;
    std::vector<int> tokens;   // text
    image_u8 img;              // image
    std::vector<float> audio;  // audio, 16 kHz mono, int16-representable values
};

struct sample {
    uint64_t seed = 0;
    std::vector<mm_segment> segments; // interleave order as stored
    std::vector<int> target;          // answer tokens (EOS appended downstream)
};

enum class synth_task { color_grid, tone_digits, interleaved };

const char* task_name(synth_task t);
synth_task task_from_name(const std::string& name);

sample gen_color_grid(uint64_t seed);
sample gen_tone_digits(uint64_t seed);
sample gen_interleaved(uint64_t seed);
sample generate_sample(synth_task task, uint64_t seed);

// The 8 grid colors as RGB; index order matches the color token order.
const std::vector<std::array<uint8_t, 3>>& grid_colors();
int color_token(int color_index);

// Tone frequency for each digit 0..9, Hz.
double digit_tone_hz(int digit);
int digit_token(int digit);

constexpr double k_tone_seconds = 0.4;
constexpr double k_tone_gap_seconds = 0.1;

// dataset file ("EGDS"): see README for the exact layout
void write_dataset(const std::string& path, const std::vector<sample>& samples);
std::vector<sample> read_dataset(const std::string& path);

}  // namespace eagle
