#pragma once

// Turns a raw multi-modal sample into model-ready pieces: image blocks cut
// and patchified, audio run through the log-mel frontend, the interleaved
// row layout computed, and next-token targets placed after the answer marker.

#include <vector>

#include "eagle/audio.hpp"
#include "eagle/config.hpp"
#include "eagle/dataset.hpp"
#include "eagle/packing.hpp"
#include "eagle/tensor.hpp"

namespace eagle {

struct prepared_segment {
    modality kind = modality::text;
    std::vector<int> tokens;    // text
    std::vector<tensor> blocks; // image: per block [n_patches x patch_dim]
    tensor mel;                 // audio: [frames x n_mels]
    int64_t rows = 0;           // payload rows this segment contributes
};

struct prepared_sample {
    std::vector<prepared_segment> segments;
    std::vector<modality> kinds;
    int64_t total_len = 0; // payload rows + sentinel rows
    int64_t ans_pos = -1;  // row index of the answer marker token
    std::vector<int> targets;  // per-row next-token target (0 where unmasked)
    std::vector<uint8_t> mask; // 1 on answer-predicting rows
    std::vector<int> answer;   // target tokens plus eos, what eval must match
};

// Flattened pixel patches for one 336x336 block, row-major patches, each
// patch flattened y, x, channel; values scaled to [-1, 1].
tensor patchify_block(const image_u8& block, int patch_px);

// All blocks of an arbitrary-resolution image, via plan_crops.
std::vector<tensor> prepare_image(const image_u8& img, const eagle_config& cfg);

// with_answer appends the answer tokens (teacher forcing) and fills
// targets/mask; otherwise the sequence ends right after the answer marker.
// Throws unsupported_input_error when neither text nor audio is present.
prepared_sample prepare_sample(const sample& s, const eagle_config& cfg, bool with_answer);

}  // namespace eagle
