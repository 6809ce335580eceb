#pragma once

// Token-budget accounting and sequence assembly: dynamic cropping of images
// into fixed 336px blocks, audio token-rate accounting, and interleaving of
// modality spans with sentinel boundaries.

#include <cstdint>
#include <string>
#include <vector>

#include "eagle/image.hpp"
#include "eagle/tensor.hpp"

namespace eagle {

constexpr int k_block_px = 336;
constexpr int k_tokens_per_block = 128;
// default audio frontend: 16 kHz, hop 160, conv stride 2, pool 16
constexpr int k_audio_samples_per_token = 160 * 2 * 16;
constexpr int k_audio_sample_rate = 16000;

enum class modality : uint8_t { text = 0, image = 1, audio = 2 };

struct crop_rect {
    int y0 = 0, x0 = 0; // top-left in the source image
    int h = 0, w = 0;   // source pixels covered (<= block_px at edges)
};

struct crop_grid {
    int rows = 0;
    int cols = 0;
    int block_px = k_block_px;
    std::vector<crop_rect> crops; // row-major, rows*cols entries
};

// ceil(h/336) * ceil(w/336) * 128
int64_t image_token_count(int height, int width);

crop_grid plan_crops(int height, int width);

// Cut one block out of the image; partial edge blocks are padded to
// block_px x block_px by replicating the nearest edge pixel.
image_u8 extract_block(const image_u8& img, const crop_rect& rect, int block_px = k_block_px);

// ceil(duration * rate) with rate = sample_rate / samples_per_token, min 1.
int64_t audio_token_count(double duration_seconds, int samples_per_token = k_audio_samples_per_token);
int64_t audio_token_count_samples(int64_t n_samples, int samples_per_token = k_audio_samples_per_token);

struct modality_span {
    modality kind = modality::text;
    int64_t start = 0;  // first payload row in the packed sequence
    int64_t length = 0; // payload rows (sentinels excluded)
    int source_id = 0;  // index of the input segment
};

struct packed_sequence {
    tensor embeddings; // [total_len x d_model]
    std::vector<modality_span> spans;
    int64_t sentinel_count = 0;

    int64_t total_len() const { return embeddings.ndim() == 2 ? embeddings.shape[0] : 0; }
};

struct segment_embedding {
    modality kind;
    tensor embeddings; // [len x d_model]
};

// Sentinel embedding rows, in this order: image-begin, image-end,
// audio-begin, audio-end.
struct sentinel_rows {
    tensor rows; // [4 x d_model]
};

// Row-level layout of an interleaved sequence: payload segments in caller
// order, non-text segments wrapped in begin/end sentinel entries. Every
// consumer of the packed layout derives it from this one function.
struct layout_entry {
    enum kind_t { sentinel, segment } kind;
    int seg_index = -1;   // for segment entries
    int sentinel_row = 0; // for sentinel entries: 0 img-begin, 1 img-end, 2 aud-begin, 3 aud-end
};
std::vector<layout_entry> sequence_layout(const std::vector<modality>& kinds);

// Concatenates segments in the given order; image and audio segments are
// wrapped in begin/end sentinel rows, text is not.
packed_sequence interleave(const std::vector<segment_embedding>& segments,
                           const sentinel_rows& sentinels);

// Copy of the payload rows of one span.
tensor extract_span(const packed_sequence& seq, const modality_span& span);

}  // namespace eagle
