#include "eagle/packing.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace eagle {

static int ceil_div_int(int a, int b) { return (a + b - 1) / b; }

int64_t image_token_count(int height, int width) {
    if (height < 1 || width < 1)
        throw std::invalid_argument("image_token_count: dimensions must be positive, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    return static_cast<int64_t>(ceil_div_int(height, k_block_px)) *
           static_cast<int64_t>(ceil_div_int(width, k_block_px)) * k_tokens_per_block;
}

crop_grid plan_crops(int height, int width) {
    if (height < 1 || width < 1)
        throw std::invalid_argument("plan_crops: dimensions must be positive, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    crop_grid g;
    g.rows = ceil_div_int(height, k_block_px);
    g.cols = ceil_div_int(width, k_block_px);
    g.crops.reserve(static_cast<size_t>(g.rows) * g.cols);
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) {
            crop_rect rect;
            rect.y0 = r * k_block_px;
            rect.x0 = c * k_block_px;
            rect.h = std::min(k_block_px, height - rect.y0);
            rect.w = std::min(k_block_px, width - rect.x0);
            g.crops.push_back(rect);
        }
    return g;
}

image_u8 extract_block(const image_u8& img, const crop_rect& rect, int block_px) {
    image_u8 out(block_px, block_px);
    for (int y = 0; y < block_px; ++y) {
        // replicate-edge padding for partial blocks
        const int sy = rect.y0 + std::min(y, rect.h - 1);
        for (int x = 0; x < block_px; ++x) {
            const int sx = rect.x0 + std::min(x, rect.w - 1);
            std::memcpy(out.px(y, x), img.px(sy, sx), 3);
        }
    }
    return out;
}

int64_t audio_token_count_samples(int64_t n_samples, int samples_per_token) {
    if (n_samples < 1) throw std::invalid_argument("audio_token_count: empty waveform");
    return (n_samples + samples_per_token - 1) / samples_per_token;
}

int64_t audio_token_count(double duration_seconds, int samples_per_token) {
    if (!(duration_seconds > 0.0))
        throw std::invalid_argument("audio_token_count: duration must be positive");
    const int64_t n = std::llround(duration_seconds * k_audio_sample_rate);
    return audio_token_count_samples(std::max<int64_t>(n, 1), samples_per_token);
}

std::vector<layout_entry> sequence_layout(const std::vector<modality>& kinds) {
    if (kinds.empty()) throw std::invalid_argument("sequence_layout: empty segment list");
    std::vector<layout_entry> layout;
    for (size_t i = 0; i < kinds.size(); ++i) {
        const modality k = kinds[i];
        if (k != modality::text)
            layout.push_back({layout_entry::sentinel, -1, k == modality::image ? 0 : 2});
        layout.push_back({layout_entry::segment, static_cast<int>(i), 0});
        if (k != modality::text)
            layout.push_back({layout_entry::sentinel, -1, k == modality::image ? 1 : 3});
    }
    return layout;
}

packed_sequence interleave(const std::vector<segment_embedding>& segments,
                           const sentinel_rows& sentinels) {
    if (segments.empty()) throw std::invalid_argument("interleave: empty segment list");
    if (sentinels.rows.ndim() != 2 || sentinels.rows.shape[0] != 4)
        throw shape_error("interleave: sentinel rows must be [4 x d_model], got " +
                          shape_str(sentinels.rows.shape));
    const int64_t d = sentinels.rows.shape[1];
    std::vector<modality> kinds;
    int64_t total = 0;
    for (const auto& s : segments) {
        if (s.embeddings.ndim() != 2 || s.embeddings.shape[1] != d)
            throw shape_error("interleave: segment width " + shape_str(s.embeddings.shape) +
                              " does not match d_model " + std::to_string(d));
        total += s.embeddings.shape[0];
        if (s.kind != modality::text) total += 2;
        kinds.push_back(s.kind);
    }

    packed_sequence seq;
    seq.embeddings = tensor({total, d});
    int64_t pos = 0;
    for (const auto& e : sequence_layout(kinds)) {
        if (e.kind == layout_entry::sentinel) {
            std::memcpy(seq.embeddings.row(pos), sentinels.rows.row(e.sentinel_row),
                        static_cast<size_t>(d) * sizeof(float));
            ++pos;
            ++seq.sentinel_count;
        } else {
            const auto& s = segments[static_cast<size_t>(e.seg_index)];
            const int64_t len = s.embeddings.shape[0];
            seq.spans.push_back(modality_span{s.kind, pos, len, e.seg_index});
            std::memcpy(seq.embeddings.row(pos), s.embeddings.data.data(),
                        static_cast<size_t>(len * d) * sizeof(float));
            pos += len;
        }
    }
    return seq;
}

tensor extract_span(const packed_sequence& seq, const modality_span& span) {
    const int64_t d = seq.embeddings.shape[1];
    tensor out({span.length, d});
    for (int64_t r = 0; r < span.length; ++r)
        std::memcpy(out.row(r), seq.embeddings.row(span.start + r),
                    static_cast<size_t>(d) * sizeof(float));
    return out;
}

}  // namespace eagle
