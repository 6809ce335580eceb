#include "eagle/prep.hpp"

#include <stdexcept>

#include "eagle/errors.hpp"

namespace eagle {

tensor patchify_block(const image_u8& block, int patch_px) {
    if (block.h != k_block_px || block.w != k_block_px)
        throw std::invalid_argument("patchify_block: block must be " + std::to_string(k_block_px) +
                                    "x" + std::to_string(k_block_px) + ", got " +
                                    std::to_string(block.h) + "x" + std::to_string(block.w));
    const int grid = k_block_px / patch_px;
    const int64_t patch_dim = static_cast<int64_t>(patch_px) * patch_px * 3;
    tensor out({static_cast<int64_t>(grid) * grid, patch_dim});
    for (int py = 0; py < grid; ++py)
        for (int px = 0; px < grid; ++px) {
            float* row = out.row(static_cast<int64_t>(py) * grid + px);
            int64_t k = 0;
            for (int y = 0; y < patch_px; ++y)
                for (int x = 0; x < patch_px; ++x) {
                    const uint8_t* p = block.px(py * patch_px + y, px * patch_px + x);
                    for (int c = 0; c < 3; ++c) row[k++] = static_cast<float>(p[c]) / 127.5f - 1.0f;
                }
        }
    return out;
}

std::vector<tensor> prepare_image(const image_u8& img, const eagle_config& cfg) {
    const crop_grid grid = plan_crops(img.h, img.w);
    std::vector<tensor> blocks;
    blocks.reserve(grid.crops.size());
    for (const auto& rect : grid.crops)
        blocks.push_back(patchify_block(extract_block(img, rect), cfg.vision_patch_px));
    return blocks;
}

prepared_sample prepare_sample(const sample& s, const eagle_config& cfg, bool with_answer) {
    bool has_text_or_audio = false;
    for (const auto& seg : s.segments)
        if (seg.kind != modality::image) has_text_or_audio = true;
    if (!has_text_or_audio)
        throw unsupported_input_error(
            "image-only input is not supported: the model requires at least a text or audio input");

    prepared_sample ps;
    for (const auto& seg : s.segments) {
        prepared_segment p;
        p.kind = seg.kind;
        switch (seg.kind) {
            case modality::text:
                if (seg.tokens.empty()) throw std::invalid_argument("prepare_sample: empty text segment");
                p.tokens = seg.tokens;
                p.rows = static_cast<int64_t>(seg.tokens.size());
                break;
            case modality::image:
                p.blocks = prepare_image(seg.img, cfg);
                p.rows = static_cast<int64_t>(p.blocks.size()) * cfg.queries_per_block;
                break;
            case modality::audio:
                p.mel = log_mel_spectrogram(seg.audio);
                p.rows = audio_token_count_samples(static_cast<int64_t>(seg.audio.size()),
                                                   cfg.audio_samples_per_token());
                break;
        }
        ps.segments.push_back(std::move(p));
        ps.kinds.push_back(seg.kind);
    }

    // trailing text segment: answer marker, then the answer when teacher
    // forcing
    prepared_segment tail;
    tail.kind = modality::text;
    tail.tokens = {tok_ans};
    if (with_answer) {
        tail.tokens.insert(tail.tokens.end(), s.target.begin(), s.target.end());
        tail.tokens.push_back(tok_eos);
    }
    tail.rows = static_cast<int64_t>(tail.tokens.size());
    ps.segments.push_back(std::move(tail));
    ps.kinds.push_back(modality::text);

    int64_t pos = 0;
    for (const auto& e : sequence_layout(ps.kinds)) {
        if (e.kind == layout_entry::sentinel) {
            ++pos;
        } else {
            if (static_cast<size_t>(e.seg_index) == ps.segments.size() - 1) ps.ans_pos = pos;
            pos += ps.segments[static_cast<size_t>(e.seg_index)].rows;
        }
    }
    ps.total_len = pos;
    if (ps.total_len > cfg.max_seq_len)
        throw std::invalid_argument("prepare_sample: sequence length " +
                                    std::to_string(ps.total_len) + " exceeds max_seq_len " +
                                    std::to_string(cfg.max_seq_len));

    ps.answer = s.target;
    ps.answer.push_back(tok_eos);
    ps.targets.assign(static_cast<size_t>(ps.total_len), 0);
    ps.mask.assign(static_cast<size_t>(ps.total_len), 0);
    if (with_answer) {
        for (size_t i = 0; i < ps.answer.size(); ++i) {
            const int64_t row = ps.ans_pos + static_cast<int64_t>(i);
            ps.targets[static_cast<size_t>(row)] = ps.answer[i];
            ps.mask[static_cast<size_t>(row)] = 1;
        }
    }
    return ps;
}

}  // namespace eagle
