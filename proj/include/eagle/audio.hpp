#pragma once

// Log-mel frontend: 16 kHz mono in, [frames x n_mels] out.
// Window 400 samples (Hann), hop 160, FFT 512, 80 HTK-mel bins over 0..8 kHz.
// Frame t covers samples [160t, 160t+400) zero-padded at the tail, so the
// frame count is ceil(n_samples / 160) and the downstream token count
// collapses to ceil(n_samples / 5120) exactly.

#include <vector>

#include "eagle/tensor.hpp"

namespace eagle {

constexpr int k_mel_bins = 80;
constexpr int k_mel_hop = 160;
constexpr int k_mel_win = 400;
constexpr int k_mel_fft = 512;

tensor log_mel_spectrogram(const std::vector<float>& samples);

int64_t mel_frame_count(int64_t n_samples);

}  // namespace eagle
