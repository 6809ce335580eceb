#include <cmath>

#include "doctest.h"
#include "eagle/audio.hpp"
#include "eagle/packing.hpp"

using namespace eagle;

TEST_CASE("mel frame count follows the hop") {
    CHECK(mel_frame_count(160) == 1);
    CHECK(mel_frame_count(161) == 2);
    CHECK(mel_frame_count(16000) == 100);
    // nested ceilings collapse: ceil(ceil(ceil(n/160)/2)/16) == ceil(n/5120)
    for (int64_t n : {1, 159, 5120, 5121, 16000, 47999, 48000}) {
        const int64_t frames = mel_frame_count(n);
        const int64_t after_conv = (frames + 1) / 2;
        const int64_t after_pool = (after_conv + 15) / 16;
        CHECK(after_pool == audio_token_count_samples(n));
    }
}

TEST_CASE("silence produces finite log-mel output") {
    const std::vector<float> silence(16000, 0.0f);
    const tensor mel = log_mel_spectrogram(silence);
    CHECK(mel.shape[0] == 100);
    CHECK(mel.shape[1] == k_mel_bins);
    CHECK(all_finite(mel));
    CHECK_THROWS_AS(log_mel_spectrogram({}), std::invalid_argument);
}

TEST_CASE("a pure tone concentrates mel energy near its frequency") {
    std::vector<float> wave(16000);
    const double f = 1000.0;
    for (size_t i = 0; i < wave.size(); ++i)
        wave[i] = 0.5f * static_cast<float>(std::sin(2.0 * 3.14159265358979 * f * i / 16000.0));
    const tensor mel = log_mel_spectrogram(wave);
    // find the hottest mel bin of a middle frame, then check that the same
    // tone always lands in that bin while a different tone does not
    const int64_t frame = mel.shape[0] / 2;
    int hot = 0;
    for (int m = 1; m < k_mel_bins; ++m)
        if (mel.data[frame * k_mel_bins + m] > mel.data[frame * k_mel_bins + hot]) hot = m;

    std::vector<float> wave2(16000);
    for (size_t i = 0; i < wave2.size(); ++i)
        wave2[i] = 0.5f * static_cast<float>(std::sin(2.0 * 3.14159265358979 * 2500.0 * i / 16000.0));
    const tensor mel2 = log_mel_spectrogram(wave2);
    int hot2 = 0;
    for (int m = 1; m < k_mel_bins; ++m)
        if (mel2.data[frame * k_mel_bins + m] > mel2.data[frame * k_mel_bins + hot2]) hot2 = m;
    CHECK(hot2 > hot); // higher frequency lands in a higher mel bin
}
