#include "eagle/audio.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "eagle/packing.hpp"

namespace eagle {

namespace {

constexpr double k_pi = 3.14159265358979323846;

// iterative radix-2 complex FFT, in place
void fft512(std::vector<double>& re, std::vector<double>& im) {
    const int n = k_mel_fft;
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * k_pi / len;
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (int i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (int j = 0; j < len / 2; ++j) {
                const double ur = re[i + j], ui = im[i + j];
                const double vr = re[i + j + len / 2] * cr - im[i + j + len / 2] * ci;
                const double vi = re[i + j + len / 2] * ci + im[i + j + len / 2] * cr;
                re[i + j] = ur + vr;
                im[i + j] = ui + vi;
                re[i + j + len / 2] = ur - vr;
                im[i + j + len / 2] = ui - vi;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// triangular filterbank [n_mels x (fft/2+1)], built once
const std::vector<float>& mel_filterbank() {
    static const std::vector<float> bank = [] {
        const int n_bins = k_mel_fft / 2 + 1;
        std::vector<float> fb(static_cast<size_t>(k_mel_bins) * n_bins, 0.0f);
        const double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(8000.0);
        std::vector<double> centers(k_mel_bins + 2);
        for (int i = 0; i < k_mel_bins + 2; ++i)
            centers[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (k_mel_bins + 1));
        const double bin_hz = static_cast<double>(k_audio_sample_rate) / k_mel_fft;
        for (int m = 0; m < k_mel_bins; ++m) {
            const double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
            for (int k = 0; k < n_bins; ++k) {
                const double f = k * bin_hz;
                double v = 0.0;
                if (f > lo && f < hi) v = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
                fb[static_cast<size_t>(m) * n_bins + k] = static_cast<float>(v);
            }
        }
        return fb;
    }();
    return bank;
}

}  // namespace

int64_t mel_frame_count(int64_t n_samples) { return (n_samples + k_mel_hop - 1) / k_mel_hop; }

tensor log_mel_spectrogram(const std::vector<float>& samples) {
    if (samples.empty()) throw std::invalid_argument("log_mel_spectrogram: empty waveform");
    const int64_t frames = mel_frame_count(static_cast<int64_t>(samples.size()));
    const int n_bins = k_mel_fft / 2 + 1;
    const auto& fb = mel_filterbank();

    static const std::vector<double> hann = [] {
        std::vector<double> w(k_mel_win);
        for (int i = 0; i < k_mel_win; ++i)
            w[i] = 0.5 - 0.5 * std::cos(2.0 * k_pi * i / k_mel_win);
        return w;
    }();

    tensor mel({frames, k_mel_bins});
#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < frames; ++t) {
        std::vector<double> re(k_mel_fft, 0.0), im(k_mel_fft, 0.0);
        const int64_t off = t * k_mel_hop;
        for (int i = 0; i < k_mel_win; ++i) {
            const int64_t s = off + i;
            if (s < static_cast<int64_t>(samples.size())) re[i] = samples[s] * hann[i];
        }
        fft512(re, im);
        float* out = mel.row(t);
        for (int m = 0; m < k_mel_bins; ++m) {
            double acc = 0.0;
            const float* w = &fb[static_cast<size_t>(m) * n_bins];
            for (int k = 0; k < n_bins; ++k) {
                const double p = re[k] * re[k] + im[k] * im[k];
                acc += w[k] * p;
            }
            // log floor keeps silence finite
            out[m] = static_cast<float>(std::log10(std::max(acc, 1e-10)));
        }
    }
    // whisper-style dynamic range compression
    float mx = mel.data[0];
    for (float v : mel.data) mx = std::max(mx, v);
    for (float& v : mel.data) v = (std::max(v, mx - 8.0f) + 4.0f) * 0.25f;
    return mel;
}

}  // namespace eagle
