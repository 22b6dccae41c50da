#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "cadenza/audio/buffer.hpp"
#include "cadenza/core/error.hpp"
#include "cadenza/core/tensor.hpp"

namespace cadenza::audio {

enum class Window { Hann, Rectangular };

enum class FrameKind { StftMagnitude, Mel, Mfcc };

struct SpectralFrame {
    std::vector<double> coefficients;
    FrameKind kind = FrameKind::StftMagnitude;
    std::size_t frame_size = 0;
    std::size_t hop_size = 0;
    double sample_rate = 44100.0;
};

/// Consecutive non-overlapping block pairs: block i is the input, block i+1
/// the target. A buffer of n samples yields floor(n / block_size) - 1 pairs.
inline std::vector<std::pair<std::vector<double>, std::vector<double>>>
frame_blocks(const AudioBuffer& buffer, std::size_t block_size) {
    if (block_size < 1) throw ConfigError("frame_blocks: block size must be >= 1");
    if (buffer.size() < 2 * block_size)
        throw DataError("frame_blocks: buffer of " + std::to_string(buffer.size()) +
                        " samples is too short for block size " + std::to_string(block_size));
    const std::size_t nblocks = buffer.size() / block_size;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
    pairs.reserve(nblocks - 1);
    for (std::size_t i = 0; i + 1 < nblocks; ++i) {
        const double* a = buffer.samples.data() + i * block_size;
        const double* b = a + block_size;
        pairs.emplace_back(std::vector<double>(a, a + block_size),
                           std::vector<double>(b, b + block_size));
    }
    return pairs;
}

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Iterative radix-2 FFT, in place.
inline void fft(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / double(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

inline std::vector<double> make_window(Window w, std::size_t n) {
    std::vector<double> out(n, 1.0);
    if (w == Window::Hann)
        for (std::size_t i = 0; i < n; ++i)
            out[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * double(i) / double(n)));
    return out;
}

} // namespace detail

/// Magnitude spectrum of one real frame (length must be a power of two).
inline std::vector<double> magnitude_spectrum(const std::vector<double>& frame) {
    if (!detail::is_pow2(frame.size()))
        throw ConfigError("magnitude_spectrum: frame size must be a power of two, got " +
                          std::to_string(frame.size()));
    std::vector<std::complex<double>> buf(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
    detail::fft(buf);
    std::vector<double> mag(frame.size() / 2 + 1);
    for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(buf[k]);
    return mag;
}

/// Short-time magnitude spectra. A signal shorter than one frame produces a
/// single zero-padded frame.
inline std::vector<SpectralFrame> stft_magnitude(const AudioBuffer& buffer,
                                                 std::size_t frame_size, std::size_t hop_size,
                                                 Window window = Window::Hann,
                                                 bool* padded = nullptr) {
    if (!detail::is_pow2(frame_size))
        throw ConfigError("stft: frame size must be a power of two, got " +
                          std::to_string(frame_size));
    if (hop_size < 1) throw ConfigError("stft: hop size must be >= 1");
    const std::vector<double> win = detail::make_window(window, frame_size);

    std::vector<SpectralFrame> out;
    auto emit = [&](std::size_t start, std::size_t avail) {
        std::vector<double> frame(frame_size, 0.0);
        for (std::size_t i = 0; i < avail; ++i)
            frame[i] = buffer.samples[start + i] * win[i];
        SpectralFrame f;
        f.coefficients = magnitude_spectrum(frame);
        f.kind = FrameKind::StftMagnitude;
        f.frame_size = frame_size;
        f.hop_size = hop_size;
        f.sample_rate = buffer.sample_rate;
        out.push_back(std::move(f));
    };

    if (padded) *padded = buffer.size() < frame_size;
    if (buffer.size() < frame_size) {
        emit(0, buffer.size()); // zero padded
        return out;
    }
    for (std::size_t start = 0; start + frame_size <= buffer.size(); start += hop_size)
        emit(start, frame_size);
    return out;
}

/// HTK-style mel scale.
inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular mel filterbank as a (n_mels x bins) matrix over the magnitude
/// spectrum bins of `frame_size` at `sample_rate`.
inline Tensor mel_filterbank(std::size_t n_mels, std::size_t frame_size, double sample_rate) {
    const std::size_t bins = frame_size / 2 + 1;
    const double mel_max = hz_to_mel(sample_rate / 2.0);
    std::vector<double> centers(n_mels + 2);
    for (std::size_t i = 0; i < centers.size(); ++i)
        centers[i] = mel_to_hz(mel_max * double(i) / double(n_mels + 1));

    Tensor fb = Tensor::matrix(n_mels, bins);
    for (std::size_t m = 0; m < n_mels; ++m) {
        const double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
        double sum = 0.0;
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = double(k) * sample_rate / double(frame_size);
            double w = 0.0;
            if (f > lo && f < mid) w = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi) w = (hi - f) / (hi - mid);
            fb.at(m, k) = w;
            sum += w;
        }
        // unit-sum filters: a flat spectrum maps to a constant mel vector
        if (sum > 0.0)
            for (std::size_t k = 0; k < bins; ++k) fb.at(m, k) /= sum;
    }
    return fb;
}

/// Orthonormal DCT-II matrix (n_coeffs x n_mels).
inline Tensor dct_matrix(std::size_t n_coeffs, std::size_t n_mels) {
    Tensor d = Tensor::matrix(n_coeffs, n_mels);
    for (std::size_t k = 0; k < n_coeffs; ++k) {
        const double s = (k == 0) ? std::sqrt(1.0 / double(n_mels)) : std::sqrt(2.0 / double(n_mels));
        for (std::size_t m = 0; m < n_mels; ++m)
            d.at(k, m) = s * std::cos(M_PI * double(k) * (double(m) + 0.5) / double(n_mels));
    }
    return d;
}

inline constexpr double kLogFloor = 1e-10;

/// Log-mel energies followed by DCT-II, first n_coeffs retained.
inline std::vector<SpectralFrame> mfcc(const std::vector<SpectralFrame>& frames,
                                       std::size_t n_mels, std::size_t n_coeffs) {
    if (n_coeffs > n_mels)
        throw ConfigError("mfcc: n_coeffs " + std::to_string(n_coeffs) + " exceeds n_mels " +
                          std::to_string(n_mels));
    if (frames.empty()) return {};
    for (const auto& f : frames)
        if (f.kind != FrameKind::StftMagnitude)
            throw ConfigError("mfcc: input frames must be STFT magnitude");

    const Tensor fb = mel_filterbank(n_mels, frames[0].frame_size, frames[0].sample_rate);
    const Tensor dct = dct_matrix(n_coeffs, n_mels);

    std::vector<SpectralFrame> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        std::vector<double> mel(n_mels, 0.0);
        for (std::size_t m = 0; m < n_mels; ++m) {
            double acc = 0.0;
            for (std::size_t k = 0; k < f.coefficients.size(); ++k)
                acc += fb.at(m, k) * f.coefficients[k];
            mel[m] = std::log(acc > kLogFloor ? acc : kLogFloor);
        }
        SpectralFrame o = f;
        o.kind = FrameKind::Mfcc;
        o.coefficients.assign(n_coeffs, 0.0);
        for (std::size_t c = 0; c < n_coeffs; ++c) {
            double acc = 0.0;
            for (std::size_t m = 0; m < n_mels; ++m) acc += dct.at(c, m) * mel[m];
            o.coefficients[c] = acc;
        }
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace cadenza::audio
