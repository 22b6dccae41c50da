#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cadenza/core/error.hpp"

namespace cadenza::audio {

/// Mono PCM samples in [-1,1] at a known sample rate.
struct AudioBuffer {
    std::vector<double> samples;
    double sample_rate = 44100.0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    double duration_seconds() const { return double(samples.size()) / sample_rate; }

    void validate() const {
        if (sample_rate <= 0.0) throw ConfigError("audio buffer: sample rate must be positive");
        for (double s : samples)
            if (!std::isfinite(s)) throw NumericError("audio buffer: non-finite sample");
    }
};

} // namespace cadenza::audio
