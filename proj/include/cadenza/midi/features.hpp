#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "cadenza/core/error.hpp"
#include "cadenza/midi/midi.hpp"

namespace cadenza::midi {

// Note feature order used throughout the next-note pipeline.
inline constexpr std::size_t kFeatOnsetDelta = 0;
inline constexpr std::size_t kFeatDuration = 1;
inline constexpr std::size_t kFeatPitch = 2;
inline constexpr std::size_t kFeatVelocity = 3;
inline constexpr std::size_t kNoteFeatures = 4;

using FeatureRow = std::array<double, kNoteFeatures>;

/// Min-max scaler for one feature column. A constant column maps to 0.5 and
/// is flagged zero-width; inversion then returns the constant.
struct FeatureScaler {
    double lo = 0.0;
    double hi = 1.0;
    bool zero_width = false;

    double normalize(double x) const {
        if (zero_width) return 0.5;
        return (x - lo) / (hi - lo);
    }
    double invert(double y) const {
        if (zero_width) return lo;
        return lo + y * (hi - lo);
    }
};

struct FeatureScalers {
    std::array<FeatureScaler, kNoteFeatures> f;

    FeatureRow normalize(const FeatureRow& raw) const {
        FeatureRow out;
        for (std::size_t i = 0; i < kNoteFeatures; ++i) out[i] = f[i].normalize(raw[i]);
        return out;
    }
    FeatureRow invert(const FeatureRow& scaled) const {
        FeatureRow out;
        for (std::size_t i = 0; i < kNoteFeatures; ++i) out[i] = f[i].invert(scaled[i]);
        return out;
    }
};

struct FeatureMatrix {
    std::vector<FeatureRow> rows;
};

/// Raw (unscaled) feature rows. Onset is converted to inter-onset interval
/// (delta to the previous note, 0 for the first) so generated sequences can
/// stay monotone by construction; absolute onsets remain in the dataset.
inline FeatureMatrix raw_features(const NoteDataset& dataset) {
    if (dataset.empty()) throw DataError("features: empty dataset");
    FeatureMatrix m;
    m.rows.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const NoteEvent& e = dataset.events[i];
        FeatureRow r;
        r[kFeatOnsetDelta] = (i == 0) ? 0.0 : e.onset - dataset.events[i - 1].onset;
        r[kFeatDuration] = e.duration;
        r[kFeatPitch] = double(e.pitch);
        r[kFeatVelocity] = double(e.velocity);
        m.rows.push_back(r);
    }
    return m;
}

/// Per-feature min-max scaling to [0,1] with exact inversion.
inline std::pair<FeatureMatrix, FeatureScalers> normalize_features(const NoteDataset& dataset) {
    FeatureMatrix raw = raw_features(dataset);
    FeatureScalers scalers;
    for (std::size_t k = 0; k < kNoteFeatures; ++k) {
        double lo = raw.rows[0][k], hi = raw.rows[0][k];
        for (const auto& r : raw.rows) {
            lo = std::min(lo, r[k]);
            hi = std::max(hi, r[k]);
        }
        scalers.f[k].lo = lo;
        scalers.f[k].hi = hi;
        scalers.f[k].zero_width = (hi - lo) < 1e-12;
    }
    FeatureMatrix out;
    out.rows.reserve(raw.rows.size());
    for (const auto& r : raw.rows) out.rows.push_back(scalers.normalize(r));
    return {std::move(out), scalers};
}

} // namespace cadenza::midi
