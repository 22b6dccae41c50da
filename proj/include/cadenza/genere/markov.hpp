#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cadenza/core/error.hpp"
#include "cadenza/core/rng.hpp"
#include "cadenza/core/tensor.hpp"
#include "cadenza/midi/midi.hpp"

namespace cadenza::genere {

// Rhythm classes as ratios of a quarter note, longest first:
// dotted whole, whole, dotted half, half, dotted quarter, quarter,
// dotted eighth, eighth, dotted sixteenth, sixteenth.
inline constexpr std::array<double, 10> kRhythmRatios = {6.0, 4.0,  3.0, 2.0,   1.5,
                                                         1.0, 0.75, 0.5, 0.375, 0.25};
inline constexpr std::size_t kPitchStates = 12;
inline constexpr std::size_t kOctaveStates = 11; // MIDI octaves 0..10

/// Row-stochastic transition matrices for the pitch-class, rhythm and octave
/// chains, plus their initial distributions.
struct TransitionTable {
    Tensor pitch = Tensor::zeros({kPitchStates, kPitchStates});
    Tensor rhythm = Tensor::zeros({kRhythmRatios.size(), kRhythmRatios.size()});
    Tensor octave = Tensor::zeros({kOctaveStates, kOctaveStates});
    Tensor pitch_init = Tensor::zeros({kPitchStates});
    Tensor rhythm_init = Tensor::zeros({kRhythmRatios.size()});
    Tensor octave_init = Tensor::zeros({kOctaveStates});
    double quarter_seconds = 0.5;

    void validate() const {
        auto check_rows = [](const Tensor& t, const char* what) {
            for (std::size_t r = 0; r < t.rows(); ++r) {
                double sum = 0.0;
                for (std::size_t c = 0; c < t.cols(); ++c) {
                    if (t.at(r, c) < 0.0)
                        throw NumericError(std::string(what) + ": negative probability");
                    sum += t.at(r, c);
                }
                if (std::fabs(sum - 1.0) > 1e-9)
                    throw NumericError(std::string(what) + " row " + std::to_string(r) +
                                       " sums to " + std::to_string(sum));
            }
        };
        check_rows(pitch, "pitch chain");
        check_rows(rhythm, "rhythm chain");
        check_rows(octave, "octave chain");
    }
};

inline std::size_t rhythm_class_of(double duration_seconds, double quarter_seconds) {
    const double ratio = duration_seconds / quarter_seconds;
    std::size_t best = 0;
    double best_dist = 1e300;
    for (std::size_t i = 0; i < kRhythmRatios.size(); ++i) {
        const double d = std::fabs(std::log(std::max(ratio, 1e-9)) - std::log(kRhythmRatios[i]));
        if (d < best_dist) {
            best_dist = d;
            best = i;
        }
    }
    return best;
}

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline void normalize_rows(Tensor& t) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < t.cols(); ++c) sum += t.at(r, c);
        if (sum <= 0.0) {
            for (std::size_t c = 0; c < t.cols(); ++c) t.at(r, c) = 1.0 / double(t.cols());
        } else {
            for (std::size_t c = 0; c < t.cols(); ++c) t.at(r, c) /= sum;
        }
    }
}

inline void normalize_vec(Tensor& t) {
    double sum = 0.0;
    for (double v : t.data) sum += v;
    if (sum <= 0.0)
        for (double& v : t.data) v = 1.0 / double(t.numel());
    else
        for (double& v : t.data) v /= sum;
}

} // namespace detail

/// Bigram counts over consecutive events for pitch class, quantized rhythm
/// class and octave; rows normalized, unseen rows uniform. The quarter-note
/// base is estimated from the median inter-onset interval.
inline TransitionTable learn_from_midi(const midi::NoteDataset& dataset) {
    if (dataset.size() < 2)
        throw DataError("markov: need at least 2 events, got " + std::to_string(dataset.size()));

    TransitionTable t;
    std::vector<double> iois;
    for (std::size_t i = 1; i < dataset.size(); ++i) {
        const double d = dataset.events[i].onset - dataset.events[i - 1].onset;
        if (d > 1e-9) iois.push_back(d);
    }
    double quarter = detail::median(iois);
    if (quarter <= 0.0) {
        std::vector<double> durs;
        for (const auto& e : dataset.events) durs.push_back(e.duration);
        quarter = detail::median(durs);
    }
    if (quarter <= 0.0) quarter = 0.5;
    t.quarter_seconds = quarter;

    auto states_of = [&](const midi::NoteEvent& e) {
        return std::tuple{std::size_t(e.pitch % 12), rhythm_class_of(e.duration, quarter),
                          std::size_t(e.pitch / 12)};
    };
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        auto [pc, rc, oc] = states_of(dataset.events[i]);
        t.pitch_init.data[pc] += 1.0;
        t.rhythm_init.data[rc] += 1.0;
        t.octave_init.data[oc] += 1.0;
        if (i + 1 < dataset.size()) {
            auto [pc2, rc2, oc2] = states_of(dataset.events[i + 1]);
            t.pitch.at(pc, pc2) += 1.0;
            t.rhythm.at(rc, rc2) += 1.0;
            t.octave.at(oc, oc2) += 1.0;
        }
    }
    detail::normalize_rows(t.pitch);
    detail::normalize_rows(t.rhythm);
    detail::normalize_rows(t.octave);
    detail::normalize_vec(t.pitch_init);
    detail::normalize_vec(t.rhythm_init);
    detail::normalize_vec(t.octave_init);
    t.validate();
    return t;
}

/// Walks the three chains. Initial states are drawn from the table's initial
/// distributions; every draw is deterministic under the seed.
class MarkovSampler {
public:
    MarkovSampler(const TransitionTable& table, std::uint64_t seed)
        : table_(&table), rng_(seed) {
        pitch_state_ = draw(table.pitch_init);
        rhythm_state_ = draw(table.rhythm_init);
        octave_state_ = draw(table.octave_init);
    }

    struct Event {
        std::size_t pitch_class;
        std::size_t rhythm_class;
        std::size_t octave;

        int midi_pitch() const {
            return std::clamp(int(octave) * 12 + int(pitch_class), 0, 127);
        }
        double duration_seconds(double quarter) const {
            return kRhythmRatios[rhythm_class] * quarter;
        }
    };

    /// Sample each chain's next state from its current row and advance.
    Event next() {
        pitch_state_ = draw_row(table_->pitch, pitch_state_);
        rhythm_state_ = draw_row(table_->rhythm, rhythm_state_);
        octave_state_ = draw_row(table_->octave, octave_state_);
        return {pitch_state_, rhythm_state_, octave_state_};
    }

private:
    std::size_t draw(const Tensor& dist) {
        const double u = rng_.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < dist.numel(); ++i) {
            acc += dist.data[i];
            if (u < acc) return i;
        }
        return dist.numel() - 1;
    }
    std::size_t draw_row(const Tensor& m, std::size_t row) {
        const double u = rng_.uniform();
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) {
            acc += m.at(row, c);
            if (u < acc) return c;
        }
        return m.cols() - 1;
    }

    const TransitionTable* table_;
    Rng rng_;
    std::size_t pitch_state_ = 0, rhythm_state_ = 0, octave_state_ = 0;
};

/// Plain-text matrix dump for inspection.
inline std::string serialize_table(const TransitionTable& t) {
    std::ostringstream os;
    auto dump = [&](const char* name, const Tensor& m) {
        os << name << " " << m.rows() << "x" << m.cols() << "\n";
        for (std::size_t r = 0; r < m.rows(); ++r) {
            for (std::size_t c = 0; c < m.cols(); ++c) {
                if (c) os << " ";
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.6f", m.at(r, c));
                os << buf;
            }
            os << "\n";
        }
    };
    os << "quarter_seconds " << t.quarter_seconds << "\n";
    dump("pitch", t.pitch);
    dump("rhythm", t.rhythm);
    dump("octave", t.octave);
    return os.str();
}

} // namespace cadenza::genere
