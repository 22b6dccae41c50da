#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "cadenza/core/error.hpp"
#include "cadenza/image/raster.hpp"
#include "cadenza/midi/features.hpp"
#include "cadenza/midi/midi.hpp"
#include "cadenza/nn/graph.hpp"
#include "cadenza/nn/serialize.hpp"
#include "cadenza/nn/train.hpp"

namespace cadenza::mimo {

/// The four note features, in midi::FeatureRow order.
inline constexpr std::size_t kFeatureCount = 4;

inline const char* feature_name(std::size_t f) {
    switch (f) {
    case midi::kFeatOnsetDelta: return "onset";
    case midi::kFeatDuration: return "duration";
    case midi::kFeatPitch: return "pitch";
    case midi::kFeatVelocity: return "velocity";
    }
    return "?";
}

/// The six unordered feature pairs, one submodel each.
inline constexpr std::array<std::pair<std::size_t, std::size_t>, 6> kFeaturePairs = {{
    {0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3},
}};

struct MimoSpec {
    std::size_t sub_layers = 2;
    std::size_t sub_width = 32;
    std::size_t head_layers = 2;
    std::size_t head_width = 32;
    nn::Activation activation = nn::Activation::Tanh;
    std::array<double, 4> head_loss_weights = {1.0, 1.0, 1.0, 1.0};

    void validate() const {
        if (sub_layers < 1 || head_layers < 1)
            throw ConfigError("mimo: layer counts must be >= 1");
        if (sub_width < 1 || head_width < 1) throw ConfigError("mimo: widths must be >= 1");
        for (double w : head_loss_weights)
            if (!(w >= 0.0)) throw ConfigError("mimo: head loss weights must be >= 0");
    }
};

/// Built model plus the node ids needed for topology introspection.
struct MimoModel {
    nn::ModelGraph graph;
    MimoSpec spec;
    std::array<int, kFeatureCount> input_nodes{};
    std::array<int, 6> submodel_concats{};
    std::array<int, 6> submodel_outputs{};
    std::array<int, kFeatureCount> head_concats{};
    std::array<int, kFeatureCount> head_outputs{};
};

/// Four scalar inputs feed six pairwise submodels; each prediction head
/// concatenates the three submodels containing its feature and ends in a
/// scalar linear output.
inline MimoModel build_mimo(const MimoSpec& spec, std::uint64_t seed) {
    spec.validate();
    nn::GraphBuilder b;
    MimoModel m;
    m.spec = spec;

    for (std::size_t f = 0; f < kFeatureCount; ++f) m.input_nodes[f] = b.input(1);

    for (std::size_t s = 0; s < kFeaturePairs.size(); ++s) {
        const auto [fa, fb] = kFeaturePairs[s];
        const int merged = b.concat({m.input_nodes[fa], m.input_nodes[fb]});
        m.submodel_concats[s] = merged;
        int cur = merged;
        for (std::size_t l = 0; l < spec.sub_layers; ++l)
            cur = b.dense(cur, spec.sub_width, spec.activation);
        m.submodel_outputs[s] = cur;
    }

    std::vector<int> outputs;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        std::vector<int> feeds;
        for (std::size_t s = 0; s < kFeaturePairs.size(); ++s)
            if (kFeaturePairs[s].first == f || kFeaturePairs[s].second == f)
                feeds.push_back(m.submodel_outputs[s]);
        const int merged = b.concat(feeds);
        m.head_concats[f] = merged;
        int cur = merged;
        for (std::size_t l = 0; l < spec.head_layers; ++l)
            cur = b.dense(cur, spec.head_width, spec.activation);
        cur = b.dense(cur, 1, nn::Activation::Linear);
        m.head_outputs[f] = cur;
        outputs.push_back(cur);
    }

    m.graph = b.build(outputs, seed);
    return m;
}

/// Walk the actual graph edges and confirm the bipartite structure:
/// 6 pairwise submodels, each fed by exactly 2 feature inputs; 4 heads, each
/// fed by exactly the 3 submodels containing its feature.
inline void verify_topology(const MimoModel& m) {
    if (m.submodel_outputs.size() != 6) throw NumericError("mimo: expected 6 submodels");
    if (m.head_outputs.size() != 4) throw NumericError("mimo: expected 4 heads");

    std::array<int, kFeatureCount> feeds_count{};
    for (std::size_t s = 0; s < kFeaturePairs.size(); ++s) {
        const auto& merged = m.graph.nodes[std::size_t(m.submodel_concats[s])];
        if (merged.spec.kind != nn::LayerKind::Concat || merged.inputs.size() != 2)
            throw NumericError("mimo: submodel " + std::to_string(s) +
                               " is not fed by exactly 2 features");
        for (int in : merged.inputs) {
            bool matched = false;
            for (std::size_t f = 0; f < kFeatureCount; ++f)
                if (m.input_nodes[f] == in) {
                    ++feeds_count[f];
                    matched = true;
                }
            if (!matched)
                throw NumericError("mimo: submodel input is not a feature input node");
        }
    }
    for (std::size_t f = 0; f < kFeatureCount; ++f)
        if (feeds_count[f] != 3)
            throw NumericError(std::string("mimo: feature ") + feature_name(f) +
                               " feeds " + std::to_string(feeds_count[f]) +
                               " submodels, expected 3");

    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        const auto& merged = m.graph.nodes[std::size_t(m.head_concats[f])];
        if (merged.spec.kind != nn::LayerKind::Concat || merged.inputs.size() != 3)
            throw NumericError("mimo: head " + std::string(feature_name(f)) +
                               " is not fed by exactly 3 submodels");
        for (int in : merged.inputs) {
            bool found = false;
            for (std::size_t s = 0; s < kFeaturePairs.size(); ++s) {
                if (m.submodel_outputs[s] != in) continue;
                found = true;
                if (kFeaturePairs[s].first != f && kFeaturePairs[s].second != f)
                    throw NumericError("mimo: head " + std::string(feature_name(f)) +
                                       " consumes a submodel that does not contain its feature");
            }
            if (!found) throw NumericError("mimo: head input is not a submodel output");
        }
    }
}

struct TrainingPairs {
    std::vector<nn::Example> examples;
    midi::FeatureScalers scalers;
};

/// Consecutive-note pairs in normalized feature space: note t predicts note t+1.
inline TrainingPairs make_training_pairs(const midi::NoteDataset& dataset) {
    if (dataset.size() < 2)
        throw DataError("mimo: need at least 2 notes to form training pairs, got " +
                        std::to_string(dataset.size()));
    auto [matrix, scalers] = midi::normalize_features(dataset);
    TrainingPairs out;
    out.scalers = scalers;
    out.examples.reserve(matrix.rows.size() - 1);
    for (std::size_t i = 0; i + 1 < matrix.rows.size(); ++i) {
        nn::Example ex;
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            ex.inputs.push_back(Tensor::vec({matrix.rows[i][f]}));
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            ex.targets.push_back(Tensor::vec({matrix.rows[i + 1][f]}));
        out.examples.push_back(std::move(ex));
    }
    return out;
}

inline nn::TrainReport train_mimo(MimoModel& m, const TrainingPairs& pairs,
                                  const nn::TrainConfig& cfg) {
    std::vector<double> weights(m.spec.head_loss_weights.begin(),
                                m.spec.head_loss_weights.end());
    return nn::train(m.graph, pairs.examples, cfg, weights);
}

struct GenerationResult {
    midi::NoteDataset dataset;
    std::size_t clamp_events = 0;
};

/// Deterministic autoregressive rollout. Each prediction is denormalized,
/// clamped into the note invariants, appended with a strictly increasing
/// onset, then re-fed in normalized form.
inline GenerationResult generate_sequence(MimoModel& m, const midi::NoteEvent& seed_note,
                                          std::size_t length,
                                          const midi::FeatureScalers& scalers) {
    if (length < 1) throw ConfigError("mimo: rollout length must be >= 1");
    constexpr double kMinPositive = 1e-3; // floor for duration and inter-onset delta

    GenerationResult out;
    midi::FeatureRow raw{0.0, seed_note.duration, double(seed_note.pitch),
                         double(seed_note.velocity)};
    double onset = seed_note.onset;
    midi::FeatureRow current = scalers.normalize(raw);

    for (std::size_t i = 0; i < length; ++i) {
        std::vector<Tensor> inputs;
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            inputs.push_back(Tensor::vec({current[f]}));
        auto outs = nn::eval_graph(m.graph, inputs);
        midi::FeatureRow predicted;
        for (std::size_t f = 0; f < kFeatureCount; ++f) predicted[f] = outs[f].data[0];

        midi::FeatureRow denorm = scalers.invert(predicted);
        midi::FeatureRow clamped = denorm;
        clamped[midi::kFeatOnsetDelta] = std::max(kMinPositive, denorm[midi::kFeatOnsetDelta]);
        clamped[midi::kFeatDuration] = std::max(kMinPositive, denorm[midi::kFeatDuration]);
        clamped[midi::kFeatPitch] =
            std::clamp(std::round(denorm[midi::kFeatPitch]), 0.0, 127.0);
        clamped[midi::kFeatVelocity] =
            std::clamp(std::round(denorm[midi::kFeatVelocity]), 1.0, 127.0);
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            if (std::fabs(clamped[f] - denorm[f]) > 0.5) ++out.clamp_events;

        onset += clamped[midi::kFeatOnsetDelta];
        out.dataset.events.push_back({onset, clamped[midi::kFeatDuration],
                                      int(clamped[midi::kFeatPitch]),
                                      int(clamped[midi::kFeatVelocity])});
        out.dataset.source_labels.emplace_back("generated");
        current = scalers.normalize(clamped);
    }
    return out;
}

/// Piano roll raster: time on x, MIDI pitch on y (high pitches up), one
/// rectangle per note spanning onset to onset + duration.
inline image::Raster render_piano_roll(const midi::NoteDataset& dataset, std::size_t width_px,
                                       std::size_t height_px) {
    if (dataset.empty()) throw DataError("piano roll: empty dataset");
    if (width_px < 8 || height_px < 8) throw ConfigError("piano roll: canvas too small");
    image::Raster img(width_px, height_px, image::kWhite);
    const double end = dataset.end_time();
    const double span = end > 0.0 ? end : 1.0;
    const double row_h = double(height_px) / 128.0;
    for (const auto& e : dataset.events) {
        const long x0 = long(e.onset / span * double(width_px - 1));
        const long x1 = long((e.onset + e.duration) / span * double(width_px - 1));
        const long y = long(double(127 - e.pitch) * row_h);
        img.fill_rect(x0, y, std::max<long>(1, x1 - x0 + 1), std::max<long>(1, long(row_h)),
                      image::kBlack);
    }
    return img;
}

// --- persistence -------------------------------------------------------------

inline void attach_scalers(nn::ModelGraph& g, const midi::FeatureScalers& scalers) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%a %a %d", scalers.f[f].lo, scalers.f[f].hi,
                      scalers.f[f].zero_width ? 1 : 0);
        g.set_meta("scaler." + std::string(feature_name(f)), buf);
    }
}

inline midi::FeatureScalers read_scalers(const nn::ModelGraph& g) {
    midi::FeatureScalers s;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        const std::string* v = g.find_meta("scaler." + std::string(feature_name(f)));
        if (!v) throw ParseError("model file: missing scaler metadata");
        char* end = nullptr;
        s.f[f].lo = std::strtod(v->c_str(), &end);
        s.f[f].hi = std::strtod(end, &end);
        s.f[f].zero_width = std::strtol(end, &end, 10) != 0;
    }
    return s;
}

inline void save_mimo(const MimoModel& m, const midi::FeatureScalers& scalers,
                      const midi::NoteEvent& default_seed, const std::string& path) {
    nn::ModelGraph g = m.graph;
    g.set_meta("pipeline", "mimo");
    g.set_meta("mimo.sub_layers", std::to_string(m.spec.sub_layers));
    g.set_meta("mimo.sub_width", std::to_string(m.spec.sub_width));
    g.set_meta("mimo.head_layers", std::to_string(m.spec.head_layers));
    g.set_meta("mimo.head_width", std::to_string(m.spec.head_width));
    g.set_meta("mimo.activation", nn::to_string(m.spec.activation));
    char buf[160];
    std::snprintf(buf, sizeof buf, "%a %a %d %d", default_seed.onset, default_seed.duration,
                  default_seed.pitch, default_seed.velocity);
    g.set_meta("mimo.seed_note", buf);
    attach_scalers(g, scalers);
    nn::save_model(g, path);
}

struct LoadedMimo {
    MimoModel model;
    midi::FeatureScalers scalers;
    midi::NoteEvent default_seed;
};

inline LoadedMimo load_mimo(const std::string& path) {
    nn::ModelGraph g = nn::load_model(path);
    const std::string* pipeline = g.find_meta("pipeline");
    if (!pipeline || *pipeline != "mimo")
        throw ParseError("model file is not a next-note model: " + path);
    MimoSpec spec;
    spec.sub_layers = std::size_t(std::stoul(*g.find_meta("mimo.sub_layers")));
    spec.sub_width = std::size_t(std::stoul(*g.find_meta("mimo.sub_width")));
    spec.head_layers = std::size_t(std::stoul(*g.find_meta("mimo.head_layers")));
    spec.head_width = std::size_t(std::stoul(*g.find_meta("mimo.head_width")));
    spec.activation = nn::activation_from_string(*g.find_meta("mimo.activation"));

    LoadedMimo out;
    out.model = build_mimo(spec, g.rng_seed); // rebuild topology bookkeeping
    out.model.graph = std::move(g);           // adopt trained parameters
    out.scalers = read_scalers(out.model.graph);
    const std::string* seed = out.model.graph.find_meta("mimo.seed_note");
    if (seed) {
        char* end = nullptr;
        out.default_seed.onset = std::strtod(seed->c_str(), &end);
        out.default_seed.duration = std::strtod(end, &end);
        out.default_seed.pitch = int(std::strtol(end, &end, 10));
        out.default_seed.velocity = int(std::strtol(end, &end, 10));
    }
    return out;
}

} // namespace cadenza::mimo
