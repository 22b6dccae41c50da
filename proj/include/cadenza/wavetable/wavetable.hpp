#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cadenza/audio/dsp.hpp"
#include "cadenza/audio/wav.hpp"
#include "cadenza/core/error.hpp"
#include "cadenza/nn/graph.hpp"
#include "cadenza/nn/serialize.hpp"
#include "cadenza/nn/train.hpp"
#include "cadenza/sampler/preset.hpp"

namespace cadenza::wavetable {

/// One periodic cycle, bounded in [-1,1]. The endpoint discontinuity is
/// measured and reported rather than hidden.
struct Wavetable {
    std::vector<double> samples;

    std::size_t length() const { return samples.size(); }
    double endpoint_discontinuity() const {
        return samples.size() < 2 ? 0.0 : std::fabs(samples.front() - samples.back());
    }
};

enum class Feature { Stft, Mfcc };
enum class LossMode { Deployed, SpectralExperimental };

inline Feature feature_from_string(const std::string& s) {
    if (s == "stft") return Feature::Stft;
    if (s == "mfcc") return Feature::Mfcc;
    throw ConfigError("unknown feature '" + s + "' (expected stft|mfcc)");
}

inline LossMode loss_mode_from_string(const std::string& s) {
    if (s == "deployed") return LossMode::Deployed;
    if (s == "spectral") return LossMode::SpectralExperimental;
    throw ConfigError("unknown loss mode '" + s + "' (expected deployed|spectral)");
}

struct WavetableModelSpec {
    std::size_t layers = 2;
    std::size_t width = 64;
    std::size_t block_size = 1024; // generated table length
    Feature feature = Feature::Mfcc;
    LossMode loss_mode = LossMode::Deployed;
    // analysis parameters
    std::size_t frame_size = 1024;
    std::size_t hop_size = 256;
    std::size_t n_mels = 40;
    std::size_t n_coeffs = 13;
    std::size_t n_frames = 10; // frames flattened into the model input

    std::size_t coeff_dim() const {
        return feature == Feature::Mfcc ? n_coeffs : frame_size / 2 + 1;
    }
    std::size_t input_dim() const { return coeff_dim() * n_frames; }

    void validate() const {
        if (layers < 1 || width < 1) throw ConfigError("wavetable model: bad layer shape");
        if (block_size < 2) throw ConfigError("wavetable model: table length must be >= 2");
        if (n_coeffs > n_mels) throw ConfigError("wavetable model: n_coeffs exceeds n_mels");
        if (n_frames < 1) throw ConfigError("wavetable model: n_frames must be >= 1");
        if ((frame_size & (frame_size - 1)) != 0)
            throw ConfigError("wavetable model: frame size must be a power of two");
    }
};

struct WavetableModel {
    nn::ModelGraph graph;
    WavetableModelSpec spec;
};

/// Flattened feature stack -> dense layers -> tanh-bounded table.
inline WavetableModel build_wavetable_model(const WavetableModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    nn::GraphBuilder b;
    int cur = b.input(spec.input_dim());
    for (std::size_t l = 0; l < spec.layers; ++l)
        cur = b.dense(cur, spec.width, nn::Activation::Tanh);
    const int out = b.dense(cur, spec.block_size, nn::Activation::Tanh);
    WavetableModel m;
    m.graph = b.build({out}, seed);
    m.spec = spec;
    return m;
}

/// Feature matrix of the first n_frames analysis frames, flattened frame by
/// frame; missing trailing frames are zero.
inline Tensor extract_features(const audio::AudioBuffer& source, const WavetableModelSpec& spec) {
    if (source.size() < spec.frame_size)
        throw DataError("wavetable features: source of " + std::to_string(source.size()) +
                        " samples is shorter than one analysis frame (" +
                        std::to_string(spec.frame_size) + ")");
    auto frames = audio::stft_magnitude(source, spec.frame_size, spec.hop_size);
    if (spec.feature == Feature::Mfcc) frames = audio::mfcc(frames, spec.n_mels, spec.n_coeffs);

    Tensor out = Tensor::zeros({spec.input_dim()});
    const std::size_t dim = spec.coeff_dim();
    for (std::size_t f = 0; f < spec.n_frames && f < frames.size(); ++f)
        for (std::size_t c = 0; c < dim; ++c) out.data[f * dim + c] = frames[f].coefficients[c];
    return out;
}

/// Regression target for deployed-mode training: the block_size window with
/// the highest energy, peak-normalized. Returns empty when the file is silent.
inline std::vector<double> extract_target_cycle(const audio::AudioBuffer& source,
                                                std::size_t block_size) {
    if (source.size() < block_size) return {};
    // prefix sums of x^2 locate the peak-energy window in one pass
    std::vector<double> prefix(source.size() + 1, 0.0);
    for (std::size_t i = 0; i < source.size(); ++i)
        prefix[i + 1] = prefix[i] + source.samples[i] * source.samples[i];
    std::size_t best = 0;
    double best_energy = -1.0;
    for (std::size_t start = 0; start + block_size <= source.size(); ++start) {
        const double e = prefix[start + block_size] - prefix[start];
        if (e > best_energy) {
            best_energy = e;
            best = start;
        }
    }
    std::vector<double> cycle(source.samples.begin() + long(best),
                              source.samples.begin() + long(best + block_size));
    double peak = 0.0;
    for (double v : cycle) peak = std::max(peak, std::fabs(v));
    if (peak == 0.0) return {};
    for (double& v : cycle) v /= peak;
    return cycle;
}

/// Sample-domain supervision: features of each file regress onto its
/// peak-energy cycle. Files too short for a frame or a cycle are skipped.
inline nn::TrainReport train_deployed(WavetableModel& m,
                                      const std::vector<audio::AudioBuffer>& corpus,
                                      const nn::TrainConfig& cfg, std::size_t* skipped = nullptr) {
    if (corpus.empty()) throw DataError("wavetable training: empty corpus");
    std::vector<nn::Example> examples;
    std::size_t skip_count = 0;
    for (const auto& buf : corpus) {
        if (buf.size() < std::max(m.spec.frame_size, m.spec.block_size)) {
            ++skip_count;
            continue;
        }
        auto cycle = extract_target_cycle(buf, m.spec.block_size);
        if (cycle.empty()) {
            ++skip_count;
            continue;
        }
        nn::Example ex;
        ex.inputs.push_back(extract_features(buf, m.spec));
        ex.targets.push_back(Tensor::vec(std::move(cycle)));
        examples.push_back(std::move(ex));
    }
    if (skipped) *skipped = skip_count;
    if (examples.empty())
        throw DataError("wavetable training: every corpus file was skipped (too short or silent)");
    return nn::train(m.graph, examples, cfg);
}

/// Differentiable feature transform of a generated table: tile to one
/// analysis frame, window, magnitude spectrum, then optionally the
/// log-mel/DCT chain. Returns the tape slot of the feature vector.
inline int spectral_feature_chain(nn::Tape& tape, int table_slot,
                                  const WavetableModelSpec& spec, double sample_rate) {
    const std::size_t frame = spec.frame_size;
    int cur = tape.tile(table_slot, frame);
    Tensor window = Tensor::zeros({frame});
    for (std::size_t i = 0; i < frame; ++i)
        window.data[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * double(i) / double(frame)));
    cur = tape.mul_const(cur, std::move(window));
    cur = tape.dft_magnitude(cur);
    if (spec.feature == Feature::Mfcc) {
        cur = tape.matvec_const(audio::mel_filterbank(spec.n_mels, frame, sample_rate), cur);
        cur = tape.log_floor(cur, audio::kLogFloor);
        cur = tape.matvec_const(audio::dct_matrix(spec.n_coeffs, spec.n_mels), cur);
    }
    return cur;
}

/// The source side of the spectral loss: its average feature frame.
inline Tensor target_feature_frame(const audio::AudioBuffer& source,
                                   const WavetableModelSpec& spec) {
    auto frames = audio::stft_magnitude(source, spec.frame_size, spec.hop_size);
    if (spec.feature == Feature::Mfcc) frames = audio::mfcc(frames, spec.n_mels, spec.n_coeffs);
    Tensor avg = Tensor::zeros({spec.coeff_dim()});
    for (const auto& f : frames)
        for (std::size_t c = 0; c < avg.numel(); ++c) avg.data[c] += f.coefficients[c];
    for (double& v : avg.data) v /= double(frames.size());
    return avg;
}

inline constexpr double kSpectralClipNorm = 1.0;
inline constexpr double kSpectralAbortLoss = 1e6;

/// Experimental mode: mean squared difference between the feature transform
/// of the generated table and the source's average feature frame. Divergence
/// aborts in a controlled way, restoring the last epoch's parameters.
inline nn::TrainReport train_spectral(WavetableModel& m,
                                      const std::vector<audio::AudioBuffer>& corpus,
                                      const nn::TrainConfig& cfg, std::size_t* skipped = nullptr) {
    cfg.validate();
    if (m.spec.loss_mode != LossMode::SpectralExperimental)
        throw ConfigError("train_spectral: model spec is not in spectral loss mode");
    if (corpus.empty()) throw DataError("wavetable training: empty corpus");

    struct Item {
        Tensor features, target;
    };
    std::vector<Item> items;
    std::size_t skip_count = 0;
    double sample_rate = 44100.0;
    for (const auto& buf : corpus) {
        if (buf.size() < m.spec.frame_size) {
            ++skip_count;
            continue;
        }
        sample_rate = buf.sample_rate;
        items.push_back({extract_features(buf, m.spec), target_feature_frame(buf, m.spec)});
    }
    if (skipped) *skipped = skip_count;
    if (items.empty()) throw DataError("wavetable training: every corpus file was skipped");

    nn::TrainReport report;
    report.per_output_loss.assign(1, {});
    if (cfg.epochs == 0) return report;

    Rng shuffle_rng(cfg.seed);
    nn::Optimizer opt(cfg.optimizer, cfg.learning_rate);
    auto params = m.graph.param_tensors();
    std::vector<Tensor> checkpoint;
    for (auto* p : params) checkpoint.push_back(*p);

    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    auto restore = [&]() {
        for (std::size_t i = 0; i < params.size(); ++i) *params[i] = checkpoint[i];
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t idx : order) {
            const Item& item = items[idx];
            nn::Tape tape;
            nn::GraphSession session(m.graph, tape);
            auto outs = session.step(std::vector<Tensor>{item.features}, nn::Mode::Train);
            const int feat = spectral_feature_chain(tape, outs[0], m.spec, sample_rate);
            const int loss = tape.mse(feat, item.target);
            const double loss_v = tape.value(loss).data[0];
            if (!std::isfinite(loss_v) || loss_v > kSpectralAbortLoss) {
                restore();
                report.aborted = true;
                report.abort_reason = "spectral loss diverged (loss = " +
                                      std::to_string(loss_v) + "); parameters restored";
                return report;
            }
            epoch_loss += loss_v;
            tape.backward(loss);
            nn::ParamGradients grads;
            session.accumulate_param_grads(grads);
            bool finite = true;
            for (const auto& g : grads)
                if (!g.all_finite()) finite = false;
            if (!finite) {
                restore();
                report.aborted = true;
                report.abort_reason = "non-finite gradients; parameters restored";
                return report;
            }
            const double norm = nn::grad_norm(grads);
            if (norm > kSpectralClipNorm) {
                nn::scale_grads(grads, kSpectralClipNorm / norm);
                ++report.clipped_updates;
            }
            opt.step(params, grads);
        }
        report.epoch_loss.push_back(epoch_loss / double(items.size()));
        report.per_output_loss[0].push_back(report.epoch_loss.back());
        for (std::size_t i = 0; i < params.size(); ++i) checkpoint[i] = *params[i];
    }
    return report;
}

/// One forward pass from a source file to a bounded table.
inline Wavetable generate_wavetable(const WavetableModel& m, const audio::AudioBuffer& source) {
    Tensor features = extract_features(source, m.spec);
    auto outs = nn::eval_graph(m.graph, std::vector<Tensor>{features});
    Wavetable t;
    t.samples = std::move(outs[0].data);
    return t;
}

/// Write the cycle as a WAV with loop points spanning the whole table, plus a
/// one-zone preset that loops it.
inline sampler::SamplerInstrumentSpec export_wavetable_instrument(const Wavetable& table,
                                                                  const std::string& out_dir,
                                                                  const sampler::Envelope& adsr,
                                                                  const std::string& name,
                                                                  double sample_rate = 44100.0) {
    if (table.length() < 2) throw ConfigError("wavetable export: table too short");
    std::filesystem::create_directories(out_dir);
    audio::AudioBuffer buf;
    buf.sample_rate = sample_rate;
    buf.samples = table.samples;
    const std::string wav_name = name + ".wav";
    audio::write_wav_file(buf, (std::filesystem::path(out_dir) / wav_name).string(), 16,
                          audio::LoopPoints{0, std::uint32_t(table.length() - 1)});

    sampler::SamplerInstrumentSpec spec;
    spec.name = name;
    spec.envelope = adsr;
    spec.entries = sampler::map_samples({wav_name}, sampler::MapStrategy::EvenSplit);
    spec.entries[0].loop_enabled = true;
    spec.entries[0].loop_start = 0;
    spec.entries[0].loop_end = std::uint32_t(table.length() - 1);
    sampler::write_preset_file(spec,
                               (std::filesystem::path(out_dir) / (name + ".dspreset")).string());
    return spec;
}

// --- persistence -------------------------------------------------------------

inline void save_wavetable_model(const WavetableModel& m, const std::string& path) {
    nn::ModelGraph g = m.graph;
    g.set_meta("pipeline", "wavetable");
    g.set_meta("wt.layers", std::to_string(m.spec.layers));
    g.set_meta("wt.width", std::to_string(m.spec.width));
    g.set_meta("wt.block_size", std::to_string(m.spec.block_size));
    g.set_meta("wt.feature", m.spec.feature == Feature::Mfcc ? "mfcc" : "stft");
    g.set_meta("wt.loss_mode",
               m.spec.loss_mode == LossMode::Deployed ? "deployed" : "spectral");
    g.set_meta("wt.frame_size", std::to_string(m.spec.frame_size));
    g.set_meta("wt.hop_size", std::to_string(m.spec.hop_size));
    g.set_meta("wt.n_mels", std::to_string(m.spec.n_mels));
    g.set_meta("wt.n_coeffs", std::to_string(m.spec.n_coeffs));
    g.set_meta("wt.n_frames", std::to_string(m.spec.n_frames));
    nn::save_model(g, path);
}

inline WavetableModel load_wavetable_model(const std::string& path) {
    nn::ModelGraph g = nn::load_model(path);
    const std::string* pipeline = g.find_meta("pipeline");
    if (!pipeline || *pipeline != "wavetable")
        throw ParseError("model file is not a wavetable model: " + path);
    WavetableModel m;
    m.spec.layers = std::size_t(std::stoul(*g.find_meta("wt.layers")));
    m.spec.width = std::size_t(std::stoul(*g.find_meta("wt.width")));
    m.spec.block_size = std::size_t(std::stoul(*g.find_meta("wt.block_size")));
    m.spec.feature = feature_from_string(*g.find_meta("wt.feature"));
    m.spec.loss_mode = loss_mode_from_string(*g.find_meta("wt.loss_mode"));
    m.spec.frame_size = std::size_t(std::stoul(*g.find_meta("wt.frame_size")));
    m.spec.hop_size = std::size_t(std::stoul(*g.find_meta("wt.hop_size")));
    m.spec.n_mels = std::size_t(std::stoul(*g.find_meta("wt.n_mels")));
    m.spec.n_coeffs = std::size_t(std::stoul(*g.find_meta("wt.n_coeffs")));
    m.spec.n_frames = std::size_t(std::stoul(*g.find_meta("wt.n_frames")));
    m.graph = std::move(g);
    return m;
}

} // namespace cadenza::wavetable
