#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "cadenza/audio/buffer.hpp"
#include "cadenza/core/error.hpp"
#include "cadenza/nn/graph.hpp"
#include "cadenza/nn/serialize.hpp"
#include "cadenza/nn/train.hpp"

namespace cadenza::grufx {

inline constexpr std::size_t kBaseWidth = 16;   // hidden units before the scaler
inline constexpr std::size_t kBpttSegment = 32; // truncated-backprop window

struct GruFxSpec {
    std::size_t layers = 4;
    std::size_t memory = 8; // input window length
    nn::Activation activation = nn::Activation::Tanh;
    std::size_t scaler = 2; // hidden width multiplier

    std::size_t hidden_width() const { return kBaseWidth * scaler; }

    void validate() const {
        if (layers < 1) throw ConfigError("gru fx: layers must be >= 1");
        if (memory < 1) throw ConfigError("gru fx: memory must be >= 1");
        if (scaler < 1) throw ConfigError("gru fx: scaler must be >= 1");
    }
};

struct FxModel {
    nn::ModelGraph graph;
    GruFxSpec spec;
};

/// Number of training windows a buffer yields: one per sample position with a
/// full memory window and a predecessor, i.e. length - memory.
inline std::size_t window_count(std::size_t length, std::size_t memory) {
    return length > memory ? length - memory : 0;
}

/// N-sample window -> L stacked GRU layers -> Dense(1) with the configured
/// activation.
inline FxModel build_gru_fx(const GruFxSpec& spec, std::uint64_t seed) {
    spec.validate();
    nn::GraphBuilder b;
    int cur = b.input(spec.memory);
    for (std::size_t l = 0; l < spec.layers; ++l) cur = b.gru(cur, spec.hidden_width());
    const int out = b.dense(cur, 1, spec.activation);
    FxModel m;
    m.graph = b.build({out}, seed);
    m.spec = spec;
    return m;
}

/// Pass-through reference: reads the newest ring sample, no recurrence.
/// Useful as the bypassed baseline when comparing spectra.
inline FxModel build_bypass_fx(std::size_t memory) {
    nn::GraphBuilder b;
    const int in = b.input(memory);
    const int out = b.dense(in, 1, nn::Activation::Linear);
    FxModel m;
    m.graph = b.build({out}, 0);
    m.spec.layers = 1;
    m.spec.memory = memory;
    m.spec.scaler = 1;
    m.spec.activation = nn::Activation::Linear;
    auto& dense = m.graph.nodes[1];
    for (double& w : dense.weights.data) w = 0.0;
    dense.weights.data.back() = 1.0; // select x_t
    return m;
}

/// Truncated backpropagation through time over fixed-length segments.
/// Training pairs are (window x_{t-N+1..t} -> target_t) for t in [N, len);
/// pass the input shifted by one as the target to get self-prediction.
inline nn::TrainReport train_fx(FxModel& m, const audio::AudioBuffer& input_audio,
                                const audio::AudioBuffer& target_audio,
                                const nn::TrainConfig& cfg) {
    cfg.validate();
    if (input_audio.size() != target_audio.size())
        throw DataError("fx training: input length " + std::to_string(input_audio.size()) +
                        " does not match target length " + std::to_string(target_audio.size()));
    const std::size_t n = m.spec.memory;
    if (input_audio.size() <= n)
        throw DataError("fx training: audio must be longer than the memory window");

    const std::size_t first_t = n;
    const std::size_t window_count = input_audio.size() - n;
    std::vector<std::size_t> segment_starts;
    for (std::size_t s = 0; s < window_count; s += kBpttSegment) segment_starts.push_back(s);

    nn::TrainReport report;
    report.per_output_loss.assign(1, {});
    if (cfg.epochs == 0) return report;

    Rng shuffle_rng(cfg.seed);
    nn::Optimizer opt(cfg.optimizer, cfg.learning_rate);
    auto params = m.graph.param_tensors();

    std::vector<double> window(n);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(segment_starts);
        double epoch_loss = 0.0;

        for (std::size_t start : segment_starts) {
            const std::size_t seg_len = std::min(kBpttSegment, window_count - start);
            nn::Tape tape;
            nn::GraphSession session(m.graph, tape);
            std::vector<int> losses;
            losses.reserve(seg_len);
            for (std::size_t k = 0; k < seg_len; ++k) {
                const std::size_t t = first_t + start + k;
                for (std::size_t j = 0; j < n; ++j)
                    window[j] = input_audio.samples[t - n + 1 + j];
                auto outs = session.step(std::vector<Tensor>{Tensor::vec(window)},
                                         nn::Mode::Train);
                losses.push_back(tape.mse(outs[0], Tensor::vec({target_audio.samples[t]})));
                epoch_loss += tape.value(losses.back()).data[0];
            }
            const std::vector<double> w(losses.size(), 1.0 / double(losses.size()));
            const int total = tape.scalar_sum(losses, w);
            tape.backward(total);
            nn::ParamGradients grads;
            session.accumulate_param_grads(grads);
            opt.step(params, grads);
        }
        report.epoch_loss.push_back(epoch_loss / double(window_count));
        report.per_output_loss[0].push_back(report.epoch_loss.back());
    }
    return report;
}

/// Streaming state: input ring, per-layer hidden states, and preallocated
/// scratch. After construction process_sample performs no heap allocation.
class StreamState {
public:
    explicit StreamState(const FxModel& m) : model_(&m) {
        const GruFxSpec& spec = m.spec;
        window_.assign(spec.memory, 0.0);
        const std::size_t w = spec.hidden_width();
        for (const auto& node : m.graph.nodes)
            if (node.spec.kind == nn::LayerKind::Gru) hidden_.emplace_back(w, 0.0);
        layer_in_.assign(std::max(spec.memory, w), 0.0);
        zx_.assign(w, 0.0);
        zh_.assign(w, 0.0);
        rx_.assign(w, 0.0);
        rh_.assign(w, 0.0);
        cx_.assign(w, 0.0);
        ch_.assign(w, 0.0);
        rgated_.assign(w, 0.0);
        hnew_.assign(w, 0.0);
    }

    std::size_t clipped_samples() const { return clipped_; }

    /// Push one input sample, run one forward pass, return one output sample
    /// clipped to [-1,1]. Constant work, no allocation.
    double process(double x) {
        const FxModel& m = *model_;
        const std::size_t n = window_.size();
        std::memmove(window_.data(), window_.data() + 1, (n - 1) * sizeof(double));
        window_[n - 1] = x;

        const double* in = window_.data();
        std::size_t in_len = n;
        std::size_t gru_idx = 0;
        double out_sample = 0.0;

        for (const auto& node : m.graph.nodes) {
            switch (node.spec.kind) {
            case nn::LayerKind::Input:
                break;
            case nn::LayerKind::Gru: {
                std::vector<double>& h = hidden_[gru_idx];
                const std::size_t w = h.size();
                affine(node.gru.wz, node.gru.bz, in, in_len, zx_.data());
                matvec(node.gru.uz, h.data(), zh_.data());
                affine(node.gru.wr, node.gru.br, in, in_len, rx_.data());
                matvec(node.gru.ur, h.data(), rh_.data());
                affine(node.gru.wh, node.gru.bh, in, in_len, cx_.data());
                for (std::size_t i = 0; i < w; ++i) {
                    const double r = nn::detail::sigmoid(rx_[i] + rh_[i]);
                    rgated_[i] = r * h[i];
                }
                matvec(node.gru.uh, rgated_.data(), ch_.data());
                for (std::size_t i = 0; i < w; ++i) {
                    const double z = nn::detail::sigmoid(zx_[i] + zh_[i]);
                    const double hcand = std::tanh(cx_[i] + ch_[i]);
                    hnew_[i] = z * h[i] + (1.0 - z) * hcand;
                }
                h.swap(hnew_);
                std::memcpy(layer_in_.data(), h.data(), w * sizeof(double));
                in = layer_in_.data();
                in_len = w;
                ++gru_idx;
                break;
            }
            case nn::LayerKind::Dense: {
                // the output head: width 1, same dot-product lanes as affine()
                const double acc =
                    nn::detail::dot(node.weights.data.data(), in, in_len) + node.bias.data[0];
                out_sample = nn::detail::apply_act(acc, node.spec.activation);
                break;
            }
            default:
                throw StateError("stream: unsupported layer kind in fx graph");
            }
        }
        if (out_sample < -1.0 || out_sample > 1.0) {
            ++clipped_;
            out_sample = std::clamp(out_sample, -1.0, 1.0);
        }
        return out_sample;
    }

private:
    static void affine(const Tensor& w, const Tensor& b, const double* x, std::size_t len,
                       double* out) {
        (void)len;
        nn::detail::affine(w, b, x, out);
    }
    static void matvec(const Tensor& w, const double* x, double* out) {
        nn::detail::matvec(w, x, out);
    }

    const FxModel* model_;
    std::vector<double> window_;
    std::vector<std::vector<double>> hidden_;
    std::vector<double> layer_in_;
    std::vector<double> zx_, zh_, rx_, rh_, cx_, ch_, rgated_, hnew_;
    std::size_t clipped_ = 0;
};

/// Offline reference rendering through the generic graph evaluator. Streaming
/// the same file sample by sample must match this bit for bit.
inline audio::AudioBuffer render_file(const FxModel& m, const audio::AudioBuffer& input) {
    const std::size_t n = m.spec.memory;
    audio::AudioBuffer out;
    out.sample_rate = input.sample_rate;
    out.samples.reserve(input.size());

    nn::HiddenState hidden = nn::make_hidden(m.graph);
    std::vector<double> window(n, 0.0);
    for (std::size_t t = 0; t < input.size(); ++t) {
        std::memmove(window.data(), window.data() + 1, (n - 1) * sizeof(double));
        window[n - 1] = input.samples[t];
        auto outs = nn::eval_graph(m.graph, std::vector<Tensor>{Tensor::vec(window)},
                                   nn::Mode::Infer, nullptr, &hidden);
        out.samples.push_back(std::clamp(outs[0].data[0], -1.0, 1.0));
    }
    return out;
}

struct ThroughputReport {
    std::size_t samples = 0;
    double elapsed_seconds = 0.0;
    double samples_per_second = 0.0;
    double realtime_factor = 0.0; // against the given sample rate
};

/// Stream a synthetic signal for the given duration and report throughput.
inline ThroughputReport benchmark_stream(const FxModel& m, double seconds, double sample_rate) {
    if (seconds <= 0.0) throw ConfigError("benchmark: duration must be > 0 seconds");
    if (sample_rate <= 0.0) throw ConfigError("benchmark: sample rate must be > 0");
    const auto total = std::size_t(seconds * sample_rate);
    StreamState state(m);
    volatile double sink = 0.0; // keep the loop honest
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < total; ++i) {
        const double x = 0.5 * std::sin(2.0 * M_PI * 220.0 * double(i) / sample_rate);
        sink = state.process(x);
    }
    const auto stop = std::chrono::steady_clock::now();
    (void)sink;
    ThroughputReport r;
    r.samples = total;
    r.elapsed_seconds = std::chrono::duration<double>(stop - start).count();
    r.samples_per_second = r.elapsed_seconds > 0.0 ? double(total) / r.elapsed_seconds : 0.0;
    r.realtime_factor = r.samples_per_second / sample_rate;
    return r;
}

// --- persistence -------------------------------------------------------------

inline void save_fx(const FxModel& m, double sample_rate, const std::string& path) {
    nn::ModelGraph g = m.graph;
    g.set_meta("pipeline", "grufx");
    g.set_meta("grufx.layers", std::to_string(m.spec.layers));
    g.set_meta("grufx.memory", std::to_string(m.spec.memory));
    g.set_meta("grufx.scaler", std::to_string(m.spec.scaler));
    g.set_meta("grufx.activation", nn::to_string(m.spec.activation));
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", sample_rate);
    g.set_meta("grufx.sample_rate", buf);
    nn::save_model(g, path);
}

struct LoadedFx {
    FxModel model;
    double sample_rate = 44100.0;
};

inline LoadedFx load_fx(const std::string& path) {
    nn::ModelGraph g = nn::load_model(path);
    const std::string* pipeline = g.find_meta("pipeline");
    if (!pipeline || *pipeline != "grufx")
        throw ParseError("model file is not a streaming fx model: " + path);
    LoadedFx out;
    out.model.spec.layers = std::size_t(std::stoul(*g.find_meta("grufx.layers")));
    out.model.spec.memory = std::size_t(std::stoul(*g.find_meta("grufx.memory")));
    out.model.spec.scaler = std::size_t(std::stoul(*g.find_meta("grufx.scaler")));
    out.model.spec.activation = nn::activation_from_string(*g.find_meta("grufx.activation"));
    out.sample_rate = std::strtod(g.find_meta("grufx.sample_rate")->c_str(), nullptr);
    out.model.graph = std::move(g);
    return out;
}

} // namespace cadenza::grufx
