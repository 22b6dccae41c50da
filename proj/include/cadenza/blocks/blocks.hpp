#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
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

namespace cadenza::blocks {

struct BlockModelSpec {
    std::size_t layers = 2;
    std::size_t width = 32;
    std::size_t block_size = 10;
    nn::Activation activation = nn::Activation::Tanh;        // hidden layers
    nn::Activation output_activation = nn::Activation::Tanh; // keeps samples bounded
    double drop_rate = 0.5;

    void validate() const {
        if (layers < 1) throw ConfigError("block model: layers must be >= 1");
        if (width < 1) throw ConfigError("block model: width must be >= 1");
        if (block_size < 1) throw ConfigError("block model: block size must be >= 1");
        if (drop_rate < 0.0 || drop_rate >= 1.0)
            throw ConfigError("block model: drop rate must be in [0,1)");
    }
};

struct BlockModel {
    nn::ModelGraph graph;
    BlockModelSpec spec;
};

/// Labeled audio corpora sharing one sample rate.
struct DatasetMixture {
    struct Source {
        std::string label;
        std::vector<audio::AudioBuffer> buffers;
    };
    std::vector<Source> sources;

    double sample_rate() const {
        for (const auto& s : sources)
            for (const auto& b : s.buffers) return b.sample_rate;
        throw DataError("dataset mixture is empty");
    }

    void validate() const {
        const double rate = sample_rate();
        for (const auto& s : sources)
            for (const auto& b : s.buffers)
                if (b.sample_rate != rate)
                    throw DataError("dataset mixture: sample rate mismatch in source '" +
                                    s.label + "'");
    }
};

/// B inputs -> L x (Dense(p) + Dropout) -> Dense(B). The output layer carries
/// its own activation and no dropout.
inline BlockModel build_block_model(const BlockModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    nn::GraphBuilder b;
    int cur = b.input(spec.block_size);
    for (std::size_t l = 0; l < spec.layers; ++l) {
        cur = b.dense(cur, spec.width, spec.activation);
        cur = b.dropout(cur, spec.drop_rate);
    }
    const int out = b.dense(cur, spec.block_size, spec.output_activation);
    BlockModel m;
    m.graph = b.build({out}, seed);
    m.spec = spec;
    return m;
}

/// Union of consecutive-block pairs across every buffer of every source.
inline std::vector<nn::Example> collect_block_pairs(const DatasetMixture& mixture,
                                                    std::size_t block_size) {
    mixture.validate();
    std::vector<nn::Example> examples;
    for (const auto& src : mixture.sources) {
        for (const auto& buf : src.buffers) {
            for (auto& [in, target] : audio::frame_blocks(buf, block_size)) {
                nn::Example ex;
                ex.inputs.push_back(Tensor::vec(std::move(in)));
                ex.targets.push_back(Tensor::vec(std::move(target)));
                examples.push_back(std::move(ex));
            }
        }
    }
    if (examples.empty()) throw DataError("block training: mixture yields no block pairs");
    return examples;
}

inline nn::TrainReport train_blocks(BlockModel& m, const DatasetMixture& mixture,
                                    const nn::TrainConfig& cfg) {
    return nn::train(m.graph, collect_block_pairs(mixture, m.spec.block_size), cfg);
}

struct GeneratedBlocks {
    std::vector<audio::AudioBuffer> blocks;
    std::size_t clipped_samples = 0;
};

/// Autoregressive rollout of M blocks from a seed block, dropout bypassed.
/// Samples are hard-clipped into [-1,1] and clips counted.
inline GeneratedBlocks generate_blocks(BlockModel& m, const std::vector<double>& seed_block,
                                       std::size_t num_blocks, double sample_rate) {
    if (num_blocks == 0) throw ConfigError("generate_blocks: M must be >= 1");
    if (seed_block.size() != m.spec.block_size)
        throw ShapeError("generate_blocks: seed block length " +
                         std::to_string(seed_block.size()) + " does not match block size " +
                         std::to_string(m.spec.block_size));
    GeneratedBlocks out;
    Tensor current = Tensor::vec(seed_block);
    for (std::size_t i = 0; i < num_blocks; ++i) {
        auto outs = nn::eval_graph(m.graph, std::vector<Tensor>{current}, nn::Mode::Infer);
        Tensor& block = outs[0];
        audio::AudioBuffer buf;
        buf.sample_rate = sample_rate;
        buf.samples.reserve(block.numel());
        for (double& v : block.data) {
            if (v < -1.0 || v > 1.0) {
                ++out.clipped_samples;
                v = std::clamp(v, -1.0, 1.0);
            }
            buf.samples.push_back(v);
        }
        out.blocks.push_back(std::move(buf));
        current = std::move(block);
    }
    return out;
}

/// Deterministic seed block: the opening block of a seeded-random training
/// buffer, or uniform noise for exploratory output.
inline std::vector<double> pick_seed_block(const DatasetMixture& mixture, std::size_t block_size,
                                           std::uint64_t seed, bool noise) {
    Rng rng(seed);
    if (noise) {
        std::vector<double> block(block_size);
        for (double& v : block) v = rng.uniform(-1.0, 1.0);
        return block;
    }
    std::vector<const audio::AudioBuffer*> all;
    for (const auto& s : mixture.sources)
        for (const auto& b : s.buffers)
            if (b.size() >= block_size) all.push_back(&b);
    if (all.empty()) throw DataError("seed block: no training buffer is long enough");
    const audio::AudioBuffer* chosen = all[std::size_t(rng.below(all.size()))];
    return {chosen->samples.begin(), chosen->samples.begin() + long(block_size)};
}

struct ExportProvenance {
    std::uint64_t seed = 0;
    std::string seed_source;
    std::size_t clipped_samples = 0;
};

/// Write one WAV per block plus a preset, and a JSON sidecar describing the
/// run. Returns the instrument spec that was emitted.
inline sampler::SamplerInstrumentSpec export_sound_set(
    const std::vector<audio::AudioBuffer>& generated, const std::string& out_dir,
    const sampler::Envelope& adsr, const std::string& name = "generated",
    sampler::MapStrategy strategy = sampler::MapStrategy::EvenSplit,
    const ExportProvenance* provenance = nullptr) {
    if (generated.empty()) throw DataError("export: no blocks to write");
    std::filesystem::create_directories(out_dir);

    std::vector<std::string> rel_paths;
    for (std::size_t i = 0; i < generated.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "gen_%03zu.wav", i);
        rel_paths.emplace_back(buf);
        audio::write_wav_file(generated[i], (std::filesystem::path(out_dir) / buf).string());
    }

    sampler::SamplerInstrumentSpec spec;
    spec.name = name;
    spec.envelope = adsr;
    spec.entries = sampler::map_samples(rel_paths, strategy);
    sampler::write_preset_file(spec,
                               (std::filesystem::path(out_dir) / (name + ".dspreset")).string());

    // sidecar: clip counts and seed provenance
    std::string sidecar = "{\n  \"clips\": " + std::to_string(generated.size());
    if (provenance) {
        sidecar += ",\n  \"seed\": " + std::to_string(provenance->seed);
        sidecar += ",\n  \"seed_source\": \"" + provenance->seed_source + "\"";
        sidecar += ",\n  \"clipped_samples\": " + std::to_string(provenance->clipped_samples);
    }
    sidecar += "\n}\n";
    std::ofstream os(std::filesystem::path(out_dir) / (name + ".json"), std::ios::binary);
    if (!os) throw IoError("cannot write sidecar in " + out_dir);
    os << sidecar;
    return spec;
}

// --- persistence -------------------------------------------------------------

inline void save_blocks(const BlockModel& m, double sample_rate, const std::string& path) {
    nn::ModelGraph g = m.graph;
    g.set_meta("pipeline", "blocks");
    g.set_meta("blocks.layers", std::to_string(m.spec.layers));
    g.set_meta("blocks.width", std::to_string(m.spec.width));
    g.set_meta("blocks.block_size", std::to_string(m.spec.block_size));
    g.set_meta("blocks.activation", nn::to_string(m.spec.activation));
    g.set_meta("blocks.output_activation", nn::to_string(m.spec.output_activation));
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", m.spec.drop_rate);
    g.set_meta("blocks.drop_rate", buf);
    std::snprintf(buf, sizeof buf, "%a", sample_rate);
    g.set_meta("blocks.sample_rate", buf);
    nn::save_model(g, path);
}

struct LoadedBlocks {
    BlockModel model;
    double sample_rate = 44100.0;
};

inline LoadedBlocks load_blocks(const std::string& path) {
    nn::ModelGraph g = nn::load_model(path);
    const std::string* pipeline = g.find_meta("pipeline");
    if (!pipeline || *pipeline != "blocks")
        throw ParseError("model file is not a block model: " + path);
    LoadedBlocks out;
    out.model.spec.layers = std::size_t(std::stoul(*g.find_meta("blocks.layers")));
    out.model.spec.width = std::size_t(std::stoul(*g.find_meta("blocks.width")));
    out.model.spec.block_size = std::size_t(std::stoul(*g.find_meta("blocks.block_size")));
    out.model.spec.activation = nn::activation_from_string(*g.find_meta("blocks.activation"));
    out.model.spec.output_activation =
        nn::activation_from_string(*g.find_meta("blocks.output_activation"));
    out.model.spec.drop_rate = std::strtod(g.find_meta("blocks.drop_rate")->c_str(), nullptr);
    out.sample_rate = std::strtod(g.find_meta("blocks.sample_rate")->c_str(), nullptr);
    out.model.graph = std::move(g);
    return out;
}

} // namespace cadenza::blocks
