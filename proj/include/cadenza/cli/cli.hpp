#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cadenza/audio/wav.hpp"
#include "cadenza/blocks/blocks.hpp"
#include "cadenza/core/error.hpp"
#include "cadenza/genere/canvas.hpp"
#include "cadenza/genere/markov.hpp"
#include "cadenza/genere/scene.hpp"
#include "cadenza/grufx/grufx.hpp"
#include "cadenza/midi/midi.hpp"
#include "cadenza/mimo/mimo.hpp"
#include "cadenza/sampler/preset.hpp"
#include "cadenza/wavetable/wavetable.hpp"

namespace cadenza::cli {

namespace detail {

enum class LogLevel { Debug = 0, Info, Warn, Error, Silent };

inline LogLevel log_level() {
    const char* env = std::getenv("CADENZA_LOG");
    if (!env) return LogLevel::Info;
    const std::string v = env;
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    if (v == "warn") return LogLevel::Warn;
    if (v == "error") return LogLevel::Error;
    if (v == "silent") return LogLevel::Silent;
    return LogLevel::Info;
}

inline void log(LogLevel level, const std::string& msg) {
    static const LogLevel threshold = log_level();
    if (level < threshold) return;
    const char* tag = level == LogLevel::Debug  ? "debug"
                      : level == LogLevel::Info ? "info"
                      : level == LogLevel::Warn ? "warn"
                                                : "error";
    std::cerr << "[cadenza] " << tag << ": " << msg << "\n";
}

inline void log_info(const std::string& msg) { log(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log(LogLevel::Warn, msg); }

inline std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string part;
    while (std::getline(is, part, ','))
        if (!part.empty()) out.push_back(part);
    return out;
}

/// A corpus argument is a WAV file or a directory of WAV files (sorted for
/// deterministic ordering).
inline std::vector<std::string> collect_wavs(const std::vector<std::string>& paths) {
    std::vector<std::string> files;
    for (const auto& p : paths) {
        if (!std::filesystem::exists(p)) throw DataError("corpus path does not exist: " + p);
        if (std::filesystem::is_directory(p)) {
            std::vector<std::string> dir_files;
            for (const auto& entry : std::filesystem::directory_iterator(p))
                if (entry.is_regular_file() && entry.path().extension() == ".wav")
                    dir_files.push_back(entry.path().string());
            std::sort(dir_files.begin(), dir_files.end());
            files.insert(files.end(), dir_files.begin(), dir_files.end());
        } else {
            files.push_back(p);
        }
    }
    if (files.empty()) throw DataError("no wav files found in the given corpus paths");
    return files;
}

inline blocks::DatasetMixture load_mixture(const std::vector<std::string>& paths) {
    blocks::DatasetMixture mix;
    for (const auto& file : collect_wavs(paths)) {
        blocks::DatasetMixture::Source src;
        src.label = file;
        src.buffers.push_back(audio::read_wav_file(file));
        mix.sources.push_back(std::move(src));
    }
    return mix;
}

inline std::vector<audio::AudioBuffer> load_corpus(const std::vector<std::string>& paths) {
    std::vector<audio::AudioBuffer> corpus;
    for (const auto& file : collect_wavs(paths)) corpus.push_back(audio::read_wav_file(file));
    return corpus;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open file: " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open file for writing: " + path);
    os << text;
    if (!os) throw IoError("failed writing file: " + path);
}

inline void write_bytes_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open file for writing: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!os) throw IoError("failed writing file: " + path);
}

} // namespace detail

/// Dispatch a full command line. Exit codes: 0 success, 1 categorized
/// error (config/data/parse/io/numeric), 2 usage error.
inline int run(int argc, char** argv) {
    using detail::log_info;
    using detail::log_warn;

    CLI::App app{"cadenza: corpus-driven music generation, sound design and score tools"};
    app.set_config("--config");
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "global random seed")->capture_default_str();

    // ---- ingest -------------------------------------------------------------
    auto* ingest = app.add_subcommand("ingest", "parse a MIDI corpus manifest and report stats");
    std::string in_manifest, in_composers, in_emit;
    ingest->add_option("--manifest", in_manifest, "corpus manifest (path<TAB>composer)")
        ->required();
    ingest->add_option("--composers", in_composers, "comma-separated composer filter");
    ingest->add_option("--emit", in_emit, "write the filtered corpus as one format-0 MIDI");

    // ---- nn1 ----------------------------------------------------------------
    auto* nn1 = app.add_subcommand("nn1", "next-note model over a MIDI corpus");
    nn1->require_subcommand(1);
    auto* nn1_train = nn1->add_subcommand("train", "train from a manifest");
    std::string n1_manifest, n1_composers, n1_out;
    std::size_t n1_sub_layers = 2, n1_sub_width = 32, n1_head_layers = 2, n1_head_width = 32;
    std::size_t n1_epochs = 50, n1_batch = 32;
    double n1_lr = 1e-3;
    nn1_train->add_option("--manifest", n1_manifest)->required();
    nn1_train->add_option("--composers", n1_composers, "comma-separated composer filter");
    nn1_train->add_option("--out", n1_out, "output model path")->required();
    nn1_train->add_option("--sub-layers", n1_sub_layers)->capture_default_str();
    nn1_train->add_option("--sub-width", n1_sub_width)->capture_default_str();
    nn1_train->add_option("--head-layers", n1_head_layers)->capture_default_str();
    nn1_train->add_option("--head-width", n1_head_width)->capture_default_str();
    nn1_train->add_option("--epochs", n1_epochs)->capture_default_str();
    nn1_train->add_option("--batch", n1_batch)->capture_default_str();
    nn1_train->add_option("--lr", n1_lr)->capture_default_str();

    auto* nn1_gen = nn1->add_subcommand("generate", "roll out a note sequence");
    std::string g1_model, g1_out, g1_png;
    std::size_t g1_length = 32;
    int g1_seed_pitch = -1;
    double g1_bpm = 120.0;
    std::size_t g1_tpq = 480;
    nn1_gen->add_option("--model", g1_model)->required();
    nn1_gen->add_option("--out", g1_out, "output MIDI path")->required();
    nn1_gen->add_option("--length", g1_length)->capture_default_str();
    nn1_gen->add_option("--png", g1_png, "optional piano-roll PNG path");
    nn1_gen->add_option("--seed-pitch", g1_seed_pitch, "override the stored seed note pitch");
    nn1_gen->add_option("--bpm", g1_bpm)->capture_default_str();
    nn1_gen->add_option("--tpq", g1_tpq)->capture_default_str();

    // ---- nn2 ----------------------------------------------------------------
    auto* nn2 = app.add_subcommand("nn2", "block-autoregressive sound designer");
    nn2->require_subcommand(1);
    auto* nn2_train = nn2->add_subcommand("train", "train on a WAV corpus");
    std::vector<std::string> n2_corpus;
    std::string n2_out;
    // audible default: one-second blocks; tests and quick runs override it
    std::size_t n2_layers = 2, n2_width = 32, n2_block = 44100, n2_epochs = 50, n2_batch = 32;
    double n2_lr = 1e-3, n2_drop = 0.5;
    std::string n2_act = "tanh", n2_out_act = "tanh";
    nn2_train->add_option("--corpus", n2_corpus, "wav files or directories")->required();
    nn2_train->add_option("--out", n2_out)->required();
    nn2_train->add_option("--layers", n2_layers)->capture_default_str();
    nn2_train->add_option("--width", n2_width)->capture_default_str();
    nn2_train->add_option("--block-size", n2_block)->capture_default_str();
    nn2_train->add_option("--drop", n2_drop)->capture_default_str();
    nn2_train->add_option("--activation", n2_act)->capture_default_str();
    nn2_train->add_option("--output-activation", n2_out_act)->capture_default_str();
    nn2_train->add_option("--epochs", n2_epochs)->capture_default_str();
    nn2_train->add_option("--batch", n2_batch)->capture_default_str();
    nn2_train->add_option("--lr", n2_lr)->capture_default_str();

    auto* nn2_gen = nn2->add_subcommand("generate", "roll out M blocks as WAV files");
    std::string g2_model, g2_out;
    std::size_t g2_blocks = 5;
    bool g2_noise = false;
    std::vector<std::string> g2_seed_corpus;
    nn2_gen->add_option("--model", g2_model)->required();
    nn2_gen->add_option("--out", g2_out, "output directory")->required();
    nn2_gen->add_option("--blocks", g2_blocks)->capture_default_str();
    nn2_gen->add_flag("--noise-seed", g2_noise, "seed the rollout with noise");
    nn2_gen->add_option("--seed-corpus", g2_seed_corpus,
                        "corpus to draw the seed block from (defaults to noise)");

    auto* nn2_export = nn2->add_subcommand("export", "map WAVs into a sampler preset");
    std::string e2_dir, e2_out, e2_name = "generated", e2_strategy = "evensplit";
    double e2_attack = 0.01, e2_decay = 0.1, e2_sustain = 0.8, e2_release = 0.2;
    nn2_export->add_option("--samples-dir", e2_dir, "directory of WAV files")->required();
    nn2_export->add_option("--out", e2_out, "output directory")->required();
    nn2_export->add_option("--name", e2_name)->capture_default_str();
    nn2_export->add_option("--strategy", e2_strategy, "evensplit|roundrobin")
        ->capture_default_str();
    nn2_export->add_option("--attack", e2_attack)->capture_default_str();
    nn2_export->add_option("--decay", e2_decay)->capture_default_str();
    nn2_export->add_option("--sustain", e2_sustain)->capture_default_str();
    nn2_export->add_option("--release", e2_release)->capture_default_str();

    // ---- fx -----------------------------------------------------------------
    auto* fx = app.add_subcommand("fx", "streaming GRU audio effect");
    fx->require_subcommand(1);
    auto* fx_train = fx->add_subcommand("train", "train on an input (and optional target) WAV");
    std::string fxt_input, fxt_target, fxt_out, fxt_act = "tanh";
    std::size_t fxt_layers = 4, fxt_memory = 8, fxt_scaler = 2, fxt_epochs = 40;
    double fxt_lr = 1e-3;
    fx_train->add_option("--input", fxt_input)->required();
    fx_train->add_option("--target", fxt_target,
                         "target WAV for effect matching (defaults to self-prediction)");
    fx_train->add_option("--out", fxt_out)->required();
    fx_train->add_option("--layers", fxt_layers)->capture_default_str();
    fx_train->add_option("--memory", fxt_memory)->capture_default_str();
    fx_train->add_option("--scaler", fxt_scaler)->capture_default_str();
    fx_train->add_option("--activation", fxt_act)->capture_default_str();
    fx_train->add_option("--epochs", fxt_epochs)->capture_default_str();
    fx_train->add_option("--lr", fxt_lr)->capture_default_str();

    auto* fx_render = fx->add_subcommand("render", "apply a model to a file offline");
    std::string fxr_model, fxr_in, fxr_out;
    fx_render->add_option("--model", fxr_model)->required();
    fx_render->add_option("--in", fxr_in)->required();
    fx_render->add_option("--out", fxr_out)->required();

    auto* fx_bench = fx->add_subcommand("bench", "measure streaming throughput");
    std::string fxb_model;
    double fxb_seconds = 2.0, fxb_rate = 44100.0;
    std::size_t fxb_layers = 4, fxb_memory = 8, fxb_scaler = 2;
    fx_bench->add_option("--model", fxb_model, "model file (otherwise a fresh default spec)");
    fx_bench->add_option("--seconds", fxb_seconds)->capture_default_str();
    fx_bench->add_option("--rate", fxb_rate)->capture_default_str();
    fx_bench->add_option("--layers", fxb_layers)->capture_default_str();
    fx_bench->add_option("--memory", fxb_memory)->capture_default_str();
    fx_bench->add_option("--scaler", fxb_scaler)->capture_default_str();

    // ---- wavetable ----------------------------------------------------------
    auto* wt = app.add_subcommand("wavetable", "single-cycle wavetable generator");
    wt->require_subcommand(1);
    auto* wt_train = wt->add_subcommand("train", "train on a WAV corpus");
    std::vector<std::string> wtt_corpus;
    std::string wtt_out, wtt_feature = "mfcc", wtt_loss = "deployed";
    std::size_t wtt_layers = 2, wtt_width = 64, wtt_table = 1024, wtt_epochs = 60;
    std::size_t wtt_frame = 1024, wtt_frames = 10;
    double wtt_lr = 1e-3;
    wt_train->add_option("--corpus", wtt_corpus)->required();
    wt_train->add_option("--out", wtt_out)->required();
    wt_train->add_option("--feature", wtt_feature, "mfcc|stft")->capture_default_str();
    wt_train->add_option("--loss", wtt_loss, "deployed|spectral")->capture_default_str();
    wt_train->add_option("--table-size", wtt_table)->capture_default_str();
    wt_train->add_option("--frame-size", wtt_frame)->capture_default_str();
    wt_train->add_option("--frames", wtt_frames)->capture_default_str();
    wt_train->add_option("--layers", wtt_layers)->capture_default_str();
    wt_train->add_option("--width", wtt_width)->capture_default_str();
    wt_train->add_option("--epochs", wtt_epochs)->capture_default_str();
    wt_train->add_option("--lr", wtt_lr)->capture_default_str();

    auto* wt_gen = wt->add_subcommand("generate", "generate a table from a source file");
    std::string wtg_model, wtg_in, wtg_out;
    double wtg_rate = 44100.0;
    wt_gen->add_option("--model", wtg_model)->required();
    wt_gen->add_option("--in", wtg_in)->required();
    wt_gen->add_option("--out", wtg_out, "output WAV (loop points span the cycle)")->required();
    wt_gen->add_option("--rate", wtg_rate)->capture_default_str();

    auto* wt_export = wt->add_subcommand("export", "wrap a cycle WAV into a sampler preset");
    std::string wte_table, wte_out, wte_name = "wavetable";
    double wte_attack = 0.01, wte_decay = 0.1, wte_sustain = 0.8, wte_release = 0.2;
    wt_export->add_option("--table", wte_table, "single-cycle WAV")->required();
    wt_export->add_option("--out", wte_out)->required();
    wt_export->add_option("--name", wte_name)->capture_default_str();
    wt_export->add_option("--attack", wte_attack)->capture_default_str();
    wt_export->add_option("--decay", wte_decay)->capture_default_str();
    wt_export->add_option("--sustain", wte_sustain)->capture_default_str();
    wt_export->add_option("--release", wte_release)->capture_default_str();

    // ---- genere ---------------------------------------------------------
    auto* gen = app.add_subcommand("genere", "procedural graphic scores");
    gen->require_subcommand(1);
    auto* gen_render = gen->add_subcommand("render", "render a scene script to PNG");
    std::string gr_scene, gr_out;
    gen_render->add_option("--scene", gr_scene, "scene script path")->required();
    gen_render->add_option("--out", gr_out, "output PNG path")->required();

    auto* gen_markov = gen->add_subcommand("markov", "learn chains from MIDI and sample a score");
    std::string gm_midi, gm_table, gm_score, gm_title = "Markov Score";
    std::size_t gm_notes = 45, gm_systems = 9;
    gen_markov->add_option("--midi", gm_midi, "training MIDI file")->required();
    gen_markov->add_option("--table", gm_table, "write the transition matrices as text");
    gen_markov->add_option("--score", gm_score, "render a sampled score PNG");
    gen_markov->add_option("--notes", gm_notes)->capture_default_str();
    gen_markov->add_option("--systems", gm_systems)->capture_default_str();
    gen_markov->add_option("--title", gm_title)->capture_default_str();

    // let global options like --seed appear after subcommand arguments
    const std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* a) {
        for (CLI::App* sub : a->get_subcommands([](CLI::App*) { return true; })) {
            sub->fallthrough();
            enable_fallthrough(sub);
        }
    };
    enable_fallthrough(&app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 2;
    }

    try {
        log_info("seed = " + std::to_string(seed));

        if (*ingest) {
            log_info("ingest manifest " + in_manifest);
            midi::CorpusManifest manifest = midi::load_manifest(in_manifest);
            std::vector<std::string> composers = detail::split_csv(in_composers);
            if (composers.empty())
                for (const auto& e : manifest.entries) composers.push_back(e.composer);
            midi::NoteDataset data = midi::get_data_for_composer(manifest, composers);
            std::cout << "files: " << manifest.entries.size() << "\n";
            std::cout << "events: " << data.size() << "\n";
            std::cout << "span_seconds: " << data.end_time() << "\n";
            if (data.unterminated_notes)
                log_warn(std::to_string(data.unterminated_notes) +
                         " notes were closed at track end");
            if (!in_emit.empty()) {
                midi::emit_midi_file(data, in_emit);
                log_info("wrote " + in_emit);
            }
            return 0;
        }

        if (*nn1) {
            if (*nn1_train) {
                midi::CorpusManifest manifest = midi::load_manifest(n1_manifest);
                std::vector<std::string> composers = detail::split_csv(n1_composers);
                if (composers.empty())
                    for (const auto& e : manifest.entries) composers.push_back(e.composer);
                midi::NoteDataset data = midi::get_data_for_composer(manifest, composers);
                log_info("training on " + std::to_string(data.size()) + " events");
                mimo::MimoSpec spec;
                spec.sub_layers = n1_sub_layers;
                spec.sub_width = n1_sub_width;
                spec.head_layers = n1_head_layers;
                spec.head_width = n1_head_width;
                mimo::MimoModel model = mimo::build_mimo(spec, seed);
                auto pairs = mimo::make_training_pairs(data);
                nn::TrainConfig cfg;
                cfg.epochs = n1_epochs;
                cfg.batch_size = n1_batch;
                cfg.learning_rate = n1_lr;
                cfg.seed = seed;
                auto report = mimo::train_mimo(model, pairs, cfg);
                log_info("final loss " + std::to_string(report.final_loss()));
                mimo::save_mimo(model, pairs.scalers, data.events.front(), n1_out);
                log_info("wrote " + n1_out);
            } else if (*nn1_gen) {
                mimo::LoadedMimo loaded = mimo::load_mimo(g1_model);
                midi::NoteEvent seed_note = loaded.default_seed;
                if (g1_seed_pitch >= 0) seed_note.pitch = g1_seed_pitch;
                auto result =
                    mimo::generate_sequence(loaded.model, seed_note, g1_length, loaded.scalers);
                if (result.clamp_events)
                    log_warn(std::to_string(result.clamp_events) + " predictions were clamped");
                midi::emit_midi_file(result.dataset, g1_out, std::uint16_t(g1_tpq), g1_bpm);
                log_info("wrote " + g1_out);
                if (!g1_png.empty()) {
                    auto roll = mimo::render_piano_roll(result.dataset, 1024, 512);
                    image::png_write_file(roll, g1_png);
                    log_info("wrote " + g1_png);
                }
            }
            return 0;
        }

        if (*nn2) {
            if (*nn2_train) {
                blocks::DatasetMixture mix = detail::load_mixture(n2_corpus);
                blocks::BlockModelSpec spec;
                spec.layers = n2_layers;
                spec.width = n2_width;
                spec.block_size = n2_block;
                spec.drop_rate = n2_drop;
                spec.activation = nn::activation_from_string(n2_act);
                spec.output_activation = nn::activation_from_string(n2_out_act);
                blocks::BlockModel model = blocks::build_block_model(spec, seed);
                nn::TrainConfig cfg;
                cfg.epochs = n2_epochs;
                cfg.batch_size = n2_batch;
                cfg.learning_rate = n2_lr;
                cfg.seed = seed;
                auto report = blocks::train_blocks(model, mix, cfg);
                log_info("final loss " + std::to_string(report.final_loss()));
                blocks::save_blocks(model, mix.sample_rate(), n2_out);
                log_info("wrote " + n2_out);
            } else if (*nn2_gen) {
                blocks::LoadedBlocks loaded = blocks::load_blocks(g2_model);
                std::vector<double> seed_block;
                std::string seed_source;
                if (!g2_seed_corpus.empty() && !g2_noise) {
                    auto mix = detail::load_mixture(g2_seed_corpus);
                    seed_block =
                        blocks::pick_seed_block(mix, loaded.model.spec.block_size, seed, false);
                    seed_source = "corpus";
                } else {
                    blocks::DatasetMixture empty;
                    seed_block = blocks::pick_seed_block(empty, loaded.model.spec.block_size,
                                                         seed, true);
                    seed_source = "noise";
                }
                auto gen = blocks::generate_blocks(loaded.model, seed_block, g2_blocks,
                                                   loaded.sample_rate);
                std::filesystem::create_directories(g2_out);
                for (std::size_t i = 0; i < gen.blocks.size(); ++i) {
                    char name[32];
                    std::snprintf(name, sizeof name, "gen_%03zu.wav", i);
                    audio::write_wav_file(gen.blocks[i],
                                          (std::filesystem::path(g2_out) / name).string());
                }
                blocks::ExportProvenance prov{seed, seed_source, gen.clipped_samples};
                std::string sidecar = "{\n  \"clips\": " + std::to_string(gen.blocks.size()) +
                                      ",\n  \"seed\": " + std::to_string(prov.seed) +
                                      ",\n  \"seed_source\": \"" + prov.seed_source +
                                      "\",\n  \"clipped_samples\": " +
                                      std::to_string(prov.clipped_samples) + "\n}\n";
                detail::write_text_file(
                    (std::filesystem::path(g2_out) / "generate.json").string(), sidecar);
                log_info("wrote " + std::to_string(gen.blocks.size()) + " blocks to " + g2_out);
            } else if (*nn2_export) {
                auto wavs = detail::collect_wavs({e2_dir});
                std::vector<audio::AudioBuffer> buffers;
                std::vector<std::string> names;
                for (const auto& w : wavs) {
                    buffers.push_back(audio::read_wav_file(w));
                    names.push_back(std::filesystem::path(w).filename().string());
                }
                sampler::SamplerInstrumentSpec spec;
                spec.name = e2_name;
                spec.envelope = {e2_attack, e2_decay, e2_sustain, e2_release};
                spec.entries =
                    sampler::map_samples(names, sampler::map_strategy_from_string(e2_strategy));
                std::filesystem::create_directories(e2_out);
                for (std::size_t i = 0; i < wavs.size(); ++i)
                    audio::write_wav_file(
                        buffers[i], (std::filesystem::path(e2_out) / names[i]).string());
                sampler::write_preset_file(
                    spec, (std::filesystem::path(e2_out) / (e2_name + ".dspreset")).string());
                log_info("wrote preset " + e2_name + ".dspreset with " +
                         std::to_string(spec.entries.size()) + " zones");
            }
            return 0;
        }

        if (*fx) {
            if (*fx_train) {
                audio::AudioBuffer input = audio::read_wav_file(fxt_input);
                audio::AudioBuffer target;
                if (fxt_target.empty()) {
                    // self-prediction: the target is the input shifted one sample
                    target = input;
                    for (std::size_t i = 0; i + 1 < target.samples.size(); ++i)
                        target.samples[i] = input.samples[i + 1];
                    log_info("no target given; training self-prediction");
                } else {
                    target = audio::read_wav_file(fxt_target);
                }
                grufx::GruFxSpec spec;
                spec.layers = fxt_layers;
                spec.memory = fxt_memory;
                spec.scaler = fxt_scaler;
                spec.activation = nn::activation_from_string(fxt_act);
                grufx::FxModel model = grufx::build_gru_fx(spec, seed);
                log_info("model parameters: " +
                         std::to_string(model.graph.num_param_scalars()));
                nn::TrainConfig cfg;
                cfg.epochs = fxt_epochs;
                cfg.learning_rate = fxt_lr;
                cfg.seed = seed;
                auto report = grufx::train_fx(model, input, target, cfg);
                log_info("final loss " + std::to_string(report.final_loss()));
                grufx::save_fx(model, input.sample_rate, fxt_out);
                log_info("wrote " + fxt_out);
            } else if (*fx_render) {
                grufx::LoadedFx loaded = grufx::load_fx(fxr_model);
                audio::AudioBuffer input = audio::read_wav_file(fxr_in);
                audio::AudioBuffer out = grufx::render_file(loaded.model, input);
                audio::write_wav_file(out, fxr_out);
                log_info("wrote " + fxr_out);
            } else if (*fx_bench) {
                grufx::FxModel model = [&] {
                    if (!fxb_model.empty()) return grufx::load_fx(fxb_model).model;
                    grufx::GruFxSpec spec;
                    spec.layers = fxb_layers;
                    spec.memory = fxb_memory;
                    spec.scaler = fxb_scaler;
                    return grufx::build_gru_fx(spec, seed);
                }();
                auto r = grufx::benchmark_stream(model, fxb_seconds, fxb_rate);
                std::cout << "samples: " << r.samples << "\n";
                std::cout << "elapsed_seconds: " << r.elapsed_seconds << "\n";
                std::cout << "samples_per_second: " << std::llround(r.samples_per_second)
                          << "\n";
                std::cout << "realtime_factor: " << r.realtime_factor << "\n";
            }
            return 0;
        }

        if (*wt) {
            if (*wt_train) {
                auto corpus = detail::load_corpus(wtt_corpus);
                wavetable::WavetableModelSpec spec;
                spec.layers = wtt_layers;
                spec.width = wtt_width;
                spec.block_size = wtt_table;
                spec.frame_size = wtt_frame;
                spec.hop_size = wtt_frame / 4;
                spec.n_frames = wtt_frames;
                spec.feature = wavetable::feature_from_string(wtt_feature);
                spec.loss_mode = wavetable::loss_mode_from_string(wtt_loss);
                wavetable::WavetableModel model = wavetable::build_wavetable_model(spec, seed);
                nn::TrainConfig cfg;
                cfg.epochs = wtt_epochs;
                cfg.learning_rate = wtt_lr;
                cfg.seed = seed;
                std::size_t skipped = 0;
                nn::TrainReport report;
                if (spec.loss_mode == wavetable::LossMode::Deployed)
                    report = wavetable::train_deployed(model, corpus, cfg, &skipped);
                else
                    report = wavetable::train_spectral(model, corpus, cfg, &skipped);
                if (skipped) log_warn(std::to_string(skipped) + " corpus files skipped");
                if (report.aborted) {
                    log_warn("training aborted: " + report.abort_reason);
                } else {
                    log_info("final loss " + std::to_string(report.final_loss()));
                }
                wavetable::save_wavetable_model(model, wtt_out);
                log_info("wrote " + wtt_out);
            } else if (*wt_gen) {
                wavetable::WavetableModel model = wavetable::load_wavetable_model(wtg_model);
                audio::AudioBuffer source = audio::read_wav_file(wtg_in);
                wavetable::Wavetable table = wavetable::generate_wavetable(model, source);
                log_info("endpoint discontinuity " +
                         std::to_string(table.endpoint_discontinuity()));
                audio::AudioBuffer buf;
                buf.sample_rate = wtg_rate;
                buf.samples = table.samples;
                audio::write_wav_file(buf, wtg_out, 16,
                                      audio::LoopPoints{0, std::uint32_t(table.length() - 1)});
                log_info("wrote " + wtg_out);
            } else if (*wt_export) {
                audio::AudioBuffer cycle = audio::read_wav_file(wte_table);
                wavetable::Wavetable table;
                table.samples = cycle.samples;
                wavetable::export_wavetable_instrument(
                    table, wte_out, {wte_attack, wte_decay, wte_sustain, wte_release}, wte_name,
                    cycle.sample_rate);
                log_info("wrote instrument '" + wte_name + "' to " + wte_out);
            }
            return 0;
        }

        if (*gen) {
            if (*gen_render) {
                genere::ScoreCanvas canvas =
                    genere::run_scene(detail::read_text_file(gr_scene));
                detail::write_bytes_file(gr_out, genere::render_png(canvas));
                log_info("wrote " + gr_out);
            } else if (*gen_markov) {
                midi::NoteDataset data = midi::parse_midi_file(gm_midi);
                genere::TransitionTable table = genere::learn_from_midi(data);
                if (!gm_table.empty()) {
                    detail::write_text_file(gm_table, genere::serialize_table(table));
                    log_info("wrote " + gm_table);
                }
                if (!gm_score.empty()) {
                    genere::ScoreCanvas canvas =
                        genere::create_canvas(genere::PageSize::A4,
                                              genere::PageOrientation::Portrait, gm_systems,
                                              true, 96.0);
                    genere::apply_treble_clef(canvas, 0, true);
                    genere::add_text(canvas, genere::TextKind::Title, gm_title);
                    genere::MarkovSampler sampler(table, seed);
                    Rng layout_rng(seed ^ 0x5eed);
                    const std::size_t per_system =
                        (gm_notes + gm_systems - 1) / gm_systems;
                    std::size_t placed = 0;
                    for (std::size_t s = 0; s < gm_systems && placed < gm_notes; ++s) {
                        std::vector<double> positions;
                        for (std::size_t k = 0; k < per_system && placed + k < gm_notes; ++k)
                            positions.push_back(0.1 + 0.8 * layout_rng.uniform());
                        std::sort(positions.begin(), positions.end());
                        for (double hpos : positions) {
                            auto ev = sampler.next();
                            genere::place_notehead(canvas, s, hpos, ev.midi_pitch());
                            ++placed;
                        }
                    }
                    detail::write_bytes_file(gm_score, genere::render_png(canvas));
                    log_info("wrote " + gm_score);
                }
                if (gm_table.empty() && gm_score.empty())
                    std::cout << genere::serialize_table(table);
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.category()) << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace cadenza::cli
