#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cadenza/audio/wav.hpp"
#include "cadenza/cli/cli.hpp"
#include "cadenza/midi/midi.hpp"
#include "cadenza/sampler/preset.hpp"

using namespace cadenza;
namespace fs = std::filesystem;

namespace {

int run_cli(std::initializer_list<std::string> args) {
    std::vector<std::string> strs = {"cadenza"};
    strs.insert(strs.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : strs) argv.push_back(s.data());
    return cli::run(int(argv.size()), argv.data());
}

struct CaptureStderr {
    std::ostringstream captured;
    std::streambuf* old;
    CaptureStderr() : old(std::cerr.rdbuf(captured.rdbuf())) {}
    ~CaptureStderr() { std::cerr.rdbuf(old); }
};

fs::path make_tiny_corpus() {
    const fs::path dir = fs::temp_directory_path() / "cadenza_cli_corpus";
    fs::create_directories(dir / "wav");
    for (int k = 0; k < 2; ++k) {
        audio::AudioBuffer b;
        b.sample_rate = 8000.0;
        const double freq = k == 0 ? 220.0 : 440.0;
        for (int i = 0; i < 800; ++i)
            b.samples.push_back(0.5 * std::sin(2.0 * M_PI * freq * i / 8000.0));
        audio::write_wav_file(b, (dir / "wav" / ("sine" + std::to_string(k) + ".wav")).string());
    }
    midi::NoteDataset d;
    for (int i = 0; i < 12; ++i) {
        d.events.push_back({double(i) * 0.25, 0.2, 60 + (i % 5), 90});
        d.source_labels.emplace_back();
    }
    midi::emit_midi_file(d, (dir / "notes.mid").string());
    std::ofstream manifest(dir / "manifest.tsv");
    manifest << "notes.mid\tSynthetic\n";
    return dir;
}

} // namespace

TEST_CASE("cli basics") {
    SUBCASE("--help exits 0") {
        CHECK(run_cli({"--help"}) == 0);
    }
    SUBCASE("unknown flags exit 2 with usage") {
        CaptureStderr cap;
        CHECK(run_cli({"--definitely-not-a-flag"}) == 2);
    }
    SUBCASE("a missing corpus path is a data error naming the path") {
        CaptureStderr cap;
        const int rc = run_cli({"nn2", "train", "--corpus", "/nonexistent/place",
                                "--out", "/tmp/never.czm"});
        CHECK(rc == 1);
        CHECK(cap.captured.str().find("/nonexistent/place") != std::string::npos);
        CHECK(cap.captured.str().find("data") != std::string::npos);
    }
}

TEST_CASE("cli pipelines run end to end on a tiny corpus") {
    const fs::path dir = make_tiny_corpus();
    const fs::path out = fs::temp_directory_path() / "cadenza_cli_out";
    fs::remove_all(out);
    fs::create_directories(out);
    CaptureStderr cap; // keep test output clean

    SUBCASE("ingest reports and re-emits") {
        CHECK(run_cli({"ingest", "--manifest", (dir / "manifest.tsv").string(), "--emit",
                       (out / "merged.mid").string()}) == 0);
        CHECK(fs::exists(out / "merged.mid"));
    }
    SUBCASE("nn2 train, generate, export") {
        const std::string model = (out / "blocks.czm").string();
        CHECK(run_cli({"nn2", "train", "--corpus", (dir / "wav").string(), "--out", model,
                       "--epochs", "5", "--block-size", "16", "--width", "8", "--seed",
                       "7"}) == 0);
        CHECK(run_cli({"nn2", "generate", "--model", model, "--blocks", "2", "--out",
                       (out / "gen").string(), "--seed", "7"}) == 0);
        CHECK(fs::exists(out / "gen" / "gen_000.wav"));
        CHECK(fs::exists(out / "gen" / "gen_001.wav"));
        CHECK(fs::exists(out / "gen" / "generate.json"));
        CHECK(run_cli({"nn2", "export", "--samples-dir", (out / "gen").string(), "--out",
                       (out / "kit").string(), "--name", "kit"}) == 0);
        const fs::path preset = out / "kit" / "kit.dspreset";
        REQUIRE(fs::exists(preset));
        std::ifstream is(preset);
        std::stringstream ss;
        ss << is.rdbuf();
        CHECK_NOTHROW(sampler::parse_preset(ss.str()));
    }
    SUBCASE("fx train and render") {
        const std::string model = (out / "fx.czm").string();
        CHECK(run_cli({"fx", "train", "--input", (dir / "wav" / "sine0.wav").string(), "--out",
                       model, "--layers", "1", "--memory", "4", "--scaler", "1", "--epochs",
                       "3", "--seed", "5"}) == 0);
        CHECK(run_cli({"fx", "render", "--model", model, "--in",
                       (dir / "wav" / "sine1.wav").string(), "--out",
                       (out / "fx.wav").string()}) == 0);
        auto rendered = audio::read_wav_file((out / "fx.wav").string());
        auto source = audio::read_wav_file((dir / "wav" / "sine1.wav").string());
        CHECK(rendered.size() == source.size());
    }
    SUBCASE("wavetable train, generate, export") {
        const std::string model = (out / "wt.czm").string();
        CHECK(run_cli({"wavetable", "train", "--corpus", (dir / "wav").string(), "--out", model,
                       "--table-size", "64", "--frame-size", "128", "--frames", "2", "--width",
                       "8", "--epochs", "5", "--seed", "3"}) == 0);
        CHECK(run_cli({"wavetable", "generate", "--model", model, "--in",
                       (dir / "wav" / "sine0.wav").string(), "--out",
                       (out / "table.wav").string(), "--rate", "8000"}) == 0);
        auto table = audio::read_wav_file((out / "table.wav").string());
        CHECK(table.size() == 64);
        CHECK(run_cli({"wavetable", "export", "--table", (out / "table.wav").string(), "--out",
                       (out / "synth").string(), "--name", "cycle"}) == 0);
        CHECK(fs::exists(out / "synth" / "cycle.dspreset"));
    }
    SUBCASE("nn1 train and generate") {
        const std::string model = (out / "mimo.czm").string();
        CHECK(run_cli({"nn1", "train", "--manifest", (dir / "manifest.tsv").string(), "--out",
                       model, "--sub-width", "4", "--head-width", "4", "--epochs", "10",
                       "--seed", "2"}) == 0);
        CHECK(run_cli({"nn1", "generate", "--model", model, "--length", "8", "--out",
                       (out / "rolled.mid").string(), "--png", (out / "roll.png").string(),
                       "--seed", "2"}) == 0);
        auto back = midi::parse_midi_file((out / "rolled.mid").string());
        CHECK(back.size() == 8);
        CHECK(fs::exists(out / "roll.png"));
    }
    SUBCASE("genere render and markov") {
        const fs::path scene = out / "scene.txt";
        std::ofstream os(scene);
        os << "canvas A4 portrait systems=2 dpi=72 indentation=on\n";
        os << "clef all\n";
        os << "title Tiny Scene\n";
        os << "note system=0 hpos=0.4 pitch=67\n";
        os << "note system=1 hpos=0.6 pitch=64\n";
        os << "line color=blue width=1 notes=0,1\n";
        os.close();
        CHECK(run_cli({"genere", "render", "--scene", scene.string(), "--out",
                       (out / "scene.png").string()}) == 0);
        CHECK(fs::exists(out / "scene.png"));
        CHECK(run_cli({"genere", "markov", "--midi", (dir / "notes.mid").string(), "--table",
                       (out / "table.txt").string(), "--score", (out / "markov.png").string(),
                       "--notes", "10", "--systems", "2", "--seed", "6"}) == 0);
        CHECK(fs::exists(out / "table.txt"));
        CHECK(fs::exists(out / "markov.png"));
    }
    SUBCASE("config file values apply with CLI override precedence") {
        const fs::path cfgfile = out / "run.cfg";
        {
            std::ofstream os(cfgfile);
            os << "seed=11\n";
        }
        // config seed applies; CLI --seed overrides it
        CHECK(run_cli({"ingest", "--manifest", (dir / "manifest.tsv").string(), "--config",
                       cfgfile.string()}) == 0);
        CHECK(run_cli({"ingest", "--manifest", (dir / "manifest.tsv").string(), "--config",
                       cfgfile.string(), "--seed", "12"}) == 0);
    }
}
