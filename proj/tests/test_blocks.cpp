#include <doctest.h>

#include <filesystem>

#include "cadenza/blocks/blocks.hpp"

using namespace cadenza;
using namespace cadenza::blocks;

namespace {

DatasetMixture constant_mixture(double value = 0.3, std::size_t len = 400) {
    DatasetMixture mix;
    audio::AudioBuffer buf;
    buf.sample_rate = 8000.0;
    buf.samples.assign(len, value);
    mix.sources.push_back({"const", {buf}});
    return mix;
}

} // namespace

TEST_CASE("build_block_model structure") {
    SUBCASE("the published default stacks Dense(32), Drop, Dense(32), Drop, Dense(10)") {
        BlockModelSpec spec;
        spec.layers = 2;
        spec.width = 32;
        spec.block_size = 10;
        BlockModel m = build_block_model(spec, 1);
        using K = nn::LayerKind;
        REQUIRE(m.graph.nodes.size() == 6);
        CHECK(m.graph.nodes[0].spec.kind == K::Input);
        CHECK(m.graph.nodes[0].out_width == 10);
        CHECK(m.graph.nodes[1].spec.kind == K::Dense);
        CHECK(m.graph.nodes[1].out_width == 32);
        CHECK(m.graph.nodes[2].spec.kind == K::Dropout);
        CHECK(m.graph.nodes[3].spec.kind == K::Dense);
        CHECK(m.graph.nodes[3].out_width == 32);
        CHECK(m.graph.nodes[4].spec.kind == K::Dropout);
        CHECK(m.graph.nodes[5].spec.kind == K::Dense);
        CHECK(m.graph.nodes[5].out_width == 10);
    }
    SUBCASE("the two-layer width-4 block-4 shape builds the same ladder") {
        BlockModelSpec spec;
        spec.layers = 2;
        spec.width = 4;
        spec.block_size = 4;
        BlockModel m = build_block_model(spec, 1);
        REQUIRE(m.graph.nodes.size() == 6);
        CHECK(m.graph.nodes[1].out_width == 4);
        CHECK(m.graph.nodes[5].out_width == 4);
    }
    SUBCASE("a scalar-to-scalar predictor runs") {
        BlockModelSpec spec;
        spec.block_size = 1;
        BlockModel m = build_block_model(spec, 1);
        auto outs = nn::eval_graph(m.graph, std::vector<Tensor>{Tensor::vec({0.2})});
        CHECK(outs[0].numel() == 1);
    }
}

TEST_CASE("train_blocks") {
    SUBCASE("mixture pair count is the sum over sources") {
        DatasetMixture mix;
        audio::AudioBuffer a, b;
        a.sample_rate = b.sample_rate = 8000.0;
        a.samples.assign(100, 0.1); // 24 pairs at block 4
        b.samples.assign(40, 0.2);  // 9 pairs at block 4
        mix.sources.push_back({"a", {a}});
        mix.sources.push_back({"b", {b}});
        CHECK(collect_block_pairs(mix, 4).size() == 33);
    }
    SUBCASE("a constant corpus converges to tiny loss") {
        BlockModelSpec spec;
        spec.layers = 2;
        spec.width = 16;
        spec.block_size = 10;
        spec.drop_rate = 0.0;
        BlockModel m = build_block_model(spec, 21);
        nn::TrainConfig cfg;
        cfg.epochs = 150;
        cfg.learning_rate = 1e-2;
        cfg.seed = 4;
        auto rep = train_blocks(m, constant_mixture(), cfg);
        CHECK(rep.final_loss() < 1e-6);
    }
    SUBCASE("the seeded shuffle makes runs reproducible") {
        BlockModelSpec spec;
        spec.block_size = 8;
        spec.width = 8;
        nn::TrainConfig cfg;
        cfg.epochs = 5;
        cfg.seed = 12;
        BlockModel m1 = build_block_model(spec, 3);
        BlockModel m2 = build_block_model(spec, 3);
        auto r1 = train_blocks(m1, constant_mixture(0.2, 200), cfg);
        auto r2 = train_blocks(m2, constant_mixture(0.2, 200), cfg);
        CHECK(r1.epoch_loss == r2.epoch_loss);
    }
    SUBCASE("mismatched sample rates are rejected") {
        DatasetMixture mix = constant_mixture();
        audio::AudioBuffer other;
        other.sample_rate = 22050.0;
        other.samples.assign(100, 0.0);
        mix.sources.push_back({"other", {other}});
        BlockModel m = build_block_model(BlockModelSpec{}, 1);
        CHECK_THROWS_AS(train_blocks(m, mix, nn::TrainConfig{}), DataError);
    }
}

TEST_CASE("generate_blocks") {
    BlockModelSpec spec;
    spec.layers = 1;
    spec.width = 8;
    spec.block_size = 6;
    spec.drop_rate = 0.5;
    BlockModel m = build_block_model(spec, 5);
    const std::vector<double> seed_block = {0.1, -0.2, 0.3, -0.4, 0.5, -0.6};

    SUBCASE("M = 1 equals a single inference forward pass of the seed") {
        auto gen = generate_blocks(m, seed_block, 1, 8000.0);
        REQUIRE(gen.blocks.size() == 1);
        auto direct = nn::eval_graph(m.graph, std::vector<Tensor>{Tensor::vec(seed_block)});
        CHECK(gen.blocks[0].samples == direct[0].data);
    }
    SUBCASE("rollout chains: block i+1 is the model applied to block i") {
        auto gen = generate_blocks(m, seed_block, 5, 8000.0);
        REQUIRE(gen.blocks.size() == 5);
        for (std::size_t i = 0; i + 1 < gen.blocks.size(); ++i) {
            auto next = nn::eval_graph(
                m.graph, std::vector<Tensor>{Tensor::vec(gen.blocks[i].samples)});
            CHECK(gen.blocks[i + 1].samples == next[0].data);
        }
    }
    SUBCASE("two rollouts from the same seed block are identical") {
        auto a = generate_blocks(m, seed_block, 4, 8000.0);
        auto b = generate_blocks(m, seed_block, 4, 8000.0);
        for (std::size_t i = 0; i < a.blocks.size(); ++i)
            CHECK(a.blocks[i].samples == b.blocks[i].samples);
    }
    SUBCASE("samples never leave [-1,1]") {
        auto gen = generate_blocks(m, seed_block, 8, 8000.0);
        for (const auto& blk : gen.blocks)
            for (double s : blk.samples) {
                CHECK(s >= -1.0);
                CHECK(s <= 1.0);
            }
    }
    SUBCASE("M = 0 is a config error") {
        CHECK_THROWS_AS(generate_blocks(m, seed_block, 0, 8000.0), ConfigError);
    }
    SUBCASE("zero drop rate makes train and infer forward passes agree") {
        BlockModelSpec nodrop = spec;
        nodrop.drop_rate = 0.0;
        BlockModel m2 = build_block_model(nodrop, 5);
        Rng rng(1);
        auto train_out = nn::eval_graph(m2.graph, std::vector<Tensor>{Tensor::vec(seed_block)},
                                        nn::Mode::Train, &rng);
        auto infer_out = nn::eval_graph(m2.graph, std::vector<Tensor>{Tensor::vec(seed_block)},
                                        nn::Mode::Infer);
        CHECK(train_out[0].data == infer_out[0].data);
    }
}

TEST_CASE("pick_seed_block") {
    DatasetMixture mix = constant_mixture(0.25, 64);
    SUBCASE("corpus seed takes the opening block of a training buffer") {
        auto block = pick_seed_block(mix, 8, 7, false);
        CHECK(block == std::vector<double>(8, 0.25));
    }
    SUBCASE("noise seed is deterministic per seed") {
        auto a = pick_seed_block(mix, 8, 7, true);
        auto b = pick_seed_block(mix, 8, 7, true);
        CHECK(a == b);
        for (double v : a) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("export_sound_set") {
    const auto dir = std::filesystem::temp_directory_path() / "cadenza_blocks_export";
    std::filesystem::remove_all(dir);

    std::vector<audio::AudioBuffer> blocks(3);
    for (std::size_t i = 0; i < 3; ++i) {
        blocks[i].sample_rate = 8000.0;
        blocks[i].samples.assign(32, 0.1 * double(i + 1));
    }
    ExportProvenance prov;
    prov.seed = 99;
    prov.seed_source = "corpus";
    auto spec = export_sound_set(blocks, dir.string(), sampler::Envelope{}, "kit",
                                 sampler::MapStrategy::EvenSplit, &prov);

    CHECK(spec.entries.size() == 3);
    CHECK(std::filesystem::exists(dir / "gen_000.wav"));
    CHECK(std::filesystem::exists(dir / "gen_002.wav"));
    CHECK(std::filesystem::exists(dir / "kit.dspreset"));
    CHECK(std::filesystem::exists(dir / "kit.json"));

    auto back = audio::read_wav_file((dir / "gen_001.wav").string());
    CHECK(back.size() == 32);
    CHECK(back.samples[0] == doctest::Approx(0.2).epsilon(1e-3));
}

TEST_CASE("block model save and load") {
    BlockModelSpec spec;
    spec.block_size = 6;
    spec.width = 8;
    spec.layers = 1;
    BlockModel m = build_block_model(spec, 17);
    const auto path = std::filesystem::temp_directory_path() / "cadenza_blocks.czm";
    save_blocks(m, 8000.0, path.string());
    LoadedBlocks loaded = load_blocks(path.string());
    CHECK(loaded.sample_rate == 8000.0);
    CHECK(loaded.model.spec.block_size == 6);
    const std::vector<double> seed_block = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    auto a = generate_blocks(m, seed_block, 2, 8000.0);
    auto b = generate_blocks(loaded.model, seed_block, 2, 8000.0);
    CHECK(a.blocks[1].samples == b.blocks[1].samples);
}
