#include <doctest.h>

#include <cmath>

#include "cadenza/nn/graph.hpp"
#include "cadenza/nn/ops.hpp"
#include "cadenza/nn/serialize.hpp"
#include "cadenza/nn/train.hpp"
#include "helpers.hpp"

using namespace cadenza;
using namespace cadenza::nn;

TEST_CASE("dense_forward basics") {
    SUBCASE("identity weights pass the input through") {
        Tensor w({2, 2}, {1, 0, 0, 1});
        Tensor out = dense_forward(Tensor::vec({1, 2}), w, Tensor::vec({0, 0}),
                                   Activation::Linear);
        CHECK(out.data == std::vector<double>{1, 2});
    }
    SUBCASE("zero input isolates the bias") {
        Tensor w({2, 2}, {0.3, -0.7, 1.5, 2.0});
        Tensor out = dense_forward(Tensor::vec({0, 0}), w, Tensor::vec({3, -1}),
                                   Activation::Linear);
        CHECK(out.data == std::vector<double>{3, -1});
    }
    SUBCASE("scalar tanh evaluation matches the exp-identity oracle") {
        Tensor out = dense_forward(Tensor::vec({1}), Tensor({1, 1}, {2.0}), Tensor::vec({0}),
                                   Activation::Tanh);
        CHECK(out.data[0] == doctest::Approx(oracle::ref_tanh(2.0)).epsilon(1e-12));
        CHECK(out.data[0] == doctest::Approx(0.9640275800758169).epsilon(1e-12));
    }
    SUBCASE("shape mismatch names both shapes") {
        Tensor w({2, 3}, {1, 2, 3, 4, 5, 6});
        try {
            dense_forward(Tensor::vec({1, 2}), w, Tensor::vec({0, 0}), Activation::Linear);
            FAIL("expected ShapeError");
        } catch (const ShapeError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("(2,3)") != std::string::npos);
            CHECK(msg.find("(2)") != std::string::npos);
        }
    }
}

TEST_CASE("concat") {
    SUBCASE("ordered concatenation") {
        Tensor out = concat({Tensor::vec({1, 2, 3}), Tensor::vec({4, 5, 6})});
        CHECK(out.data == std::vector<double>{1, 2, 3, 4, 5, 6});
    }
    SUBCASE("empty operand rejected") {
        CHECK_THROWS_AS(concat({Tensor::vec({1}), Tensor::vec({})}), ShapeError);
    }
    SUBCASE("fewer than two inputs is an arity error") {
        CHECK_THROWS_AS(concat({Tensor::vec({1})}), ConfigError);
    }
    SUBCASE("three-way keeps order") {
        Tensor out = concat({Tensor::vec({1}), Tensor::vec({2}), Tensor::vec({3})});
        CHECK(out.data == std::vector<double>{1, 2, 3});
    }
    SUBCASE("output width is the sum of input widths for arbitrary arity") {
        Rng rng(99);
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t arity = 2 + rng.below(5);
            std::vector<Tensor> parts;
            std::size_t total = 0;
            for (std::size_t i = 0; i < arity; ++i) {
                const std::size_t len = 1 + rng.below(7);
                total += len;
                Tensor t = Tensor::zeros({len});
                for (double& v : t.data) v = rng.uniform(-1, 1);
                parts.push_back(t);
            }
            CHECK(concat(parts).length() == total);
        }
    }
}

TEST_CASE("dropout") {
    Rng rng(7);
    Tensor input = Tensor::zeros({64});
    for (double& v : input.data) v = rng.uniform(-1, 1);

    SUBCASE("inference mode is the exact identity") {
        Rng r(1);
        Tensor out = dropout_forward(input, 0.5, Mode::Infer, r);
        CHECK(out.data == input.data);
    }
    SUBCASE("zero rate is the identity in train mode") {
        Rng r(1);
        Tensor out = dropout_forward(input, 0.0, Mode::Train, r);
        CHECK(out.data == input.data);
    }
    SUBCASE("rate >= 1 is a config error") {
        Rng r(1);
        CHECK_THROWS_AS(dropout_forward(input, 1.0, Mode::Train, r), ConfigError);
    }
    SUBCASE("observed zero fraction over 1e6 elements stays near the rate") {
        Rng r(4242);
        Tensor big = Tensor::zeros({1000000});
        for (double& v : big.data) v = 1.0;
        Tensor out = dropout_forward(big, 0.5, Mode::Train, r);
        std::size_t zeros = 0;
        for (double v : out.data) {
            if (v == 0.0) ++zeros;
            else CHECK(v == 2.0); // survivors scaled by 1/(1-rate)
        }
        const double frac = double(zeros) / 1e6;
        CHECK(frac > 0.495);
        CHECK(frac < 0.505);
    }
}

TEST_CASE("gru_step") {
    auto zero_params = [](std::size_t units, std::size_t in) {
        GruParams p;
        p.wz = Tensor::matrix(units, in);
        p.uz = Tensor::matrix(units, units);
        p.bz = Tensor::zeros({units});
        p.wr = Tensor::matrix(units, in);
        p.ur = Tensor::matrix(units, units);
        p.br = Tensor::zeros({units});
        p.wh = Tensor::matrix(units, in);
        p.uh = Tensor::matrix(units, units);
        p.bh = Tensor::zeros({units});
        return p;
    };

    SUBCASE("all-zero parameters halve the hidden state") {
        // z = sigmoid(0) = 0.5, candidate = tanh(0) = 0, h' = 0.5*1 + 0.5*0
        Tensor out = gru_step(Tensor::vec({0.0}), Tensor::vec({1.0}), zero_params(1, 1));
        CHECK(out.data[0] == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("zero hidden state is a fixed point of zero parameters") {
        Tensor out = gru_step(Tensor::vec({0.0}), Tensor::vec({0.0}), zero_params(1, 1));
        CHECK(out.data[0] == 0.0);
    }
    SUBCASE("random parameters match the straight-line scalar oracle") {
        Rng rng(42);
        for (int trial = 0; trial < 50; ++trial) {
            GruParams p = zero_params(1, 1);
            const double wz = rng.uniform(-2, 2), uz = rng.uniform(-2, 2), bz = rng.uniform(-1, 1);
            const double wr = rng.uniform(-2, 2), ur = rng.uniform(-2, 2), br = rng.uniform(-1, 1);
            const double wh = rng.uniform(-2, 2), uh = rng.uniform(-2, 2), bh = rng.uniform(-1, 1);
            p.wz.data[0] = wz; p.uz.data[0] = uz; p.bz.data[0] = bz;
            p.wr.data[0] = wr; p.ur.data[0] = ur; p.br.data[0] = br;
            p.wh.data[0] = wh; p.uh.data[0] = uh; p.bh.data[0] = bh;
            const double x = rng.uniform(-1, 1), h = rng.uniform(-1, 1);
            Tensor out = gru_step(Tensor::vec({x}), Tensor::vec({h}), p);
            CHECK(out.data[0] ==
                  doctest::Approx(oracle::scalar_gru(x, h, wz, uz, bz, wr, ur, br, wh, uh, bh))
                      .epsilon(1e-12));
        }
    }
    SUBCASE("shape mismatch is reported") {
        CHECK_THROWS_AS(gru_step(Tensor::vec({1.0, 2.0}), Tensor::vec({0.0}), zero_params(1, 1)),
                        ShapeError);
    }
}

TEST_CASE("mse_loss") {
    CHECK(mse_loss(Tensor::vec({1, 2, 3}), Tensor::vec({1, 2, 3})) == 0.0);
    CHECK(mse_loss(Tensor::vec({0, 0}), Tensor::vec({1, 1})) == doctest::Approx(1.0));
    CHECK(mse_loss(Tensor::vec({1, 2, 3}), Tensor::vec({2, 2, 5})) ==
          doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(mse_loss(Tensor::vec({1}), Tensor::vec({1, 2})), ShapeError);

    SUBCASE("symmetric and nonnegative, zero only on equal inputs") {
        Rng rng(5);
        for (int trial = 0; trial < 30; ++trial) {
            Tensor a = Tensor::zeros({8}), b = Tensor::zeros({8});
            for (std::size_t i = 0; i < 8; ++i) {
                a.data[i] = rng.uniform(-3, 3);
                b.data[i] = rng.uniform(-3, 3);
            }
            const double ab = mse_loss(a, b);
            CHECK(ab == mse_loss(b, a));
            CHECK(ab >= 0.0);
            if (a.data != b.data) CHECK(ab > 0.0);
        }
    }
}

TEST_CASE("backward") {
    SUBCASE("single linear neuron has the closed-form gradient 2(y_hat - y) x") {
        GraphBuilder b;
        const int in = b.input(2);
        const int out = b.dense(in, 1, Activation::Linear);
        ModelGraph g = b.build({out}, 11);
        g.nodes[1].weights = Tensor({1, 2}, {0.5, -0.25});
        g.nodes[1].bias = Tensor::vec({0.1});

        const Tensor x = Tensor::vec({1.5, -2.0});
        const Tensor y = Tensor::vec({0.7});
        ParamGradients grads;
        oracle::tape_loss(g, {x}, {y}, Mode::Infer, 0, &grads);

        const double y_hat = 0.5 * 1.5 + (-0.25) * (-2.0) + 0.1;
        const double d = 2.0 * (y_hat - 0.7);
        CHECK(grads[0].data[0] == doctest::Approx(d * 1.5).epsilon(1e-12));
        CHECK(grads[0].data[1] == doctest::Approx(d * -2.0).epsilon(1e-12));
        CHECK(grads[1].data[0] == doctest::Approx(d).epsilon(1e-12));
    }

    SUBCASE("finite differences confirm gradients for every layer kind") {
        GraphBuilder b;
        const int in1 = b.input(3);
        const int in2 = b.input(2);
        const int d1 = b.dense(in1, 4, Activation::Tanh);
        const int d2 = b.dense(in2, 4, Activation::Sigmoid);
        const int merged = b.concat({d1, d2});
        const int drop = b.dropout(merged, 0.5);
        const int gru_node = b.gru(drop, 3);
        const int head = b.dense(gru_node, 2, Activation::Relu);
        ModelGraph g = b.build({head}, 1234);

        const std::vector<Tensor> inputs = {Tensor::vec({0.3, -0.8, 0.5}),
                                            Tensor::vec({0.9, -0.1})};
        const std::vector<Tensor> targets = {Tensor::vec({0.2, -0.4})};

        ParamGradients grads;
        oracle::tape_loss(g, inputs, targets, Mode::Train, 77, &grads);
        auto loss_fn = [&]() {
            return oracle::tape_loss(g, inputs, targets, Mode::Train, 77);
        };
        CHECK(oracle::fd_gradcheck(g, loss_fn, grads) < 1e-4);
    }

    SUBCASE("zero output gradient gives zero parameter gradients") {
        GraphBuilder b;
        const int in = b.input(2);
        const int out = b.dense(in, 2, Activation::Tanh);
        ModelGraph g = b.build({out}, 3);
        GraphExec exec(g);
        exec.forward(std::vector<Tensor>{Tensor::vec({0.5, 0.5})});
        auto grads = exec.backward({Tensor::vec({0.0, 0.0})});
        for (const auto& t : grads)
            for (double v : t.data) CHECK(v == 0.0);
    }

    SUBCASE("backward without a recorded forward is a state error") {
        GraphBuilder b;
        const int in = b.input(1);
        ModelGraph g = b.build({b.dense(in, 1, Activation::Linear)}, 0);
        GraphExec exec(g);
        CHECK_THROWS_AS(exec.backward({Tensor::vec({1.0})}), StateError);
    }
}

TEST_CASE("train") {
    auto make_linear_graph = [](std::uint64_t seed) {
        GraphBuilder b;
        const int in = b.input(1);
        return b.build({b.dense(in, 1, Activation::Linear)}, seed);
    };
    auto make_line_data = []() {
        std::vector<Example> ex;
        for (int i = -5; i <= 5; ++i) {
            const double x = double(i) / 5.0;
            ex.push_back({{Tensor::vec({x})}, {Tensor::vec({2.0 * x})}});
        }
        return ex;
    };

    SUBCASE("a one-layer linear model learns y = 2x") {
        ModelGraph g = make_linear_graph(21);
        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.learning_rate = 0.05;
        cfg.seed = 9;
        auto report = train(g, make_line_data(), cfg);
        CHECK(report.final_loss() < 1e-4);
    }

    SUBCASE("zero epochs changes nothing and reports nothing") {
        ModelGraph g = make_linear_graph(21);
        const double w_before = g.nodes[1].weights.data[0];
        TrainConfig cfg;
        cfg.epochs = 0;
        auto report = train(g, make_line_data(), cfg);
        CHECK(report.epoch_loss.empty());
        CHECK(g.nodes[1].weights.data[0] == w_before);
    }

    SUBCASE("identical seeds give identical loss trajectories") {
        TrainConfig cfg;
        cfg.epochs = 20;
        cfg.seed = 31;
        ModelGraph g1 = make_linear_graph(5);
        ModelGraph g2 = make_linear_graph(5);
        auto r1 = train(g1, make_line_data(), cfg);
        auto r2 = train(g2, make_line_data(), cfg);
        CHECK(r1.epoch_loss == r2.epoch_loss);
        CHECK(g1.nodes[1].weights.data == g2.nodes[1].weights.data);
    }

    SUBCASE("empty dataset is a data error") {
        ModelGraph g = make_linear_graph(21);
        TrainConfig cfg;
        CHECK_THROWS_AS(train(g, {}, cfg), DataError);
    }
}

TEST_CASE("graph determinism and serialization") {
    auto build = [](std::uint64_t seed) {
        GraphBuilder b;
        const int in = b.input(4);
        const int d = b.dense(in, 8, Activation::Tanh);
        const int dr = b.dropout(d, 0.25);
        const int gr = b.gru(dr, 4);
        return b.build({b.dense(gr, 2, Activation::Linear)}, seed);
    };

    SUBCASE("equal specs and seed give bitwise-equal parameters") {
        ModelGraph a = build(77), b2 = build(77);
        bool equal = true;
        auto pa = a.param_tensors(), pb = b2.param_tensors();
        for (std::size_t i = 0; i < pa.size(); ++i)
            if (pa[i]->data != pb[i]->data) equal = false;
        CHECK(equal);
        ModelGraph c = build(78);
        CHECK(c.nodes[1].weights.data != a.nodes[1].weights.data);
    }

    SUBCASE("save/load round-trips bit-exactly") {
        ModelGraph g = build(123);
        g.set_meta("sample_rate", "44100");
        g.set_meta("note", "two words here");
        std::ostringstream os;
        save_model(g, os);
        std::istringstream is(os.str());
        ModelGraph r = load_model(is);

        CHECK(r.rng_seed == g.rng_seed);
        CHECK(r.nodes.size() == g.nodes.size());
        REQUIRE(r.find_meta("note") != nullptr);
        CHECK(*r.find_meta("note") == "two words here");
        auto pg = g.param_tensors(), pr = r.param_tensors();
        REQUIRE(pg.size() == pr.size());
        for (std::size_t i = 0; i < pg.size(); ++i) CHECK(pg[i]->data == pr[i]->data);

        // and the round-tripped graph computes identical outputs
        const Tensor x = Tensor::vec({0.1, -0.2, 0.3, -0.4});
        auto o1 = eval_graph(g, std::vector<Tensor>{x});
        auto o2 = eval_graph(r, std::vector<Tensor>{x});
        CHECK(o1[0].data == o2[0].data);
    }

    SUBCASE("forward outputs are deterministic for fixed seed") {
        ModelGraph g = build(9);
        const Tensor x = Tensor::vec({0.5, 0.5, -0.5, -0.5});
        Rng r1(3), r2(3);
        auto a = eval_graph(g, std::vector<Tensor>{x}, Mode::Train, &r1);
        auto b2 = eval_graph(g, std::vector<Tensor>{x}, Mode::Train, &r2);
        CHECK(a[0].data == b2[0].data);
    }

    SUBCASE("malformed model files are rejected") {
        CHECK_THROWS_AS([] {
            std::istringstream is("not a model\n");
            return load_model(is);
        }(), ParseError);
        // truncated after the header
        CHECK_THROWS_AS([] {
            std::istringstream is("cadenza-model 1\nseed 3\nnodes 2\nnode 0 input width 2\n");
            return load_model(is);
        }(), ParseError);
    }

    SUBCASE("non-finite inputs are rejected before any forward pass") {
        ModelGraph g = build(9);
        Tensor bad = Tensor::vec({0.5, std::nan(""), 0.0, 0.0});
        CHECK_THROWS_AS(eval_graph(g, std::vector<Tensor>{bad}), NumericError);
    }

    SUBCASE("tensor construction validates shape against data length") {
        CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    }
}
