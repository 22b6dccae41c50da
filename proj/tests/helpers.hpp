#pragma once

// Test-side oracles, independent of the library's execution paths wherever
// they stand in judgment of one.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "cadenza/nn/graph.hpp"
#include "cadenza/nn/tape.hpp"

namespace oracle {

/// tanh through the exp identity, independent of std::tanh.
inline double ref_tanh(double x) {
    const double e = std::exp(-2.0 * x);
    return (1.0 - e) / (1.0 + e);
}

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Straight-line transcription of the gated-recurrent-unit equations for one
/// unit with scalar input. Written before the engine, kept independent of it.
inline double scalar_gru(double x, double h, double wz, double uz, double bz, double wr,
                         double ur, double br, double wh, double uh, double bh) {
    const double z = ref_sigmoid(wz * x + uz * h + bz);
    const double r = ref_sigmoid(wr * x + ur * h + br);
    const double e = std::exp(-2.0 * (wh * x + uh * (r * h) + bh));
    const double hcand = (1.0 - e) / (1.0 + e);
    return z * h + (1.0 - z) * hcand;
}

/// Loss of one example through the tape (forward only unless grads_out given).
/// Pure function of the graph parameters for fixed inputs/targets/seed.
inline double tape_loss(cadenza::nn::ModelGraph& g, const std::vector<cadenza::Tensor>& inputs,
                        const std::vector<cadenza::Tensor>& targets,
                        cadenza::nn::Mode mode = cadenza::nn::Mode::Infer,
                        std::uint64_t dropout_seed = 0,
                        cadenza::nn::ParamGradients* grads_out = nullptr,
                        std::vector<double> weights = {}) {
    using namespace cadenza;
    nn::Tape tape;
    nn::GraphSession session(g, tape);
    Rng rng(dropout_seed);
    auto outs = session.step(inputs, mode, &rng);
    if (weights.empty()) weights.assign(outs.size(), 1.0);
    std::vector<int> losses;
    for (std::size_t i = 0; i < outs.size(); ++i) losses.push_back(tape.mse(outs[i], targets[i]));
    const int total = tape.scalar_sum(losses, weights);
    const double loss = tape.value(total).data[0];
    if (grads_out) {
        tape.backward(total);
        grads_out->clear();
        session.accumulate_param_grads(*grads_out);
    }
    return loss;
}

/// Central finite differences against analytic gradients over every
/// parameter element. Elements below `abs_floor` in magnitude are compared
/// absolutely (they are indistinguishable from FD cancellation noise), the
/// rest relatively; returns the worst error seen.
inline double fd_gradcheck(cadenza::nn::ModelGraph& g, const std::function<double()>& loss_fn,
                           const cadenza::nn::ParamGradients& analytic, double step = 1e-5,
                           double abs_floor = 1e-8) {
    auto params = g.param_tensors();
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (std::size_t k = 0; k < params[i]->numel(); ++k) {
            double& p = params[i]->data[k];
            const double saved = p;
            p = saved + step;
            const double up = loss_fn();
            p = saved - step;
            const double down = loss_fn();
            p = saved;
            const double fd = (up - down) / (2.0 * step);
            const double an = analytic[i].data[k];
            const double mag = std::max(std::fabs(fd), std::fabs(an));
            const double err = (mag < abs_floor) ? std::fabs(fd - an) : std::fabs(fd - an) / mag;
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace oracle
