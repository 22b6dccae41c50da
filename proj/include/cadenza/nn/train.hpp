#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cadenza/core/error.hpp"
#include "cadenza/core/rng.hpp"
#include "cadenza/nn/graph.hpp"

namespace cadenza::nn {

enum class OptimizerKind { Sgd, Adam };

inline const char* to_string(OptimizerKind k) {
    return k == OptimizerKind::Sgd ? "sgd" : "adam";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected sgd|adam)");
}

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Adam;

    void validate() const {
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    }
};

struct TrainReport {
    std::vector<double> epoch_loss;                     // mean total loss per epoch
    std::vector<std::vector<double>> per_output_loss;   // [output][epoch]
    bool aborted = false;                               // divergence guard tripped
    std::string abort_reason;
    std::size_t clipped_updates = 0;                    // gradient-clip events

    double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

/// Flat-state optimizer over the graph's canonical parameter list.
class Optimizer {
public:
    Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

    void step(std::vector<Tensor*>& params, const ParamGradients& grads) {
        if (kind_ == OptimizerKind::Sgd) {
            for (std::size_t i = 0; i < params.size(); ++i)
                for (std::size_t k = 0; k < params[i]->numel(); ++k)
                    params[i]->data[k] -= lr_ * grads[i].data[k];
            return;
        }
        if (m_.empty()) {
            for (auto* p : params) {
                m_.push_back(Tensor::zeros(p->shape));
                v_.push_back(Tensor::zeros(p->shape));
            }
        }
        ++t_;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double bc1 = 1.0 - std::pow(b1, double(t_));
        const double bc2 = 1.0 - std::pow(b2, double(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            for (std::size_t k = 0; k < params[i]->numel(); ++k) {
                const double g = grads[i].data[k];
                double& m = m_[i].data[k];
                double& v = v_[i].data[k];
                m = b1 * m + (1.0 - b1) * g;
                v = b2 * v + (1.0 - b2) * g * g;
                params[i]->data[k] -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps);
            }
        }
    }

private:
    OptimizerKind kind_;
    double lr_;
    std::uint64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

/// Euclidean norm over a gradient set.
inline double grad_norm(const ParamGradients& grads) {
    double acc = 0.0;
    for (const auto& g : grads)
        for (double v : g.data) acc += v * v;
    return std::sqrt(acc);
}

inline void scale_grads(ParamGradients& grads, double s) {
    for (auto& g : grads)
        for (double& v : g.data) v *= s;
}

/// One training example: a tuple of graph inputs and one target per output.
struct Example {
    std::vector<Tensor> inputs;
    std::vector<Tensor> targets;
};

/// Generic seeded mini-batch trainer. Total loss per example is the weighted
/// sum of per-output MSE losses (weights default to 1). Parameters are
/// updated in place; the loss trajectory is bit-reproducible for a fixed seed.
inline TrainReport train(ModelGraph& graph, const std::vector<Example>& examples,
                         const TrainConfig& cfg, std::vector<double> loss_weights = {}) {
    cfg.validate();
    if (examples.empty()) throw DataError("train: empty dataset");
    const std::size_t n_out = graph.outputs.size();
    if (loss_weights.empty()) loss_weights.assign(n_out, 1.0);
    if (loss_weights.size() != n_out)
        throw ConfigError("train: loss weight count " + std::to_string(loss_weights.size()) +
                          " does not match output count " + std::to_string(n_out));

    TrainReport report;
    report.per_output_loss.assign(n_out, {});
    if (cfg.epochs == 0) return report;

    Rng shuffle_rng = Rng(cfg.seed);
    Rng dropout_rng = shuffle_rng.split();
    Optimizer opt(cfg.optimizer, cfg.learning_rate);
    auto params = graph.param_tensors();

    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_total = 0.0;
        std::vector<double> epoch_per_out(n_out, 0.0);

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            ParamGradients batch_grads;
            for (std::size_t e = start; e < end; ++e) {
                const Example& ex = examples[order[e]];
                Tape tape;
                GraphSession session(graph, tape);
                auto outs = session.step(ex.inputs, Mode::Train, &dropout_rng);
                std::vector<int> losses;
                losses.reserve(n_out);
                for (std::size_t o = 0; o < n_out; ++o) {
                    losses.push_back(tape.mse(outs[o], ex.targets[o]));
                    epoch_per_out[o] += tape.value(losses.back()).data[0];
                }
                const int total = tape.scalar_sum(losses, loss_weights);
                epoch_total += tape.value(total).data[0];
                tape.backward(total);
                session.accumulate_param_grads(batch_grads);
            }
            scale_grads(batch_grads, 1.0 / double(end - start));
            opt.step(params, batch_grads);
        }

        report.epoch_loss.push_back(epoch_total / double(order.size()));
        for (std::size_t o = 0; o < n_out; ++o)
            report.per_output_loss[o].push_back(epoch_per_out[o] / double(order.size()));
    }
    return report;
}

} // namespace cadenza::nn
