#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cadenza/core/error.hpp"
#include "cadenza/core/rng.hpp"
#include "cadenza/core/tensor.hpp"
#include "cadenza/nn/ops.hpp"
#include "cadenza/nn/tape.hpp"

namespace cadenza::nn {

enum class LayerKind { Input, Dense, Dropout, Gru, Concat };

inline const char* to_string(LayerKind k) {
    switch (k) {
    case LayerKind::Input: return "input";
    case LayerKind::Dense: return "dense";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Gru: return "gru";
    case LayerKind::Concat: return "concat";
    }
    return "?";
}

struct LayerSpec {
    LayerKind kind{LayerKind::Input};
    std::size_t width = 0;                    // Dense/Gru units, Input dimension
    Activation activation = Activation::Linear;
    double drop_rate = 0.0;                   // Dropout only
};

struct GraphNode {
    LayerSpec spec;
    std::vector<int> inputs; // indices of earlier nodes (acyclic by construction)
    std::size_t out_width = 0;
    Tensor weights, bias; // Dense
    GruParams gru;        // Gru
};

/// Composable computation graph of layer specs with trainable parameters.
/// Nodes are stored in topological order; the first nodes are the graph inputs.
class ModelGraph {
public:
    std::vector<GraphNode> nodes;
    std::vector<int> outputs;
    std::uint64_t rng_seed = 0;
    /// Pipeline-specific key/value metadata persisted alongside the graph.
    std::vector<std::pair<std::string, std::string>> meta;

    std::size_t num_inputs() const {
        std::size_t n = 0;
        for (const auto& node : nodes)
            if (node.spec.kind == LayerKind::Input) ++n;
        return n;
    }

    std::size_t output_width(int node_id) const { return nodes[std::size_t(node_id)].out_width; }

    void set_meta(const std::string& key, const std::string& value) {
        for (auto& kv : meta)
            if (kv.first == key) {
                kv.second = value;
                return;
            }
        meta.emplace_back(key, value);
    }

    const std::string* find_meta(const std::string& key) const {
        for (const auto& kv : meta)
            if (kv.first == key) return &kv.second;
        return nullptr;
    }

    /// Visit parameter tensors in canonical order (node order; dense W then b;
    /// gru Wz,Uz,bz,Wr,Ur,br,Wh,Uh,bh). Serialization, optimizers and gradient
    /// accumulation all rely on this ordering.
    template <class Fn>
    void for_each_param(Fn&& fn) {
        for (auto& n : nodes) {
            if (n.spec.kind == LayerKind::Dense) {
                fn(n.weights);
                fn(n.bias);
            } else if (n.spec.kind == LayerKind::Gru) {
                fn(n.gru.wz);
                fn(n.gru.uz);
                fn(n.gru.bz);
                fn(n.gru.wr);
                fn(n.gru.ur);
                fn(n.gru.br);
                fn(n.gru.wh);
                fn(n.gru.uh);
                fn(n.gru.bh);
            }
        }
    }

    template <class Fn>
    void for_each_param(Fn&& fn) const {
        const_cast<ModelGraph*>(this)->for_each_param(
            [&](Tensor& t) { fn(static_cast<const Tensor&>(t)); });
    }

    std::vector<Tensor*> param_tensors() {
        std::vector<Tensor*> out;
        for_each_param([&](Tensor& t) { out.push_back(&t); });
        return out;
    }

    std::size_t num_param_scalars() const {
        std::size_t n = 0;
        for_each_param([&](const Tensor& t) { n += t.numel(); });
        return n;
    }
};

/// Incremental graph construction. Nodes can only reference already built
/// nodes, so the result is acyclic and topologically ordered by construction.
class GraphBuilder {
public:
    int input(std::size_t width) {
        if (width == 0) throw ConfigError("graph input width must be >= 1");
        GraphNode n;
        n.spec = {LayerKind::Input, width, Activation::Linear, 0.0};
        n.out_width = width;
        return add(std::move(n), {});
    }

    int dense(int in, std::size_t width, Activation act) {
        if (width == 0) throw ConfigError("dense width must be >= 1");
        GraphNode n;
        n.spec = {LayerKind::Dense, width, act, 0.0};
        n.out_width = width;
        return add(std::move(n), {in});
    }

    int dropout(int in, double rate) {
        if (rate < 0.0 || rate >= 1.0)
            throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
        GraphNode n;
        n.spec = {LayerKind::Dropout, 0, Activation::Linear, rate};
        n.out_width = width_of(in);
        return add(std::move(n), {in});
    }

    int gru(int in, std::size_t units) {
        if (units == 0) throw ConfigError("gru width must be >= 1");
        GraphNode n;
        n.spec = {LayerKind::Gru, units, Activation::Linear, 0.0};
        n.out_width = units;
        return add(std::move(n), {in});
    }

    int concat(const std::vector<int>& ins) {
        if (ins.size() < 2)
            throw ConfigError("concat node needs >= 2 inputs, got " + std::to_string(ins.size()));
        GraphNode n;
        n.spec = {LayerKind::Concat, 0, Activation::Linear, 0.0};
        std::size_t total = 0;
        for (int id : ins) total += width_of(id);
        n.out_width = total;
        return add(std::move(n), ins);
    }

    /// Finalize: initialize parameters (Glorot uniform weights, zero biases)
    /// from the seed. Equal specs + equal seed give bitwise-equal parameters.
    ModelGraph build(std::vector<int> outputs, std::uint64_t seed) {
        if (outputs.empty()) throw ConfigError("graph needs at least one output");
        for (int id : outputs) width_of(id);
        ModelGraph g;
        g.nodes = std::move(nodes_);
        g.outputs = std::move(outputs);
        g.rng_seed = seed;
        Rng rng(seed);
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            GraphNode& n = g.nodes[i];
            if (n.spec.kind == LayerKind::Dense) {
                const std::size_t in_w = g.nodes[std::size_t(n.inputs[0])].out_width;
                n.weights = glorot(n.spec.width, in_w, rng);
                n.bias = Tensor::zeros({n.spec.width});
            } else if (n.spec.kind == LayerKind::Gru) {
                const std::size_t in_w = g.nodes[std::size_t(n.inputs[0])].out_width;
                const std::size_t u = n.spec.width;
                n.gru.wz = glorot(u, in_w, rng);
                n.gru.uz = glorot(u, u, rng);
                n.gru.bz = Tensor::zeros({u});
                n.gru.wr = glorot(u, in_w, rng);
                n.gru.ur = glorot(u, u, rng);
                n.gru.br = Tensor::zeros({u});
                n.gru.wh = glorot(u, in_w, rng);
                n.gru.uh = glorot(u, u, rng);
                n.gru.bh = Tensor::zeros({u});
            }
        }
        return g;
    }

private:
    std::size_t width_of(int id) {
        if (id < 0 || std::size_t(id) >= nodes_.size())
            throw ConfigError("graph node reference " + std::to_string(id) + " out of range");
        return nodes_[std::size_t(id)].out_width;
    }

    int add(GraphNode n, std::vector<int> ins) {
        for (int id : ins) width_of(id);
        n.inputs = std::move(ins);
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    static Tensor glorot(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
        Tensor w = Tensor::matrix(fan_out, fan_in);
        const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
        for (double& v : w.data) v = rng.uniform(-limit, limit);
        return w;
    }

    std::vector<GraphNode> nodes_;
};

/// Hidden states for the recurrent nodes of a graph, in node order.
struct HiddenState {
    std::vector<Tensor> h; // one per Gru node
};

inline HiddenState make_hidden(const ModelGraph& g) {
    HiddenState s;
    for (const auto& n : g.nodes)
        if (n.spec.kind == LayerKind::Gru) s.h.push_back(Tensor::zeros({n.spec.width}));
    return s;
}

/// Reference (tape-free) evaluation of a graph. Recurrent nodes read and
/// update `hidden` when provided, otherwise start from zeros.
inline std::vector<Tensor> eval_graph(const ModelGraph& g, std::span<const Tensor> inputs,
                                      Mode mode = Mode::Infer, Rng* dropout_rng = nullptr,
                                      HiddenState* hidden = nullptr) {
    if (inputs.size() != g.num_inputs())
        throw ShapeError("eval_graph: expected " + std::to_string(g.num_inputs()) +
                         " inputs, got " + std::to_string(inputs.size()));
    std::vector<Tensor> vals(g.nodes.size());
    std::size_t in_idx = 0, gru_idx = 0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const GraphNode& n = g.nodes[i];
        switch (n.spec.kind) {
        case LayerKind::Input: {
            const Tensor& t = inputs[in_idx++];
            if (t.length() != n.out_width)
                throw ShapeError("eval_graph: input " + std::to_string(in_idx - 1) + " shape " +
                                 t.shape_string() + " does not match declared width (" +
                                 std::to_string(n.out_width) + ")");
            require_finite(t, "eval_graph input");
            vals[i] = t;
            break;
        }
        case LayerKind::Dense:
            vals[i] = dense_forward(vals[std::size_t(n.inputs[0])], n.weights, n.bias,
                                    n.spec.activation);
            break;
        case LayerKind::Dropout: {
            if (mode == Mode::Train && n.spec.drop_rate > 0.0) {
                if (!dropout_rng)
                    throw StateError("eval_graph: train-mode dropout requires an RNG");
                vals[i] = dropout_forward(vals[std::size_t(n.inputs[0])], n.spec.drop_rate,
                                          Mode::Train, *dropout_rng);
            } else {
                vals[i] = vals[std::size_t(n.inputs[0])];
            }
            break;
        }
        case LayerKind::Gru: {
            Tensor zero;
            Tensor* h = nullptr;
            if (hidden) {
                h = &hidden->h[gru_idx];
            } else {
                zero = Tensor::zeros({n.spec.width});
                h = &zero;
            }
            Tensor out = gru_step(vals[std::size_t(n.inputs[0])], *h, n.gru);
            if (hidden) hidden->h[gru_idx] = out;
            ++gru_idx;
            vals[i] = std::move(out);
            break;
        }
        case LayerKind::Concat: {
            std::vector<Tensor> parts;
            parts.reserve(n.inputs.size());
            for (int id : n.inputs) parts.push_back(vals[std::size_t(id)]);
            vals[i] = concat(parts);
            break;
        }
        }
    }
    std::vector<Tensor> outs;
    outs.reserve(g.outputs.size());
    for (int id : g.outputs) outs.push_back(vals[std::size_t(id)]);
    return outs;
}

/// Ties a graph to a tape for one or more recorded forward steps.
/// Parameters are pushed once; recurrent hidden slots flow step to step so a
/// multi-step session backpropagates through time within the tape.
class GraphSession {
public:
    GraphSession(ModelGraph& g, Tape& tape) : graph_(&g), tape_(&tape) {
        g.for_each_param([&](Tensor& t) { param_slots_.push_back(tape.leaf(t)); });
        reset_hidden();
    }

    /// Zero the recurrent state (fresh constant leaves).
    void reset_hidden() {
        hidden_slots_.clear();
        for (const auto& n : graph_->nodes)
            if (n.spec.kind == LayerKind::Gru)
                hidden_slots_.push_back(tape_->leaf(Tensor::zeros({n.spec.width})));
    }

    std::vector<int> step(std::span<const Tensor> inputs, Mode mode, Rng* dropout_rng = nullptr) {
        const ModelGraph& g = *graph_;
        if (inputs.size() != g.num_inputs())
            throw ShapeError("session step: expected " + std::to_string(g.num_inputs()) +
                             " inputs, got " + std::to_string(inputs.size()));
        std::vector<int> slots(g.nodes.size(), -1);
        std::size_t in_idx = 0, gru_idx = 0, p = 0;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            const GraphNode& n = g.nodes[i];
            switch (n.spec.kind) {
            case LayerKind::Input: {
                const Tensor& t = inputs[in_idx++];
                if (t.length() != n.out_width)
                    throw ShapeError("session step: input shape " + t.shape_string() +
                                     " does not match declared width (" +
                                     std::to_string(n.out_width) + ")");
                require_finite(t, "session input");
                slots[i] = tape_->leaf(t);
                break;
            }
            case LayerKind::Dense: {
                const int w = param_slots_[p++];
                const int b = param_slots_[p++];
                slots[i] = tape_->activation(tape_->affine(w, b, slots[std::size_t(n.inputs[0])]),
                                             n.spec.activation);
                break;
            }
            case LayerKind::Dropout: {
                const int x = slots[std::size_t(n.inputs[0])];
                if (mode == Mode::Train && n.spec.drop_rate > 0.0) {
                    if (!dropout_rng)
                        throw StateError("session step: train-mode dropout requires an RNG");
                    slots[i] = tape_->dropout(x, n.spec.drop_rate, *dropout_rng);
                } else {
                    slots[i] = x;
                }
                break;
            }
            case LayerKind::Gru: {
                const int wz = param_slots_[p++], uz = param_slots_[p++], bz = param_slots_[p++];
                const int wr = param_slots_[p++], ur = param_slots_[p++], br = param_slots_[p++];
                const int wh = param_slots_[p++], uh = param_slots_[p++], bh = param_slots_[p++];
                const int x = slots[std::size_t(n.inputs[0])];
                const int h = hidden_slots_[gru_idx];
                const int z = tape_->activation(
                    tape_->add(tape_->affine(wz, bz, x), tape_->matvec(uz, h)),
                    Activation::Sigmoid);
                const int rr = tape_->activation(
                    tape_->add(tape_->affine(wr, br, x), tape_->matvec(ur, h)),
                    Activation::Sigmoid);
                const int hcand = tape_->activation(
                    tape_->add(tape_->affine(wh, bh, x), tape_->matvec(uh, tape_->mul(rr, h))),
                    Activation::Tanh);
                const int hnew =
                    tape_->add(tape_->mul(z, h), tape_->mul(tape_->one_minus(z), hcand));
                hidden_slots_[gru_idx] = hnew;
                ++gru_idx;
                slots[i] = hnew;
                break;
            }
            case LayerKind::Concat: {
                std::vector<int> parts;
                parts.reserve(n.inputs.size());
                for (int id : n.inputs) parts.push_back(slots[std::size_t(id)]);
                slots[i] = tape_->concat2plus(parts);
                break;
            }
            }
        }
        std::vector<int> outs;
        outs.reserve(g.outputs.size());
        for (int id : g.outputs) outs.push_back(slots[std::size_t(id)]);
        return outs;
    }

    /// After tape.backward(), add this session's parameter gradients into
    /// `acc` (canonical parameter order). `acc` is created on first use.
    void accumulate_param_grads(std::vector<Tensor>& acc) const {
        if (acc.empty()) {
            acc.reserve(param_slots_.size());
            for (int s : param_slots_) acc.push_back(Tensor::zeros(tape_->value(s).shape));
        }
        for (std::size_t i = 0; i < param_slots_.size(); ++i) {
            const Tensor& g = tape_->grad(param_slots_[i]);
            for (std::size_t k = 0; k < g.numel(); ++k) acc[i].data[k] += g.data[k];
        }
    }

private:
    ModelGraph* graph_;
    Tape* tape_;
    std::vector<int> param_slots_;
    std::vector<int> hidden_slots_;
};

/// Per-parameter gradients, same order and shapes as the graph parameters.
using ParamGradients = std::vector<Tensor>;

/// One-shot forward/backward wrapper: forward records a pass, backward
/// consumes it and returns dLoss/dParam for every trainable parameter.
class GraphExec {
public:
    explicit GraphExec(ModelGraph& g) : graph_(&g) {}

    std::vector<Tensor> forward(std::span<const Tensor> inputs, Mode mode = Mode::Infer,
                                std::uint64_t dropout_seed = 0) {
        tape_ = std::make_unique<Tape>();
        session_ = std::make_unique<GraphSession>(*graph_, *tape_);
        Rng rng(dropout_seed);
        out_slots_ = session_->step(inputs, mode, &rng);
        std::vector<Tensor> outs;
        outs.reserve(out_slots_.size());
        for (int s : out_slots_) outs.push_back(tape_->value(s));
        return outs;
    }

    /// Seed each output with its loss gradient and return parameter gradients.
    ParamGradients backward(const std::vector<Tensor>& output_grads) {
        if (!tape_) throw StateError("backward() without a recorded forward pass");
        if (output_grads.size() != out_slots_.size())
            throw ShapeError("backward: expected " + std::to_string(out_slots_.size()) +
                             " output gradients, got " + std::to_string(output_grads.size()));
        // Fold multiple outputs into one scalar-free reverse sweep by chaining
        // the seeds through a shared root when needed.
        if (out_slots_.size() == 1) {
            tape_->backward(out_slots_[0], output_grads[0]);
        } else {
            // Sum of <out_i, seed_i> has exactly the requested output gradients.
            std::vector<int> dots;
            for (std::size_t i = 0; i < out_slots_.size(); ++i) {
                Tensor seed = output_grads[i];
                int prod = tape_->mul_const(out_slots_[i], std::move(seed));
                // reduce to scalar via mse-free path: scalar_sum over components
                // is not available for vectors, so use a constant matvec of ones.
                Tensor ones = Tensor::matrix(1, tape_->value(prod).numel());
                for (double& v : ones.data) v = 1.0;
                dots.push_back(tape_->matvec_const(std::move(ones), prod));
            }
            std::vector<double> w(dots.size(), 1.0);
            tape_->backward(tape_->scalar_sum(dots, w));
        }
        ParamGradients grads;
        session_->accumulate_param_grads(grads);
        tape_.reset();
        session_.reset();
        return grads;
    }

private:
    ModelGraph* graph_;
    std::unique_ptr<Tape> tape_;
    std::unique_ptr<GraphSession> session_;
    std::vector<int> out_slots_;
};

} // namespace cadenza::nn
