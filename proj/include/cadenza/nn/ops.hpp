#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cadenza/core/error.hpp"
#include "cadenza/core/rng.hpp"
#include "cadenza/core/tensor.hpp"

namespace cadenza::nn {

enum class Activation { Tanh, Relu, Sigmoid, Linear };

inline const char* to_string(Activation a) {
    switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Linear: return "linear";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "linear") return Activation::Linear;
    throw ConfigError("unknown activation '" + s + "' (expected tanh|relu|sigmoid|linear)");
}

enum class Mode { Train, Infer };

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double apply_act(double x, Activation a) {
    switch (a) {
    case Activation::Tanh: return std::tanh(x);
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Linear: return x;
    }
    return x;
}

// Four-lane dot product with a fixed combine order. Every execution path
// (tape, reference eval, streaming) goes through these helpers so their
// floating point results are bit-identical; the lanes also break the FP add
// dependency chain, which the realtime stream needs.
inline double dot(const double* row, const double* x, std::size_t n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        a0 += row[j] * x[j];
        a1 += row[j + 1] * x[j + 1];
        a2 += row[j + 2] * x[j + 2];
        a3 += row[j + 3] * x[j + 3];
    }
    double tail = 0.0;
    for (; j < n; ++j) tail += row[j] * x[j];
    return ((a0 + a2) + (a1 + a3)) + tail;
}

// out[i] = sum_j W[i,j] * x[j] + b[i]; accumulation starts at zero, bias added last.
inline void affine(const Tensor& w, const Tensor& b, const double* x, double* out) {
    const std::size_t rows = w.shape[0], cols = w.shape[1];
    const double* wp = w.data.data();
    for (std::size_t i = 0; i < rows; ++i) out[i] = dot(wp + i * cols, x, cols) + b.data[i];
}

inline void matvec(const Tensor& w, const double* x, double* out) {
    const std::size_t rows = w.shape[0], cols = w.shape[1];
    const double* wp = w.data.data();
    for (std::size_t i = 0; i < rows; ++i) out[i] = dot(wp + i * cols, x, cols);
}

inline void apply_act(double* v, std::size_t n, Activation a) {
    for (std::size_t i = 0; i < n; ++i) v[i] = apply_act(v[i], a);
}

} // namespace detail

/// Fully connected layer: activation(W.x + b).
/// weights shape (out, in), input length in, bias length out.
inline Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                            Activation activation) {
    if (!weights.is_matrix())
        throw ShapeError("dense_forward: weights must be 2-D, got " + weights.shape_string());
    if (!input.is_vector() || input.length() != weights.cols())
        throw ShapeError("dense_forward: weights " + weights.shape_string() +
                         " incompatible with input " + input.shape_string());
    if (bias.numel() != weights.rows())
        throw ShapeError("dense_forward: bias " + bias.shape_string() +
                         " incompatible with weights " + weights.shape_string());
    Tensor out = Tensor::zeros({weights.rows()});
    detail::affine(weights, bias, input.data.data(), out.data.data());
    detail::apply_act(out.data.data(), out.numel(), activation);
    return out;
}

/// Ordered concatenation of >= 2 one-dimensional tensors.
inline Tensor concat(const std::vector<Tensor>& inputs) {
    if (inputs.size() < 2)
        throw ConfigError("concat: needs at least 2 inputs, got " + std::to_string(inputs.size()));
    std::size_t total = 0;
    for (const auto& t : inputs) {
        if (!t.is_vector() || t.length() == 0)
            throw ShapeError("concat: operands must be nonempty vectors, got " + t.shape_string());
        total += t.length();
    }
    Tensor out = Tensor::zeros({total});
    std::size_t k = 0;
    for (const auto& t : inputs)
        for (double v : t.data) out.data[k++] = v;
    return out;
}

/// Inverted dropout. Train mode zeroes each element with probability drop_rate
/// and scales survivors by 1/(1-drop_rate); Infer mode is the exact identity.
inline Tensor dropout_forward(const Tensor& input, double drop_rate, Mode mode, Rng& rng) {
    if (drop_rate < 0.0 || drop_rate >= 1.0)
        throw ConfigError("dropout: drop_rate must be in [0,1), got " + std::to_string(drop_rate));
    if (mode == Mode::Infer || drop_rate == 0.0) return input;
    Tensor out = input;
    const double keep_scale = 1.0 / (1.0 - drop_rate);
    for (double& v : out.data)
        v = (rng.uniform() < drop_rate) ? 0.0 : v * keep_scale;
    return out;
}

struct GruParams {
    Tensor wz, uz, bz; // update gate
    Tensor wr, ur, br; // reset gate
    Tensor wh, uh, bh; // candidate
};

/// One gated-recurrent-unit step, Cho convention:
///   z = sigmoid(Wz.x + Uz.h + bz)
///   r = sigmoid(Wr.x + Ur.h + br)
///   hcand = tanh(Wh.x + Uh.(r*h) + bh)
///   h' = z*h + (1-z)*hcand
/// Returns the new hidden state (which is also the cell output).
inline Tensor gru_step(const Tensor& input, const Tensor& hidden, const GruParams& p) {
    const std::size_t units = hidden.length();
    if (p.wz.rows() != units || p.wz.cols() != input.length())
        throw ShapeError("gru_step: Wz " + p.wz.shape_string() + " incompatible with input " +
                         input.shape_string() + " and hidden " + hidden.shape_string());
    if (p.uz.rows() != units || p.uz.cols() != units)
        throw ShapeError("gru_step: Uz " + p.uz.shape_string() + " incompatible with hidden " +
                         hidden.shape_string());

    std::vector<double> zx(units), zh(units), rx(units), rh(units), cx(units), ch(units);
    detail::affine(p.wz, p.bz, input.data.data(), zx.data());
    detail::matvec(p.uz, hidden.data.data(), zh.data());
    detail::affine(p.wr, p.br, input.data.data(), rx.data());
    detail::matvec(p.ur, hidden.data.data(), rh.data());
    detail::affine(p.wh, p.bh, input.data.data(), cx.data());

    std::vector<double> rgated(units);
    for (std::size_t i = 0; i < units; ++i) {
        double r = detail::sigmoid(rx[i] + rh[i]);
        rgated[i] = r * hidden.data[i];
    }
    detail::matvec(p.uh, rgated.data(), ch.data());

    Tensor out = Tensor::zeros({units});
    for (std::size_t i = 0; i < units; ++i) {
        double z = detail::sigmoid(zx[i] + zh[i]);
        double hcand = std::tanh(cx[i] + ch[i]);
        out.data[i] = z * hidden.data[i] + (1.0 - z) * hcand;
    }
    return out;
}

/// Mean squared error between two equally shaped tensors.
inline double mse_loss(const Tensor& predicted, const Tensor& target) {
    require_same_shape(predicted, target, "mse_loss");
    if (predicted.numel() == 0) throw DataError("mse_loss: empty tensors");
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.numel(); ++i) {
        const double d = predicted.data[i] - target.data[i];
        acc += d * d;
    }
    return acc / double(predicted.numel());
}

} // namespace cadenza::nn
