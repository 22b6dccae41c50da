#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cadenza/core/error.hpp"
#include "cadenza/core/rng.hpp"
#include "cadenza/core/tensor.hpp"
#include "cadenza/nn/ops.hpp"

namespace cadenza::nn {

/// Reverse-mode autodiff tape over Tensor-valued slots.
///
/// A forward pass records primitive ops; backward() runs the reverse sweep and
/// fills per-slot gradients. The op vocabulary is exactly what the layer types
/// and the differentiable feature chain need, nothing more.
class Tape {
public:
    enum class Op {
        Leaf,
        Affine,      // W.x + b              in: {w, b, x}
        Matvec,      // W.x                  in: {w, x}
        MatvecConst, // C.x, fixed C         in: {x}, aux_tensor = C
        Act,         // elementwise          in: {x}
        Concat,      // ordered concat       in: {x...}
        Add,
        Sub,
        Mul,         // elementwise
        OneMinus,    // 1 - x
        MulConst,    // x * c elementwise    aux_tensor = c
        Dropout,     // aux_tensor = scaled keep mask
        Tile,        // cyclic tile/truncate to a fixed length
        LogFloor,    // log(max(x, floor))
        DftMag,      // real-input DFT magnitude, length N -> N/2+1
        Mse,         // scalar loss          aux_tensor = target
        ScalarSum,   // weighted sum of scalar slots, aux = weights
    };

    struct Record {
        Op op{};
        std::vector<int> in;
        int out = -1;
        Activation act{Activation::Linear};
        double scalar = 0.0;    // drop rate / log floor
        Tensor aux_tensor;      // mask, const matrix, mse target
        std::vector<double> aux; // scalar-sum weights, dft scratch

        static Record make(Op op, std::vector<int> in) {
            Record r;
            r.op = op;
            r.in = std::move(in);
            return r;
        }
    };

    int leaf(Tensor value) {
        values_.push_back(std::move(value));
        return int(values_.size()) - 1;
    }

    int affine(int w, int b, int x) {
        const Tensor& wt = values_[std::size_t(w)];
        Tensor out = Tensor::zeros({wt.rows()});
        detail::affine(wt, values_[std::size_t(b)], values_[std::size_t(x)].data.data(),
                       out.data.data());
        return push(Record::make(Op::Affine, {w, b, x}), std::move(out));
    }

    int matvec(int w, int x) {
        const Tensor& wt = values_[std::size_t(w)];
        Tensor out = Tensor::zeros({wt.rows()});
        detail::matvec(wt, values_[std::size_t(x)].data.data(), out.data.data());
        return push(Record::make(Op::Matvec, {w, x}), std::move(out));
    }

    int matvec_const(Tensor constant, int x) {
        Tensor out = Tensor::zeros({constant.rows()});
        detail::matvec(constant, values_[std::size_t(x)].data.data(), out.data.data());
        Record r = Record::make(Op::MatvecConst, {x});
        r.aux_tensor = std::move(constant);
        return push(std::move(r), std::move(out));
    }

    int activation(int x, Activation a) {
        if (a == Activation::Linear) return x;
        Tensor out = values_[std::size_t(x)];
        detail::apply_act(out.data.data(), out.numel(), a);
        Record r = Record::make(Op::Act, {x});
        r.act = a;
        return push(std::move(r), std::move(out));
    }

    int concat2plus(const std::vector<int>& xs) {
        std::size_t total = 0;
        for (int id : xs) total += values_[std::size_t(id)].numel();
        Tensor out = Tensor::zeros({total});
        std::size_t k = 0;
        for (int id : xs)
            for (double v : values_[std::size_t(id)].data) out.data[k++] = v;
        return push(Record::make(Op::Concat, xs), std::move(out));
    }

    int add(int a, int b) { return binary(Op::Add, a, b); }
    int sub(int a, int b) { return binary(Op::Sub, a, b); }
    int mul(int a, int b) { return binary(Op::Mul, a, b); }

    int one_minus(int x) {
        Tensor out = values_[std::size_t(x)];
        for (double& v : out.data) v = 1.0 - v;
        return push(Record::make(Op::OneMinus, {x}), std::move(out));
    }

    int mul_const(int x, Tensor c) {
        Tensor out = values_[std::size_t(x)];
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= c.data[i];
        Record r = Record::make(Op::MulConst, {x});
        r.aux_tensor = std::move(c);
        return push(std::move(r), std::move(out));
    }

    int dropout(int x, double rate, Rng& rng) {
        const Tensor& in = values_[std::size_t(x)];
        Tensor mask = Tensor::zeros(in.shape);
        const double keep_scale = 1.0 / (1.0 - rate);
        for (double& m : mask.data) m = (rng.uniform() < rate) ? 0.0 : keep_scale;
        Tensor out = in;
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= mask.data[i];
        Record r = Record::make(Op::Dropout, {x});
        r.scalar = rate;
        r.aux_tensor = std::move(mask);
        return push(std::move(r), std::move(out));
    }

    int tile(int x, std::size_t out_len) {
        const Tensor& in = values_[std::size_t(x)];
        Tensor out = Tensor::zeros({out_len});
        for (std::size_t i = 0; i < out_len; ++i) out.data[i] = in.data[i % in.numel()];
        return push(Record::make(Op::Tile, {x}), std::move(out));
    }

    int log_floor(int x, double floor_v) {
        Tensor out = values_[std::size_t(x)];
        for (double& v : out.data) v = std::log(v > floor_v ? v : floor_v);
        Record r = Record::make(Op::LogFloor, {x});
        r.scalar = floor_v;
        return push(std::move(r), std::move(out));
    }

    /// Magnitude spectrum of a real vector (naive DFT; lengths used on the
    /// differentiable path are small). Output length N/2+1.
    int dft_magnitude(int x) {
        const Tensor& in = values_[std::size_t(x)];
        const std::size_t n = in.numel();
        const std::size_t half = n / 2 + 1;
        Record r = Record::make(Op::DftMag, {x});
        r.aux.resize(2 * half); // save re/im for backward
        Tensor out = Tensor::zeros({half});
        for (std::size_t k = 0; k < half; ++k) {
            double re = 0.0, im = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const double ang = 2.0 * M_PI * double(k) * double(t) / double(n);
                re += in.data[t] * std::cos(ang);
                im -= in.data[t] * std::sin(ang);
            }
            r.aux[2 * k] = re;
            r.aux[2 * k + 1] = im;
            out.data[k] = std::sqrt(re * re + im * im);
        }
        return push(std::move(r), std::move(out));
    }

    int mse(int pred, Tensor target) {
        const Tensor& p = values_[std::size_t(pred)];
        require_same_shape(p, target, "tape mse");
        double acc = 0.0;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double d = p.data[i] - target.data[i];
            acc += d * d;
        }
        Record r = Record::make(Op::Mse, {pred});
        r.aux_tensor = std::move(target);
        return push(std::move(r), Tensor::vec({acc / double(p.numel())}));
    }

    /// Weighted sum of scalar slots (loss aggregation across heads).
    int scalar_sum(const std::vector<int>& xs, const std::vector<double>& weights) {
        if (xs.size() != weights.size())
            throw ConfigError("scalar_sum: weight count mismatch");
        double acc = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            acc += weights[i] * values_[std::size_t(xs[i])].data[0];
        Record r = Record::make(Op::ScalarSum, xs);
        r.aux = weights;
        return push(std::move(r), Tensor::vec({acc}));
    }

    const Tensor& value(int id) const { return values_[std::size_t(id)]; }

    const Tensor& grad(int id) const {
        if (grads_.empty()) throw StateError("tape gradient read before backward()");
        return grads_[std::size_t(id)];
    }

    /// Reverse sweep from a scalar root (seed gradient 1).
    void backward(int root) {
        if (values_[std::size_t(root)].numel() != 1)
            throw ShapeError("backward: root must be scalar, got " +
                             values_[std::size_t(root)].shape_string());
        backward(root, Tensor::vec({1.0}));
    }

    /// Reverse sweep with an explicit output gradient seed.
    void backward(int root, const Tensor& seed) {
        grads_.clear();
        grads_.resize(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i)
            grads_[i] = Tensor::zeros(values_[i].shape);
        require_same_shape(values_[std::size_t(root)], seed, "backward seed");
        grads_[std::size_t(root)] = seed;

        for (auto it = records_.rbegin(); it != records_.rend(); ++it)
            back_one(*it);
    }

    std::size_t size() const { return values_.size(); }

private:
    int push(Record r, Tensor out) {
        values_.push_back(std::move(out));
        r.out = int(values_.size()) - 1;
        records_.push_back(std::move(r));
        return records_.back().out;
    }

    int binary(Op op, int a, int b) {
        const Tensor& ta = values_[std::size_t(a)];
        const Tensor& tb = values_[std::size_t(b)];
        require_same_shape(ta, tb, "tape binary op");
        Tensor out = ta;
        switch (op) {
        case Op::Add:
            for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += tb.data[i];
            break;
        case Op::Sub:
            for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= tb.data[i];
            break;
        case Op::Mul:
            for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= tb.data[i];
            break;
        default: break;
        }
        return push(Record::make(op, {a, b}), std::move(out));
    }

    void back_one(const Record& r) {
        const Tensor& g = grads_[std::size_t(r.out)];
        switch (r.op) {
        case Op::Leaf: break;
        case Op::Affine: {
            const Tensor& w = values_[std::size_t(r.in[0])];
            const Tensor& x = values_[std::size_t(r.in[2])];
            Tensor& gw = grads_[std::size_t(r.in[0])];
            Tensor& gb = grads_[std::size_t(r.in[1])];
            Tensor& gx = grads_[std::size_t(r.in[2])];
            const std::size_t rows = w.rows(), cols = w.cols();
            for (std::size_t i = 0; i < rows; ++i) {
                const double gi = g.data[i];
                gb.data[i] += gi;
                for (std::size_t j = 0; j < cols; ++j) {
                    gw.data[i * cols + j] += gi * x.data[j];
                    gx.data[j] += gi * w.data[i * cols + j];
                }
            }
            break;
        }
        case Op::Matvec: {
            const Tensor& w = values_[std::size_t(r.in[0])];
            const Tensor& x = values_[std::size_t(r.in[1])];
            Tensor& gw = grads_[std::size_t(r.in[0])];
            Tensor& gx = grads_[std::size_t(r.in[1])];
            const std::size_t rows = w.rows(), cols = w.cols();
            for (std::size_t i = 0; i < rows; ++i) {
                const double gi = g.data[i];
                for (std::size_t j = 0; j < cols; ++j) {
                    gw.data[i * cols + j] += gi * x.data[j];
                    gx.data[j] += gi * w.data[i * cols + j];
                }
            }
            break;
        }
        case Op::MatvecConst: {
            const Tensor& c = r.aux_tensor;
            Tensor& gx = grads_[std::size_t(r.in[0])];
            const std::size_t rows = c.rows(), cols = c.cols();
            for (std::size_t i = 0; i < rows; ++i) {
                const double gi = g.data[i];
                for (std::size_t j = 0; j < cols; ++j)
                    gx.data[j] += gi * c.data[i * cols + j];
            }
            break;
        }
        case Op::Act: {
            const Tensor& y = values_[std::size_t(r.out)];
            const Tensor& x = values_[std::size_t(r.in[0])];
            Tensor& gx = grads_[std::size_t(r.in[0])];
            for (std::size_t i = 0; i < y.numel(); ++i) {
                double d = 0.0;
                switch (r.act) {
                case Activation::Tanh: d = 1.0 - y.data[i] * y.data[i]; break;
                case Activation::Relu: d = x.data[i] > 0.0 ? 1.0 : 0.0; break;
                case Activation::Sigmoid: d = y.data[i] * (1.0 - y.data[i]); break;
                case Activation::Linear: d = 1.0; break;
                }
                gx.data[i] += g.data[i] * d;
            }
            break;
        }
        case Op::Concat: {
            std::size_t off = 0;
            for (int id : r.in) {
                Tensor& gx = grads_[std::size_t(id)];
                for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += g.data[off + i];
                off += gx.numel();
            }
            break;
        }
        case Op::Add: {
            accum(r.in[0], g, 1.0);
            accum(r.in[1], g, 1.0);
            break;
        }
        case Op::Sub: {
            accum(r.in[0], g, 1.0);
            accum(r.in[1], g, -1.0);
            break;
        }
        case Op::Mul: {
            const Tensor& a = values_[std::size_t(r.in[0])];
            const Tensor& b = values_[std::size_t(r.in[1])];
            Tensor& ga = grads_[std::size_t(r.in[0])];
            Tensor& gb = grads_[std::size_t(r.in[1])];
            for (std::size_t i = 0; i < g.numel(); ++i) {
                ga.data[i] += g.data[i] * b.data[i];
                gb.data[i] += g.data[i] * a.data[i];
            }
            break;
        }
        case Op::OneMinus: {
            accum(r.in[0], g, -1.0);
            break;
        }
        case Op::MulConst:
        case Op::Dropout: {
            const Tensor& c = r.aux_tensor;
            Tensor& gx = grads_[std::size_t(r.in[0])];
            for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i] * c.data[i];
            break;
        }
        case Op::Tile: {
            Tensor& gx = grads_[std::size_t(r.in[0])];
            const std::size_t n = gx.numel();
            for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i % n] += g.data[i];
            break;
        }
        case Op::LogFloor: {
            const Tensor& x = values_[std::size_t(r.in[0])];
            Tensor& gx = grads_[std::size_t(r.in[0])];
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (x.data[i] > r.scalar) gx.data[i] += g.data[i] / x.data[i];
            break;
        }
        case Op::DftMag: {
            const Tensor& y = values_[std::size_t(r.out)];
            Tensor& gx = grads_[std::size_t(r.in[0])];
            const std::size_t n = gx.numel();
            const std::size_t half = y.numel();
            // d|X_k|/dx_t = (Re_k cos(2pi k t / N) - Im_k sin(2pi k t / N)) / |X_k|
            for (std::size_t k = 0; k < half; ++k) {
                const double m = y.data[k];
                if (m < 1e-300) continue;
                const double cr = g.data[k] * r.aux[2 * k] / m;
                const double ci = g.data[k] * r.aux[2 * k + 1] / m;
                for (std::size_t t = 0; t < n; ++t) {
                    const double ang = 2.0 * M_PI * double(k) * double(t) / double(n);
                    gx.data[t] += cr * std::cos(ang) - ci * std::sin(ang);
                }
            }
            break;
        }
        case Op::Mse: {
            const Tensor& p = values_[std::size_t(r.in[0])];
            const Tensor& t = r.aux_tensor;
            Tensor& gp = grads_[std::size_t(r.in[0])];
            const double scale = g.data[0] * 2.0 / double(p.numel());
            for (std::size_t i = 0; i < p.numel(); ++i)
                gp.data[i] += scale * (p.data[i] - t.data[i]);
            break;
        }
        case Op::ScalarSum: {
            for (std::size_t i = 0; i < r.in.size(); ++i)
                grads_[std::size_t(r.in[i])].data[0] += g.data[0] * r.aux[i];
            break;
        }
        }
    }

    void accum(int id, const Tensor& g, double sign) {
        Tensor& gx = grads_[std::size_t(id)];
        for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += sign * g.data[i];
    }

    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;
    std::vector<Record> records_;
};

} // namespace cadenza::nn
