#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cadenza/core/error.hpp"

namespace cadenza {

/// Dense numeric array: a shape plus a flat row-major buffer of doubles.
/// The sole value type flowing through the network engine.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != data.size())
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_string(shape));
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto e : s) n *= e;
        return s.empty() ? 0 : n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        Tensor t;
        t.shape = std::move(s);
        t.data.assign(numel_of(t.shape), 0.0);
        return t;
    }

    static Tensor vec(std::vector<double> d) {
        Tensor t;
        t.shape = {d.size()};
        t.data = std::move(d);
        return t;
    }

    static Tensor matrix(std::size_t rows, std::size_t cols) {
        return zeros({rows, cols});
    }

    std::size_t numel() const { return data.size(); }

    bool is_vector() const { return shape.size() == 1; }
    bool is_matrix() const { return shape.size() == 2; }

    std::size_t length() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t rows() const { return shape[0]; }
    std::size_t cols() const { return shape[1]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    static std::string shape_string(const std::vector<std::size_t>& s) {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) os << ",";
            os << s[i];
        }
        os << ")";
        return os.str();
    }

    std::string shape_string() const { return shape_string(shape); }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() +
                         " vs " + b.shape_string());
}

inline void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite())
        throw NumericError(std::string(what) + ": tensor contains non-finite values");
}

} // namespace cadenza
