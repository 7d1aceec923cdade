#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "hmr/common.hpp"

namespace hmr {

// Dense row-major f64 tensor. All dims are >= 1 and data.size() equals the
// product of dims; both are enforced on construction.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;

    Tensor() = default;

    explicit Tensor(std::vector<int> dims, double fill = 0.0) : shape(std::move(dims)) {
        data.assign(check_shape(shape), fill);
    }

    static Tensor from(std::vector<int> dims, std::vector<double> values) {
        Tensor t;
        t.shape = std::move(dims);
        if (static_cast<int64_t>(values.size()) != check_shape(t.shape))
            throw ShapeError("tensor: data length " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(t.shape));
        t.data = std::move(values);
        return t;
    }

    static Tensor scalar(double v) { return from({1}, {v}); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    // 2-D accessors; most block math runs on [rows, cols] matrices.
    int rows() const { return shape[0]; }
    int cols() const { return shape[1]; }
    double& at(int r, int c) { return data[static_cast<size_t>(r) * shape[1] + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * shape[1] + c]; }

    static std::string shape_str(const std::vector<int>& s) {
        std::string out = "[";
        for (size_t i = 0; i < s.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }

    static int64_t check_shape(const std::vector<int>& s) {
        if (s.empty()) throw ShapeError("tensor: empty shape");
        int64_t n = 1;
        for (int d : s) {
            if (d < 1) throw ShapeError("tensor: non-positive dim in " + shape_str(s));
            n *= d;
        }
        return n;
    }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

}  // namespace hmr
