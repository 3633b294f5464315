#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fade/common.hpp"

namespace fade {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Dense row-major tensor of 64-bit reals. Rank 0 (empty shape) is a scalar.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d);

    static Tensor scalar(double v) { return Tensor({}, {v}); }
    static Tensor zeros(Shape s);
    static Tensor full(Shape s, double v);
    static Tensor vector(std::vector<double> d);

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool is_scalar() const { return numel() == 1; }
    double scalar_value() const;

    int dim(int axis) const { return shape[static_cast<std::size_t>(axis)]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 2-D / 3-D accessors (row-major)
    double& at2(int r, int c) { return data[static_cast<std::size_t>(r) * dim(1) + c]; }
    double at2(int r, int c) const { return data[static_cast<std::size_t>(r) * dim(1) + c]; }
    double& at3(int i, int j, int k) {
        return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }
    double at3(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(i) * dim(1) + j) * dim(2) + k];
    }

    bool all_finite() const;
};

bool same_shape(const Shape& a, const Shape& b);

}  // namespace fade
