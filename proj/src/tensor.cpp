#include "fade/tensor.hpp"

#include <cmath>

namespace fade {

std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    out += ")";
    return out;
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data.size())
        throw DataError("tensor shape " + shape_str(shape) + " does not match data length " +
                        std::to_string(data.size()));
}

Tensor Tensor::zeros(Shape s) {
    std::size_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape s, double v) {
    std::size_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(n, v));
}

Tensor Tensor::vector(std::vector<double> d) {
    Shape s{static_cast<int>(d.size())};
    return Tensor(std::move(s), std::move(d));
}

double Tensor::scalar_value() const {
    if (!is_scalar()) throw DataError("tensor " + shape_str(shape) + " is not a scalar");
    return data[0];
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

}  // namespace fade
