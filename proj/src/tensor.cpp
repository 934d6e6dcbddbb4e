#include "multsl/tensor.hpp"

#include <cmath>
#include <string>

namespace multsl {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> s, double fill_value)
    : shape(std::move(s)), data(shape_numel(shape), fill_value) {
    for (std::size_t d : shape) {
        if (d == 0) throw DimensionError("Tensor: zero-sized dimension");
    }
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("Tensor: shape product " + std::to_string(shape_numel(shape)) +
                             " != data length " + std::to_string(data.size()));
    }
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double v) {
    for (double& x : data) x = v;
}

void check_finite(const Tensor& t, const char* where) {
    if (!t.all_finite()) {
        throw NumericError(std::string("non-finite value in ") + where);
    }
}

void accumulate(Tensor& y, const Tensor& x) {
    if (!y.same_shape(x)) throw DimensionError("accumulate: shape mismatch");
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
}

}  // namespace multsl
