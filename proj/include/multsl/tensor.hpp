#pragma once

#include <cstddef>
#include <vector>

#include "multsl/errors.hpp"

namespace multsl {

// Dense row-major N-dimensional array of binary64 values. The single numeric
// currency of layers, messages and parameter blocks.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, double fill_value = 0.0);
    Tensor(std::vector<std::size_t> s, std::vector<double> values);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
    void fill(double v);

    // Indexers for the common layouts. No bounds checks in release builds.
    double& at3(std::size_t c, std::size_t y, std::size_t x) {
        return data[(c * shape[1] + y) * shape[2] + x];
    }
    double at3(std::size_t c, std::size_t y, std::size_t x) const {
        return data[(c * shape[1] + y) * shape[2] + x];
    }
    double& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
        return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
    double at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

// Throws NumericError if any element is NaN or Inf.
void check_finite(const Tensor& t, const char* where);

// Elementwise y += x; shapes must match.
void accumulate(Tensor& y, const Tensor& x);

}  // namespace multsl
