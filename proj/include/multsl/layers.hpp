#pragma once

#include <cstddef>
#include <vector>

#include "multsl/tensor.hpp"

namespace multsl {

enum class Padding { Same, Valid };

// Cross-correlation of a C_in×H×W input with a C_out×C_in×k_h×k_w kernel.
// Same padding requires odd kernel dims. bias may be null (no bias term).
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias, Padding pad);

struct Conv2dGrads {
    Tensor d_input;
    Tensor d_kernel;
    Tensor d_bias;  // always C_out, ignore when the layer has no bias
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, Padding pad,
                            const Tensor& d_out, bool need_d_input);

Tensor relu(const Tensor& input);
// pre is the pre-activation input; subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& pre, const Tensor& d_out);

struct PoolResult {
    Tensor output;                    // C×H/w_h×W/w_w
    std::vector<std::size_t> argmax;  // flat input index per output cell
    std::vector<std::size_t> input_shape;
};

// Non-overlapping max pooling, stride equal to the window. Ties break to the
// first element in row-major scan order.
PoolResult max_pool(const Tensor& input, std::size_t w_h, std::size_t w_w);
Tensor max_pool_backward(const PoolResult& fwd, const Tensor& d_out);

// y = W x + b with W of shape m×n.
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct DenseGrads {
    Tensor d_input;
    Tensor d_weight;
    Tensor d_bias;
};

DenseGrads dense_backward(const Tensor& input, const Tensor& weight, const Tensor& d_out);

// (1/b) * sum((pred - target)^2)
double mse_loss(const Tensor& pred, const Tensor& target);
Tensor mse_loss_grad(const Tensor& pred, const Tensor& target);

// Standard ConvLSTM cell. Each gate is a convolution over the channel
// concatenation [x_t; h_prev] with a 3x3 kernel and same padding.
struct ConvLstmParams {
    Tensor w_i, w_f, w_g, w_o;  // C_h×(C_in+C_h)×3×3
    Tensor b_i, b_f, b_g, b_o;  // C_h
    std::size_t in_channels = 0;
    std::size_t hidden_channels = 0;
};

struct ConvLstmCache {
    Tensor concat_in;  // (C_in+C_h)×h×w
    Tensor gate_i, gate_f, gate_g, gate_o;  // post-nonlinearity gate values
    Tensor c_prev, c_t, tanh_c;
};

struct ConvLstmOut {
    Tensor h;
    Tensor c;
};

ConvLstmOut conv_lstm_cell(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev,
                           const ConvLstmParams& params, ConvLstmCache* cache = nullptr);

struct ConvLstmGrads {
    Tensor d_w_i, d_w_f, d_w_g, d_w_o;
    Tensor d_b_i, d_b_f, d_b_g, d_b_o;
    Tensor d_x, d_h_prev, d_c_prev;
};

ConvLstmGrads conv_lstm_cell_backward(const ConvLstmParams& params, const ConvLstmCache& cache,
                                      const Tensor& d_h, const Tensor& d_c);

}  // namespace multsl
