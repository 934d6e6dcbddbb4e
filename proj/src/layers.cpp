#include "multsl/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace multsl {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw DimensionError(msg);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor* bias, Padding pad) {
    require(input.rank() == 3, "conv2d: input must be C_in×H×W");
    require(kernel.rank() == 4, "conv2d: kernel must be C_out×C_in×k_h×k_w");
    const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t c_out = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    require(kernel.dim(1) == c_in, "conv2d: kernel C_in does not match input channels");
    if (bias) require(bias->numel() == c_out, "conv2d: bias length != C_out");

    std::size_t ph = 0, pw = 0, oh = 0, ow = 0;
    if (pad == Padding::Same) {
        require(kh % 2 == 1 && kw % 2 == 1, "conv2d: same padding needs odd kernel dims");
        ph = (kh - 1) / 2;
        pw = (kw - 1) / 2;
        oh = h;
        ow = w;
    } else {
        require(h >= kh && w >= kw, "conv2d: valid padding needs input >= kernel");
        oh = h - kh + 1;
        ow = w - kw + 1;
    }

    Tensor out({c_out, oh, ow});
    for (std::size_t co = 0; co < c_out; ++co) {
        const double b = bias ? bias->data[co] : 0.0;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                double acc = b;
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(ph);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) -
                                                      static_cast<std::ptrdiff_t>(pw);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            acc += input.at3(ci, static_cast<std::size_t>(iy),
                                             static_cast<std::size_t>(ix)) *
                                   kernel.at4(co, ci, ky, kx);
                        }
                    }
                }
                out.at3(co, y, x) = acc;
            }
        }
    }
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, Padding pad,
                            const Tensor& d_out, bool need_d_input) {
    const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t c_out = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    require(d_out.rank() == 3 && d_out.dim(0) == c_out, "conv2d_backward: d_out channel mismatch");

    std::size_t ph = 0, pw = 0;
    if (pad == Padding::Same) {
        ph = (kh - 1) / 2;
        pw = (kw - 1) / 2;
    }
    const std::size_t oh = d_out.dim(1), ow = d_out.dim(2);

    Conv2dGrads g;
    g.d_kernel = Tensor(kernel.shape);
    g.d_bias = Tensor({c_out});
    if (need_d_input) g.d_input = Tensor(input.shape);

    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const double go = d_out.at3(co, y, x);
                if (go == 0.0) continue;
                g.d_bias.data[co] += go;
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(ph);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) -
                                                      static_cast<std::ptrdiff_t>(pw);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            const std::size_t uy = static_cast<std::size_t>(iy);
                            const std::size_t ux = static_cast<std::size_t>(ix);
                            g.d_kernel.at4(co, ci, ky, kx) += go * input.at3(ci, uy, ux);
                            if (need_d_input) {
                                g.d_input.at3(ci, uy, ux) += go * kernel.at4(co, ci, ky, kx);
                            }
                        }
                    }
                }
            }
        }
    }
    return g;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape);
    for (std::size_t i = 0; i < input.data.size(); ++i) {
        out.data[i] = input.data[i] > 0.0 ? input.data[i] : 0.0;
    }
    return out;
}

Tensor relu_backward(const Tensor& pre, const Tensor& d_out) {
    require(pre.same_shape(d_out), "relu_backward: shape mismatch");
    Tensor g(pre.shape);
    for (std::size_t i = 0; i < pre.data.size(); ++i) {
        g.data[i] = pre.data[i] > 0.0 ? d_out.data[i] : 0.0;
    }
    return g;
}

PoolResult max_pool(const Tensor& input, std::size_t w_h, std::size_t w_w) {
    require(input.rank() == 3, "max_pool: input must be C×H×W");
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (w_h == 0 || w_w == 0 || h % w_h != 0 || w % w_w != 0) {
        throw ConfigError("max_pool: window " + std::to_string(w_h) + "x" + std::to_string(w_w) +
                          " does not divide input " + std::to_string(h) + "x" + std::to_string(w));
    }
    const std::size_t oh = h / w_h, ow = w / w_w;
    PoolResult res;
    res.output = Tensor({c, oh, ow});
    res.argmax.resize(c * oh * ow);
    res.input_shape = input.shape;
    for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                std::size_t best_idx = 0;
                for (std::size_t dy = 0; dy < w_h; ++dy) {
                    for (std::size_t dx = 0; dx < w_w; ++dx) {
                        const std::size_t iy = oy * w_h + dy;
                        const std::size_t ix = ox * w_w + dx;
                        const double v = input.at3(ci, iy, ix);
                        if (v > best) {
                            best = v;
                            best_idx = (ci * h + iy) * w + ix;
                        }
                    }
                }
                res.output.at3(ci, oy, ox) = best;
                res.argmax[(ci * oh + oy) * ow + ox] = best_idx;
            }
        }
    }
    return res;
}

Tensor max_pool_backward(const PoolResult& fwd, const Tensor& d_out) {
    require(fwd.output.same_shape(d_out), "max_pool_backward: d_out shape mismatch");
    Tensor g(fwd.input_shape);
    for (std::size_t i = 0; i < d_out.data.size(); ++i) {
        g.data[fwd.argmax[i]] += d_out.data[i];
    }
    return g;
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require(weight.rank() == 2, "dense: weight must be m×n");
    const std::size_t m = weight.dim(0), n = weight.dim(1);
    require(input.numel() == n, "dense: input length != weight columns");
    require(bias.numel() == m, "dense: bias length != weight rows");
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = bias.data[i];
        for (std::size_t j = 0; j < n; ++j) acc += weight.data[i * n + j] * input.data[j];
        out.data[i] = acc;
    }
    return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weight, const Tensor& d_out) {
    const std::size_t m = weight.dim(0), n = weight.dim(1);
    require(d_out.numel() == m, "dense_backward: d_out length mismatch");
    DenseGrads g;
    g.d_input = Tensor({n});
    g.d_weight = Tensor(weight.shape);
    g.d_bias = Tensor({m});
    for (std::size_t i = 0; i < m; ++i) {
        const double go = d_out.data[i];
        g.d_bias.data[i] = go;
        for (std::size_t j = 0; j < n; ++j) {
            g.d_weight.data[i * n + j] = go * input.data[j];
            g.d_input.data[j] += go * weight.data[i * n + j];
        }
    }
    return g;
}

double mse_loss(const Tensor& pred, const Tensor& target) {
    require(pred.numel() == target.numel() && pred.numel() >= 1, "mse_loss: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double d = pred.data[i] - target.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.numel());
}

Tensor mse_loss_grad(const Tensor& pred, const Tensor& target) {
    require(pred.numel() == target.numel() && pred.numel() >= 1, "mse_loss_grad: length mismatch");
    Tensor g(pred.shape);
    const double inv = 2.0 / static_cast<double>(pred.numel());
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        g.data[i] = inv * (pred.data[i] - target.data[i]);
    }
    return g;
}

namespace {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.numel()));
    return out;
}

}  // namespace

ConvLstmOut conv_lstm_cell(const Tensor& x_t, const Tensor& h_prev, const Tensor& c_prev,
                           const ConvLstmParams& params, ConvLstmCache* cache) {
    require(x_t.rank() == 3 && h_prev.rank() == 3 && c_prev.rank() == 3,
            "conv_lstm_cell: rank-3 inputs expected");
    require(x_t.dim(1) == h_prev.dim(1) && x_t.dim(2) == h_prev.dim(2),
            "conv_lstm_cell: spatial dims of x_t and h_prev differ");
    require(x_t.dim(0) == params.in_channels, "conv_lstm_cell: x_t channel mismatch");
    require(h_prev.dim(0) == params.hidden_channels, "conv_lstm_cell: h_prev channel mismatch");
    require(h_prev.same_shape(c_prev), "conv_lstm_cell: h_prev/c_prev shape mismatch");

    const Tensor concat = concat_channels(x_t, h_prev);
    Tensor zi = conv2d(concat, params.w_i, &params.b_i, Padding::Same);
    Tensor zf = conv2d(concat, params.w_f, &params.b_f, Padding::Same);
    Tensor zg = conv2d(concat, params.w_g, &params.b_g, Padding::Same);
    Tensor zo = conv2d(concat, params.w_o, &params.b_o, Padding::Same);

    const std::size_t n = zi.numel();
    Tensor gi(zi.shape), gf(zi.shape), gg(zi.shape), go(zi.shape);
    Tensor c_t(zi.shape), tanh_c(zi.shape), h_t(zi.shape);
    for (std::size_t i = 0; i < n; ++i) {
        gi.data[i] = sigmoid(zi.data[i]);
        gf.data[i] = sigmoid(zf.data[i]);
        gg.data[i] = std::tanh(zg.data[i]);
        go.data[i] = sigmoid(zo.data[i]);
        c_t.data[i] = gf.data[i] * c_prev.data[i] + gi.data[i] * gg.data[i];
        tanh_c.data[i] = std::tanh(c_t.data[i]);
        h_t.data[i] = go.data[i] * tanh_c.data[i];
    }

    if (cache) {
        cache->concat_in = concat;
        cache->gate_i = gi;
        cache->gate_f = gf;
        cache->gate_g = gg;
        cache->gate_o = go;
        cache->c_prev = c_prev;
        cache->c_t = c_t;
        cache->tanh_c = tanh_c;
    }
    return {std::move(h_t), std::move(c_t)};
}

ConvLstmGrads conv_lstm_cell_backward(const ConvLstmParams& params, const ConvLstmCache& cache,
                                      const Tensor& d_h, const Tensor& d_c) {
    const std::size_t n = d_h.numel();
    require(cache.c_t.numel() == n, "conv_lstm_cell_backward: cache/d_h mismatch");

    Tensor dzi(d_h.shape), dzf(d_h.shape), dzg(d_h.shape), dzo(d_h.shape);
    ConvLstmGrads g;
    g.d_c_prev = Tensor(d_h.shape);
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = cache.gate_i.data[i];
        const double gf = cache.gate_f.data[i];
        const double gg = cache.gate_g.data[i];
        const double go = cache.gate_o.data[i];
        const double th = cache.tanh_c.data[i];
        const double dc = d_c.data[i] + d_h.data[i] * go * (1.0 - th * th);
        dzo.data[i] = d_h.data[i] * th * go * (1.0 - go);
        dzi.data[i] = dc * gg * gi * (1.0 - gi);
        dzf.data[i] = dc * cache.c_prev.data[i] * gf * (1.0 - gf);
        dzg.data[i] = dc * gi * (1.0 - gg * gg);
        g.d_c_prev.data[i] = dc * gf;
    }

    Tensor d_concat(cache.concat_in.shape);
    auto back_gate = [&](const Tensor& w, const Tensor& dz, Tensor& d_w, Tensor& d_b) {
        Conv2dGrads cg = conv2d_backward(cache.concat_in, w, Padding::Same, dz, true);
        d_w = std::move(cg.d_kernel);
        d_b = std::move(cg.d_bias);
        accumulate(d_concat, cg.d_input);
    };
    back_gate(params.w_i, dzi, g.d_w_i, g.d_b_i);
    back_gate(params.w_f, dzf, g.d_w_f, g.d_b_f);
    back_gate(params.w_g, dzg, g.d_w_g, g.d_b_g);
    back_gate(params.w_o, dzo, g.d_w_o, g.d_b_o);

    const std::size_t c_in = params.in_channels;
    const std::size_t h = d_concat.dim(1), w = d_concat.dim(2);
    g.d_x = Tensor({c_in, h, w});
    g.d_h_prev = Tensor({params.hidden_channels, h, w});
    std::copy(d_concat.data.begin(), d_concat.data.begin() + static_cast<std::ptrdiff_t>(g.d_x.numel()),
              g.d_x.data.begin());
    std::copy(d_concat.data.begin() + static_cast<std::ptrdiff_t>(g.d_x.numel()), d_concat.data.end(),
              g.d_h_prev.data.begin());
    return g;
}

}  // namespace multsl
