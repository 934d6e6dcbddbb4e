#include "multsl/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace multsl {

static_assert(std::endian::native == std::endian::little,
              "checkpoint and wire formats assume a little-endian host");

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::RF: return "rf";
        case Variant::Img: return "img";
        case Variant::ImgRF: return "imgrf";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    if (name == "rf") return Variant::RF;
    if (name == "img") return Variant::Img;
    if (name == "imgrf" || name == "img+rf") return Variant::ImgRF;
    throw ConfigError("unknown variant: " + name);
}

void ModelConfig::validate() const {
    if (L < 1) throw ConfigError("ModelConfig: L must be >= 1");
    if (S < 1) throw ConfigError("ModelConfig: S must be >= 1");
    if (w_H == 0 || w_W == 0 || N_H % w_H != 0 || N_W % w_W != 0) {
        throw ConfigError("ModelConfig: pooling window must divide the frame resolution");
    }
    if (conv1_channels < 1 || lstm_hidden_channels < 1) {
        throw ConfigError("ModelConfig: channel counts must be >= 1");
    }
    if (!(T_ms > 0.0) || !(tau_ms > 0.0)) throw ConfigError("ModelConfig: T and tau must be > 0");
}

namespace {

// Deterministic uniform in [-a, a); hand-rolled mapping so that identical
// seeds give identical weights on any platform.
class UniformInit {
  public:
    explicit UniformInit(std::uint64_t seed) : rng_(seed) {}
    double draw(double a) {
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;  // [0,1)
        return a * (2.0 * u - 1.0);
    }
    void fill_glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out) {
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& v : t.data) v = draw(a);
    }

  private:
    std::mt19937_64 rng_;
};

}  // namespace

UESegment UESegment::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    UESegment seg;
    const std::size_t c1 = config.conv1_channels;
    seg.conv1_w = Tensor({c1, 1, 3, 3});
    seg.conv1_b = Tensor({c1});
    seg.conv2_w = Tensor({1, c1, 3, 3});
    seg.w_h = config.w_H;
    seg.w_w = config.w_W;
    UniformInit init(seed);
    init.fill_glorot(seg.conv1_w, 1 * 9, c1 * 9);
    init.fill_glorot(seg.conv2_w, c1 * 9, 1 * 9);
    return seg;
}

std::vector<Tensor*> UESegment::params() { return {&conv1_w, &conv1_b, &conv2_w}; }
std::vector<const Tensor*> UESegment::params() const { return {&conv1_w, &conv1_b, &conv2_w}; }

Tensor ue_forward(const UESegment& seg, const Tensor& frames, UECache* cache) {
    if (frames.rank() != 4 || frames.dim(1) != 1) {
        throw DimensionError("ue_forward: frames must be L×1×H×W");
    }
    const std::size_t L = frames.dim(0), H = frames.dim(2), W = frames.dim(3);
    const std::size_t oh = H / seg.w_h, ow = W / seg.w_w;
    Tensor out({L, 1, oh, ow});
    if (cache) cache->frames.clear();

    for (std::size_t t = 0; t < L; ++t) {
        Tensor frame({1, H, W});
        std::memcpy(frame.data.data(), frames.data.data() + t * H * W, H * W * sizeof(double));
        Tensor pre1 = conv2d(frame, seg.conv1_w, &seg.conv1_b, Padding::Same);
        Tensor r1 = relu(pre1);
        Tensor pre2 = conv2d(r1, seg.conv2_w, nullptr, Padding::Same);
        Tensor r2 = relu(pre2);
        PoolResult pool = max_pool(r2, seg.w_h, seg.w_w);
        std::memcpy(out.data.data() + t * oh * ow, pool.output.data.data(),
                    oh * ow * sizeof(double));
        if (cache) {
            UEFrameCache fc;
            fc.input = std::move(frame);
            fc.pre1 = std::move(pre1);
            fc.relu1 = std::move(r1);
            fc.pre2 = std::move(pre2);
            fc.pool = std::move(pool);
            cache->frames.push_back(std::move(fc));
        }
    }
    check_finite(out, "ue_forward");
    return out;
}

std::vector<Tensor> ue_backward(const UESegment& seg, const UECache& cache, const Tensor& d_cut) {
    if (cache.frames.empty()) throw ProtocolError("ue_backward: no recorded forward pass");
    const std::size_t L = cache.frames.size();
    if (d_cut.rank() != 4 || d_cut.dim(0) != L) {
        throw DimensionError("ue_backward: d_cut must be L×1×h×w");
    }
    const std::size_t oh = d_cut.dim(2), ow = d_cut.dim(3);

    Tensor d_conv1_w(seg.conv1_w.shape);
    Tensor d_conv1_b(seg.conv1_b.shape);
    Tensor d_conv2_w(seg.conv2_w.shape);

    for (std::size_t t = 0; t < L; ++t) {
        const UEFrameCache& fc = cache.frames[t];
        Tensor d_pool({1, oh, ow});
        std::memcpy(d_pool.data.data(), d_cut.data.data() + t * oh * ow, oh * ow * sizeof(double));
        Tensor d_r2 = max_pool_backward(fc.pool, d_pool);
        Tensor d_pre2 = relu_backward(fc.pre2, d_r2);
        Conv2dGrads g2 = conv2d_backward(fc.relu1, seg.conv2_w, Padding::Same, d_pre2, true);
        accumulate(d_conv2_w, g2.d_kernel);
        Tensor d_pre1 = relu_backward(fc.pre1, g2.d_input);
        Conv2dGrads g1 = conv2d_backward(fc.input, seg.conv1_w, Padding::Same, d_pre1, false);
        accumulate(d_conv1_w, g1.d_kernel);
        accumulate(d_conv1_b, g1.d_bias);
    }
    check_finite(d_conv1_w, "ue_backward");
    std::vector<Tensor> grads;
    grads.push_back(std::move(d_conv1_w));
    grads.push_back(std::move(d_conv1_b));
    grads.push_back(std::move(d_conv2_w));
    return grads;
}

BSSegment BSSegment::init(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    BSSegment seg;
    const std::size_t c_in = config.input_channels();
    const std::size_t c_h = config.lstm_hidden_channels;
    const std::size_t cc = c_in + c_h;
    seg.lstm.in_channels = c_in;
    seg.lstm.hidden_channels = c_h;
    UniformInit init(seed);
    for (Tensor* w : {&seg.lstm.w_i, &seg.lstm.w_f, &seg.lstm.w_g, &seg.lstm.w_o}) {
        *w = Tensor({c_h, cc, 3, 3});
        init.fill_glorot(*w, cc * 9, c_h * 9);
    }
    for (Tensor* b : {&seg.lstm.b_i, &seg.lstm.b_f, &seg.lstm.b_g, &seg.lstm.b_o}) {
        *b = Tensor({c_h});
    }
    const std::size_t flat = c_h * config.pooled_h() * config.pooled_w();
    seg.dense_w = Tensor({1, flat});
    seg.dense_b = Tensor({1});
    init.fill_glorot(seg.dense_w, flat, 1);
    return seg;
}

std::vector<Tensor*> BSSegment::params() {
    return {&lstm.w_i, &lstm.w_f, &lstm.w_g, &lstm.w_o, &lstm.b_i, &lstm.b_f,
            &lstm.b_g, &lstm.b_o, &dense_w, &dense_b};
}
std::vector<const Tensor*> BSSegment::params() const {
    return {&lstm.w_i, &lstm.w_f, &lstm.w_g, &lstm.w_o, &lstm.b_i, &lstm.b_f,
            &lstm.b_g, &lstm.b_o, &dense_w, &dense_b};
}

double bs_forward(const BSSegment& seg, const Tensor& fused_seq, BSCache* cache) {
    if (fused_seq.rank() != 4) throw DimensionError("bs_forward: input must be L×C×h×w");
    const std::size_t L = fused_seq.dim(0), c_in = fused_seq.dim(1);
    const std::size_t h = fused_seq.dim(2), w = fused_seq.dim(3);
    if (c_in != seg.lstm.in_channels) throw DimensionError("bs_forward: channel mismatch");

    const std::size_t c_h = seg.lstm.hidden_channels;
    Tensor h_t({c_h, h, w});
    Tensor c_t({c_h, h, w});
    if (cache) cache->steps.clear();

    for (std::size_t t = 0; t < L; ++t) {
        Tensor x({c_in, h, w});
        std::memcpy(x.data.data(), fused_seq.data.data() + t * c_in * h * w,
                    c_in * h * w * sizeof(double));
        ConvLstmCache step_cache;
        ConvLstmOut out = conv_lstm_cell(x, h_t, c_t, seg.lstm, cache ? &step_cache : nullptr);
        h_t = std::move(out.h);
        c_t = std::move(out.c);
        if (cache) cache->steps.push_back(std::move(step_cache));
    }

    Tensor flat({h_t.numel()}, h_t.data);
    Tensor y = dense(flat, seg.dense_w, seg.dense_b);
    check_finite(y, "bs_forward");
    if (cache) cache->h_last_flat = std::move(flat);
    return y.data[0];
}

BSGrads bs_backward(const BSSegment& seg, const BSCache& cache, double d_pred) {
    if (cache.steps.empty()) throw ProtocolError("bs_backward: no recorded forward pass");
    const std::size_t L = cache.steps.size();
    const std::size_t c_h = seg.lstm.hidden_channels;
    const std::size_t c_in = seg.lstm.in_channels;
    const std::size_t h = cache.steps.back().c_t.dim(1);
    const std::size_t w = cache.steps.back().c_t.dim(2);

    Tensor d_out({1}, std::vector<double>{d_pred});
    DenseGrads dg = dense_backward(cache.h_last_flat, seg.dense_w, d_out);

    Tensor d_h({c_h, h, w}, std::move(dg.d_input.data));
    Tensor d_c({c_h, h, w});

    BSGrads g;
    g.param_grads.assign(8, Tensor());
    g.param_grads[0] = Tensor(seg.lstm.w_i.shape);
    g.param_grads[1] = Tensor(seg.lstm.w_f.shape);
    g.param_grads[2] = Tensor(seg.lstm.w_g.shape);
    g.param_grads[3] = Tensor(seg.lstm.w_o.shape);
    g.param_grads[4] = Tensor(seg.lstm.b_i.shape);
    g.param_grads[5] = Tensor(seg.lstm.b_f.shape);
    g.param_grads[6] = Tensor(seg.lstm.b_g.shape);
    g.param_grads[7] = Tensor(seg.lstm.b_o.shape);
    g.d_input = Tensor({L, c_in, h, w});

    for (std::size_t t = L; t-- > 0;) {
        ConvLstmGrads sg = conv_lstm_cell_backward(seg.lstm, cache.steps[t], d_h, d_c);
        accumulate(g.param_grads[0], sg.d_w_i);
        accumulate(g.param_grads[1], sg.d_w_f);
        accumulate(g.param_grads[2], sg.d_w_g);
        accumulate(g.param_grads[3], sg.d_w_o);
        accumulate(g.param_grads[4], sg.d_b_i);
        accumulate(g.param_grads[5], sg.d_b_f);
        accumulate(g.param_grads[6], sg.d_b_g);
        accumulate(g.param_grads[7], sg.d_b_o);
        std::memcpy(g.d_input.data.data() + t * c_in * h * w, sg.d_x.data.data(),
                    c_in * h * w * sizeof(double));
        d_h = std::move(sg.d_h_prev);
        d_c = std::move(sg.d_c_prev);
    }

    g.param_grads.push_back(std::move(dg.d_weight));
    g.param_grads.push_back(std::move(dg.d_bias));
    check_finite(g.d_input, "bs_backward");
    return g;
}

Tensor fuse_power(const Tensor& feature_map, double power_std) {
    if (feature_map.rank() != 3 || feature_map.dim(0) != 1) {
        throw DimensionError("fuse_power: feature map must be 1×h×w");
    }
    const std::size_t h = feature_map.dim(1), w = feature_map.dim(2);
    Tensor out({2, h, w});
    for (std::size_t i = 0; i < h * w; ++i) {
        out.data[i] = power_std;
        out.data[h * w + i] = feature_map.data[i];
    }
    return out;
}

Tensor variant_input(const ModelConfig& config, const Tensor& feature_maps,
                     const std::vector<double>& powers_std) {
    const std::size_t L = config.L;
    const std::size_t h = config.pooled_h(), w = config.pooled_w();
    const std::size_t c_in = config.input_channels();
    Tensor out({L, c_in, h, w});

    if (config.variant != Variant::RF) {
        if (feature_maps.rank() != 4 || feature_maps.dim(0) != L || feature_maps.dim(1) != 1 ||
            feature_maps.dim(2) != h || feature_maps.dim(3) != w) {
            throw DimensionError("variant_input: feature maps must be L×1×h×w");
        }
    }
    if (config.variant != Variant::Img && powers_std.size() != L) {
        throw DimensionError("variant_input: need L power values");
    }

    for (std::size_t t = 0; t < L; ++t) {
        double* dst = out.data.data() + t * c_in * h * w;
        switch (config.variant) {
            case Variant::RF:
                for (std::size_t i = 0; i < h * w; ++i) dst[i] = powers_std[t];
                break;
            case Variant::Img:
                std::memcpy(dst, feature_maps.data.data() + t * h * w, h * w * sizeof(double));
                break;
            case Variant::ImgRF:
                for (std::size_t i = 0; i < h * w; ++i) dst[i] = powers_std[t];
                std::memcpy(dst + h * w, feature_maps.data.data() + t * h * w,
                            h * w * sizeof(double));
                break;
        }
    }
    return out;
}

std::size_t count_upper_layer_weights(const UESegment& seg) { return seg.conv2_w.numel(); }

namespace {

constexpr char kCkptMagic[4] = {'M', 'S', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint: unexpected end of file");
    return v;
}

void write_tensor(std::ostream& os, const Tensor& t) {
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape) write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& is) {
    const auto rank = read_pod<std::uint8_t>(is);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = read_pod<std::uint32_t>(is);
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw IoError("checkpoint: truncated tensor data");
    return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kCkptMagic, 4);
    write_pod(os, kCkptVersion);
    const ModelConfig& c = ckpt.config;
    for (std::size_t v : {c.L, c.N_W, c.N_H, c.w_W, c.w_H, c.S, c.conv1_channels,
                          c.lstm_hidden_channels}) {
        write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(v));
    }
    write_pod(os, c.T_ms);
    write_pod(os, c.tau_ms);
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(c.variant));
    write_pod(os, ckpt.power_mean);
    write_pod(os, ckpt.power_std);

    auto ue = ckpt.ue.params();
    auto bs = ckpt.bs.params();
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ue.size() + bs.size()));
    for (const Tensor* t : ue) write_tensor(os, *t);
    for (const Tensor* t : bs) write_tensor(os, *t);
    if (!os) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCkptMagic, 4) != 0) {
        throw IoError("checkpoint: bad magic in " + path);
    }
    if (read_pod<std::uint32_t>(is) != kCkptVersion) {
        throw IoError("checkpoint: unsupported version in " + path);
    }
    Checkpoint ckpt;
    ModelConfig& c = ckpt.config;
    c.L = read_pod<std::uint32_t>(is);
    c.N_W = read_pod<std::uint32_t>(is);
    c.N_H = read_pod<std::uint32_t>(is);
    c.w_W = read_pod<std::uint32_t>(is);
    c.w_H = read_pod<std::uint32_t>(is);
    c.S = read_pod<std::uint32_t>(is);
    c.conv1_channels = read_pod<std::uint32_t>(is);
    c.lstm_hidden_channels = read_pod<std::uint32_t>(is);
    c.T_ms = read_pod<double>(is);
    c.tau_ms = read_pod<double>(is);
    c.variant = static_cast<Variant>(read_pod<std::uint8_t>(is));
    ckpt.power_mean = read_pod<double>(is);
    ckpt.power_std = read_pod<double>(is);
    c.validate();

    ckpt.ue = UESegment::init(c, 0);
    ckpt.bs = BSSegment::init(c, 0);
    auto ue = ckpt.ue.params();
    auto bs = ckpt.bs.params();
    const auto count = read_pod<std::uint32_t>(is);
    if (count != ue.size() + bs.size()) throw IoError("checkpoint: tensor count mismatch");
    for (Tensor* t : ue) {
        Tensor loaded = read_tensor(is);
        if (!loaded.same_shape(*t)) throw IoError("checkpoint: tensor shape mismatch");
        *t = std::move(loaded);
    }
    for (Tensor* t : bs) {
        Tensor loaded = read_tensor(is);
        if (!loaded.same_shape(*t)) throw IoError("checkpoint: tensor shape mismatch");
        *t = std::move(loaded);
    }
    return ckpt;
}

}  // namespace multsl
