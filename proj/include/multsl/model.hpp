#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "multsl/layers.hpp"
#include "multsl/tensor.hpp"

namespace multsl {

enum class Variant { RF, Img, ImgRF };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
    std::size_t L = 4;          // frames per sample
    std::size_t N_W = 40;       // frame width in pixels
    std::size_t N_H = 40;       // frame height in pixels
    std::size_t w_W = 4;        // pooling window width
    std::size_t w_H = 4;        // pooling window height
    std::size_t S = 4;          // look-ahead in sample steps
    double T_ms = 120.0;        // look-ahead time
    double tau_ms = 33.3;       // frame interval
    std::size_t conv1_channels = 64;
    std::size_t lstm_hidden_channels = 8;
    Variant variant = Variant::ImgRF;

    std::size_t pooled_h() const { return N_H / w_H; }
    std::size_t pooled_w() const { return N_W / w_W; }
    std::size_t input_channels() const { return variant == Variant::ImgRF ? 2 : 1; }
    void validate() const;
};

// Lower segment: conv(1->C1, 3x3, bias) -> relu -> conv(C1->1, 3x3, no bias)
// -> relu -> non-overlapping max pool. Applied to each frame independently.
struct UESegment {
    Tensor conv1_w;  // C1×1×3×3
    Tensor conv1_b;  // C1
    Tensor conv2_w;  // 1×C1×3×3
    std::size_t w_h = 1, w_w = 1;

    static UESegment init(const ModelConfig& config, std::uint64_t seed);
    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
};

struct UEFrameCache {
    Tensor input;   // 1×H×W
    Tensor pre1;    // C1×H×W, pre-activation of conv1
    Tensor relu1;   // C1×H×W
    Tensor pre2;    // 1×H×W, pre-activation of conv2
    PoolResult pool;
};

struct UECache {
    std::vector<UEFrameCache> frames;
};

// frames: L×1×N_H×N_W -> L×1×(N_H/w_H)×(N_W/w_W)
Tensor ue_forward(const UESegment& seg, const Tensor& frames, UECache* cache = nullptr);

// d_cut: gradient at the pooled output. Returns gradients in params() order.
std::vector<Tensor> ue_backward(const UESegment& seg, const UECache& cache, const Tensor& d_cut);

// Upper segment: ConvLSTM unrolled over L steps from zero state, final hidden
// state flattened into a scalar dense head.
struct BSSegment {
    ConvLstmParams lstm;
    Tensor dense_w;  // 1×(C_h·h·w)
    Tensor dense_b;  // 1

    static BSSegment init(const ModelConfig& config, std::uint64_t seed);
    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
};

struct BSCache {
    std::vector<ConvLstmCache> steps;
    Tensor h_last_flat;
};

// fused_seq: L×C_in×h×w -> standardized predicted power
double bs_forward(const BSSegment& seg, const Tensor& fused_seq, BSCache* cache = nullptr);

struct BSGrads {
    std::vector<Tensor> param_grads;  // params() order
    Tensor d_input;                   // L×C_in×h×w
};

BSGrads bs_backward(const BSSegment& seg, const BSCache& cache, double d_pred);

// Channel 0: constant plane filled with the standardized power. Channel 1:
// the depth-image feature map.
Tensor fuse_power(const Tensor& feature_map, double power_std);

// Builds the ConvLSTM input sequence for a variant. feature_maps is ignored
// for RF; powers are ignored for Img.
Tensor variant_input(const ModelConfig& config, const Tensor& feature_maps,
                     const std::vector<double>& powers_std);

// Weight count of the upper convolutional layer (conv2), bias excluded.
std::size_t count_upper_layer_weights(const UESegment& seg);

struct Checkpoint {
    ModelConfig config;
    UESegment ue;
    BSSegment bs;
    double power_mean = 0.0;
    double power_std = 1.0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace multsl
