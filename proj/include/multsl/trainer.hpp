#pragma once

#include <cstdint>
#include <vector>

#include "multsl/channel.hpp"
#include "multsl/metrics.hpp"
#include "multsl/protocol.hpp"
#include "multsl/scenario.hpp"

namespace multsl {

struct TrainParams {
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
    WireDtype wire = WireDtype::F32;
    bool split = true;      // false runs the monolithic path
    bool capture = false;   // record every FP/BP message
};

struct EpochLog {
    std::size_t epoch = 0;      // 0 is the pre-training snapshot
    std::uint64_t step_n = 0;
    double t_n_s = 0.0;         // modeled elapsed channel time at step_n
    double val_rmse_db = 0.0;
};

struct TrainedModel {
    ModelConfig config;
    UESegment ue;
    BSSegment bs;
    Standardizer std_spec;
    std::vector<EpochLog> log;
    std::vector<MessageLog> captured;  // one entry per step when capturing
};

TrainedModel train_model(const Dataset& dataset, const SplitSpec& split,
                         const ModelConfig& config, const ChannelParams& channel,
                         const TrainParams& params);

// Predictions for every valid anchor window inside the range.
std::vector<PredictionRecord> evaluate(const Dataset& dataset, const IndexRange& range,
                                       const ModelConfig& config, const UESegment& ue,
                                       const BSSegment& bs, const Standardizer& std_spec);

// Per-frame UE convolutional outputs phi(x_k) over a range, for the privacy
// metric. Each entry is 1×(N_H/w_H)×(N_W/w_W).
std::vector<Tensor> ue_outputs(const Dataset& dataset, const IndexRange& range,
                               const UESegment& ue);

// Raw frames over a range, aligned with ue_outputs.
std::vector<Tensor> raw_frames(const Dataset& dataset, const IndexRange& range);

}  // namespace multsl
