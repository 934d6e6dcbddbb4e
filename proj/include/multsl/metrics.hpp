#pragma once

#include <map>
#include <vector>

#include "multsl/scenario.hpp"
#include "multsl/tensor.hpp"

namespace multsl {

struct PredictionRecord {
    std::size_t k = 0;           // anchor index
    double p_hat_dbm = 0.0;      // de-standardized prediction at k + S
    double p_actual_dbm = 0.0;
    LinkLabel label = LinkLabel::LoS;  // ground truth at the target index
};

// Root of the mean squared error over the record set, in dB.
double rmse(const std::vector<PredictionRecord>& records);

// RMSE restricted to each label; labels with no records are absent from the
// map, never reported as zero.
std::map<LinkLabel, double> segmented_rmse(const std::vector<PredictionRecord>& records);

// Each input pixel becomes an f_h×f_w block.
Tensor upsample_nearest(const Tensor& map, std::size_t f_h, std::size_t f_w);

// Euclidean norm of the flattened pixel difference; inputs must already be
// scaled to [0,1] and have equal pixel counts.
double image_distance(const Tensor& x, const Tensor& y);

// Thrown when every CNN output is pixel-identical to its raw frame, i.e. the
// leakage would be 1/0. Reported by callers as "maximal leakage".
struct DegenerateLeakage : MetricError {
    using MetricError::MetricError;
};

// 1 / max_k d(x_k, phi(x_k)). Outputs are upsampled to the raw resolution by
// nearest neighbor and min-max normalized per frame before the distance.
double privacy_leakage(const std::vector<Tensor>& raw_frames,
                       const std::vector<Tensor>& cnn_outputs);

}  // namespace multsl
