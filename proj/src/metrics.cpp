#include "multsl/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace multsl {

double rmse(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw MetricError("rmse: empty record set");
    double acc = 0.0;
    for (const PredictionRecord& r : records) {
        const double d = r.p_hat_dbm - r.p_actual_dbm;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(records.size()));
}

std::map<LinkLabel, double> segmented_rmse(const std::vector<PredictionRecord>& records) {
    if (records.empty()) throw MetricError("segmented_rmse: empty record set");
    std::map<LinkLabel, std::vector<PredictionRecord>> by_label;
    for (const PredictionRecord& r : records) by_label[r.label].push_back(r);
    std::map<LinkLabel, double> out;
    for (const auto& [label, group] : by_label) out[label] = rmse(group);
    return out;
}

Tensor upsample_nearest(const Tensor& map, std::size_t f_h, std::size_t f_w) {
    if (map.rank() != 3 || map.dim(0) != 1) {
        throw DimensionError("upsample_nearest: map must be 1×h×w");
    }
    if (f_h == 0 || f_w == 0) throw ConfigError("upsample_nearest: zero factor");
    const std::size_t h = map.dim(1), w = map.dim(2);
    Tensor out({1, h * f_h, w * f_w});
    for (std::size_t y = 0; y < h * f_h; ++y) {
        for (std::size_t x = 0; x < w * f_w; ++x) {
            out.at3(0, y, x) = map.at3(0, y / f_h, x / f_w);
        }
    }
    return out;
}

double image_distance(const Tensor& x, const Tensor& y) {
    if (x.numel() != y.numel()) throw DimensionError("image_distance: pixel count mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double d = x.data[i] - y.data[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

namespace {

Tensor minmax_normalize(const Tensor& t) {
    const auto [lo_it, hi_it] = std::minmax_element(t.data.begin(), t.data.end());
    const double lo = *lo_it, hi = *hi_it;
    Tensor out(t.shape);
    if (hi > lo) {
        for (std::size_t i = 0; i < t.numel(); ++i) out.data[i] = (t.data[i] - lo) / (hi - lo);
    }
    return out;
}

}  // namespace

double privacy_leakage(const std::vector<Tensor>& raw_frames,
                       const std::vector<Tensor>& cnn_outputs) {
    if (raw_frames.empty() || raw_frames.size() != cnn_outputs.size()) {
        throw MetricError("privacy_leakage: need nonempty aligned frame/output sets");
    }
    double max_dist = 0.0;
    for (std::size_t i = 0; i < raw_frames.size(); ++i) {
        const Tensor& raw = raw_frames[i];
        const Tensor& out = cnn_outputs[i];
        if (raw.rank() != 3 || out.rank() != 3) {
            throw DimensionError("privacy_leakage: frames must be 1×h×w");
        }
        if (raw.dim(1) % out.dim(1) != 0 || raw.dim(2) % out.dim(2) != 0) {
            throw DimensionError("privacy_leakage: output resolution must divide raw resolution");
        }
        Tensor up = upsample_nearest(out, raw.dim(1) / out.dim(1), raw.dim(2) / out.dim(2));
        max_dist = std::max(max_dist, image_distance(raw, minmax_normalize(up)));
    }
    if (max_dist == 0.0) {
        throw DegenerateLeakage("privacy_leakage: outputs identical to inputs (maximal leakage)");
    }
    return 1.0 / max_dist;
}

}  // namespace multsl
