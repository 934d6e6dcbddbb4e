#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "multsl/adam.hpp"
#include "multsl/channel.hpp"
#include "multsl/model.hpp"
#include "multsl/wire.hpp"

namespace multsl {

// One training mini-batch. frames[i] is L×1×N_H×N_W, powers_std[i] has L
// standardized power values, targets_std[i] is the standardized power at
// anchor + S.
struct SampleBatch {
    std::vector<Tensor> frames;
    std::vector<std::vector<double>> powers_std;
    std::vector<double> targets_std;
    std::vector<std::size_t> anchors;  // 1-based dataset indices, traceability only

    std::size_t size() const { return targets_std.size(); }
};

struct StepTiming {
    double t_fp_s = 0.0;
    double t_bp_s = 0.0;
    double t_comp_s = 0.0;
    double t_step_s = 0.0;
    std::size_t interval_k = 0;  // 1-based
};

// Assigns SGD steps to trace intervals by consuming each interval's step
// budget in order. The trace repeats cyclically when exhausted.
class ChannelClock {
  public:
    explicit ChannelClock(LatencyTimeline timeline);
    StepTiming tick();
    std::uint64_t steps_taken() const { return n_; }
    const LatencyTimeline& timeline() const { return timeline_; }

  private:
    LatencyTimeline timeline_;
    std::size_t k_ = 0;
    std::uint64_t done_in_k_ = 0;
    std::uint64_t n_ = 0;
};

struct StepResult {
    double loss = 0.0;
    StepTiming timing;
};

// Raw messages exchanged during a step, in order, for the capture flag.
using MessageLog = std::vector<std::vector<std::uint8_t>>;

// Full split training step: UE forward, FP over the wire, BS forward +
// backward to the cut, BP over the wire, UE backward, Adam on both segments.
// A decode failure aborts before any parameter update. RF skips the wire
// entirely (T_FP = T_BP = 0).
StepResult run_training_step(const ModelConfig& config, UESegment& ue, BSSegment& bs,
                             AdamState& ue_state, AdamState& bs_state, const AdamHyper& hyper,
                             const SampleBatch& batch, WireDtype wire = WireDtype::F32,
                             ChannelClock* clock = nullptr, MessageLog* capture = nullptr);

// Identical architecture and update order without any serialization; the
// equivalence oracle for the split path.
StepResult monolithic_training_step(const ModelConfig& config, UESegment& ue, BSSegment& bs,
                                    AdamState& ue_state, AdamState& bs_state,
                                    const AdamHyper& hyper, const SampleBatch& batch);

struct Prediction {
    double p_hat_std = 0.0;  // standardized predicted power
    StepTiming timing;       // inference needs a single FP transmission
};

Prediction predict(const ModelConfig& config, const UESegment& ue, const BSSegment& bs,
                   const Tensor& frames, const std::vector<double>& powers_std,
                   WireDtype wire = WireDtype::F32, ChannelClock* clock = nullptr);

}  // namespace multsl
