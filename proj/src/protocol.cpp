#include "multsl/protocol.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace multsl {

namespace {

// Cut-channel gradient for one sample: the feature-map channel of the BS
// input gradient, as an L×1×h×w tensor. Power-plane gradients stay at the BS
// (powers are its own inputs).
Tensor extract_cut_grad(const ModelConfig& config, const Tensor& d_input) {
    const std::size_t L = config.L, h = config.pooled_h(), w = config.pooled_w();
    const std::size_t c_in = config.input_channels();
    const std::size_t map_channel = config.variant == Variant::ImgRF ? 1 : 0;
    Tensor out({L, 1, h, w});
    for (std::size_t t = 0; t < L; ++t) {
        std::memcpy(out.data.data() + t * h * w,
                    d_input.data.data() + (t * c_in + map_channel) * h * w,
                    h * w * sizeof(double));
    }
    return out;
}

std::vector<Tensor> zero_grads_like(const std::vector<Tensor*>& params) {
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (const Tensor* p : params) grads.emplace_back(p->shape);
    return grads;
}

std::vector<const Tensor*> grad_ptrs(const std::vector<Tensor>& grads) {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(grads.size());
    for (const Tensor& g : grads) ptrs.push_back(&g);
    return ptrs;
}

}  // namespace

ChannelClock::ChannelClock(LatencyTimeline timeline) : timeline_(std::move(timeline)) {
    if (timeline_.n_steps.empty()) throw TraceError("ChannelClock: empty timeline");
    std::uint64_t total = 0;
    for (std::uint64_t s : timeline_.n_steps) total += s;
    if (total == 0) throw TraceError("ChannelClock: no interval admits a step");
}

StepTiming ChannelClock::tick() {
    while (done_in_k_ >= timeline_.n_steps[k_]) {
        k_ = (k_ + 1) % timeline_.n_steps.size();
        done_in_k_ = 0;
    }
    ++done_in_k_;
    ++n_;
    StepTiming t;
    t.t_fp_s = timeline_.t_fp_s[k_];
    t.t_bp_s = timeline_.t_bp_s[k_];
    t.t_comp_s = timeline_.t_comp_s;
    t.t_step_s = timeline_.t_step_s[k_];
    t.interval_k = k_ + 1;
    return t;
}

StepResult run_training_step(const ModelConfig& config, UESegment& ue, BSSegment& bs,
                             AdamState& ue_state, AdamState& bs_state, const AdamHyper& hyper,
                             const SampleBatch& batch, WireDtype wire, ChannelClock* clock,
                             MessageLog* capture) {
    config.validate();
    hyper.validate();
    const std::size_t b = batch.size();
    if (b == 0) throw ConfigError("run_training_step: empty batch");
    for (const Tensor& f : batch.frames) check_finite(f, "run_training_step: frame");
    for (const std::vector<double>& ps : batch.powers_std) {
        for (double p : ps) {
            if (!std::isfinite(p)) throw NumericError("run_training_step: non-finite power");
        }
    }
    for (double t : batch.targets_std) {
        if (!std::isfinite(t)) throw NumericError("run_training_step: non-finite target");
    }
    const bool rf = config.variant == Variant::RF;

    // UE forward + FP transmission.
    std::vector<UECache> ue_caches(b);
    std::vector<Tensor> cut_maps;
    if (!rf) {
        FpMessage fp;
        fp.dtype = wire;
        for (std::size_t i = 0; i < b; ++i) {
            fp.maps.push_back(ue_forward(ue, batch.frames[i], &ue_caches[i]));
        }
        std::vector<std::uint8_t> bytes = encode_fp(fp);
        if (capture) capture->push_back(bytes);
        FpMessage rx;
        try {
            rx = decode_fp(bytes);
        } catch (const DecodeError& e) {
            throw ProtocolError(std::string("FP decode failed, step aborted: ") + e.what());
        }
        cut_maps = std::move(rx.maps);
    }

    // BS forward + loss.
    std::vector<BSCache> bs_caches(b);
    Tensor preds({b});
    Tensor targets({b}, batch.targets_std);
    for (std::size_t i = 0; i < b; ++i) {
        Tensor fused = variant_input(config, rf ? Tensor() : cut_maps[i], batch.powers_std[i]);
        preds.data[i] = bs_forward(bs, fused, &bs_caches[i]);
    }
    const double loss = mse_loss(preds, targets);
    const Tensor d_pred = mse_loss_grad(preds, targets);

    // BS backward; collect cut gradients for the BP signal.
    std::vector<Tensor> bs_grads = zero_grads_like(bs.params());
    BpMessage bp;
    for (std::size_t i = 0; i < b; ++i) {
        BSGrads g = bs_backward(bs, bs_caches[i], d_pred.data[i]);
        for (std::size_t j = 0; j < bs_grads.size(); ++j) accumulate(bs_grads[j], g.param_grads[j]);
        if (!rf) bp.grads.push_back(extract_cut_grad(config, g.d_input));
    }

    // BP transmission + UE backward.
    std::vector<Tensor> ue_grads;
    if (!rf) {
        bp.dtype = wire;
        bp.accounting_bits = count_upper_layer_weights(ue) *
                             static_cast<std::uint64_t>(wire == WireDtype::F32 ? 32 : 64);
        std::vector<std::uint8_t> bytes = encode_bp(bp);
        if (capture) capture->push_back(bytes);
        BpMessage rx;
        try {
            rx = decode_bp(bytes);
        } catch (const DecodeError& e) {
            throw ProtocolError(std::string("BP decode failed, step aborted: ") + e.what());
        }
        ue_grads = zero_grads_like(ue.params());
        for (std::size_t i = 0; i < b; ++i) {
            std::vector<Tensor> g = ue_backward(ue, ue_caches[i], rx.grads[i]);
            for (std::size_t j = 0; j < ue_grads.size(); ++j) accumulate(ue_grads[j], g[j]);
        }
    }

    // Both sides update only after the full exchange succeeded.
    if (!rf) adam_step(ue.params(), grad_ptrs(ue_grads), ue_state, hyper);
    adam_step(bs.params(), grad_ptrs(bs_grads), bs_state, hyper);

    StepResult res;
    res.loss = loss;
    if (clock) res.timing = clock->tick();
    return res;
}

StepResult monolithic_training_step(const ModelConfig& config, UESegment& ue, BSSegment& bs,
                                    AdamState& ue_state, AdamState& bs_state,
                                    const AdamHyper& hyper, const SampleBatch& batch) {
    config.validate();
    hyper.validate();
    const std::size_t b = batch.size();
    if (b == 0) throw ConfigError("monolithic_training_step: empty batch");
    const bool rf = config.variant == Variant::RF;

    std::vector<UECache> ue_caches(b);
    std::vector<Tensor> cut_maps;
    if (!rf) {
        for (std::size_t i = 0; i < b; ++i) {
            cut_maps.push_back(ue_forward(ue, batch.frames[i], &ue_caches[i]));
        }
    }

    std::vector<BSCache> bs_caches(b);
    Tensor preds({b});
    Tensor targets({b}, batch.targets_std);
    for (std::size_t i = 0; i < b; ++i) {
        Tensor fused = variant_input(config, rf ? Tensor() : cut_maps[i], batch.powers_std[i]);
        preds.data[i] = bs_forward(bs, fused, &bs_caches[i]);
    }
    const double loss = mse_loss(preds, targets);
    const Tensor d_pred = mse_loss_grad(preds, targets);

    std::vector<Tensor> bs_grads = zero_grads_like(bs.params());
    std::vector<Tensor> cut_grads;
    for (std::size_t i = 0; i < b; ++i) {
        BSGrads g = bs_backward(bs, bs_caches[i], d_pred.data[i]);
        for (std::size_t j = 0; j < bs_grads.size(); ++j) accumulate(bs_grads[j], g.param_grads[j]);
        if (!rf) cut_grads.push_back(extract_cut_grad(config, g.d_input));
    }

    if (!rf) {
        std::vector<Tensor> ue_grads = zero_grads_like(ue.params());
        for (std::size_t i = 0; i < b; ++i) {
            std::vector<Tensor> g = ue_backward(ue, ue_caches[i], cut_grads[i]);
            for (std::size_t j = 0; j < ue_grads.size(); ++j) accumulate(ue_grads[j], g[j]);
        }
        adam_step(ue.params(), grad_ptrs(ue_grads), ue_state, hyper);
    }
    adam_step(bs.params(), grad_ptrs(bs_grads), bs_state, hyper);

    StepResult res;
    res.loss = loss;
    return res;
}

Prediction predict(const ModelConfig& config, const UESegment& ue, const BSSegment& bs,
                   const Tensor& frames, const std::vector<double>& powers_std, WireDtype wire,
                   ChannelClock* clock) {
    config.validate();
    const bool rf = config.variant == Variant::RF;

    Tensor cut;
    if (!rf) {
        FpMessage fp;
        fp.dtype = wire;
        fp.maps.push_back(ue_forward(ue, frames));
        FpMessage rx;
        try {
            rx = decode_fp(encode_fp(fp));
        } catch (const DecodeError& e) {
            throw ProtocolError(std::string("FP decode failed: ") + e.what());
        }
        cut = std::move(rx.maps.front());
    }

    Tensor fused = variant_input(config, cut, powers_std);
    Prediction pred;
    pred.p_hat_std = bs_forward(bs, fused);
    if (clock && !rf) {
        const StepTiming step = clock->tick();
        pred.timing.t_fp_s = step.t_fp_s;
        pred.timing.t_step_s = step.t_fp_s;  // inference needs a single FP transmission
        pred.timing.interval_k = step.interval_k;
    }
    return pred;
}

}  // namespace multsl
