#pragma once

#include <cstdint>
#include <vector>

#include "multsl/model.hpp"

namespace multsl {

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);
double db_to_linear(double db);
double linear_to_db(double linear);

struct ChannelParams {
    double bandwidth_hz = 40.0e6;
    double noise_psd_dbm_per_hz = -173.0;
    std::uint32_t bits_per_pixel = 32;  // R
    std::uint32_t bits_per_grad = 32;   // R'
    double t_comp_s = 1.0e-3;           // 1.00 ms for Img/Img+RF, 0.21 ms for RF
    double tau_prime_s = 33.3e-3;

    double noise_power_watts() const;  // sigma^2 * W in linear units
    void validate() const;
};

// Computation-time constant per variant.
double default_t_comp_s(Variant v);

// W * log2(1 + P / (sigma^2 W)), bits per second. Throws on negative power.
double shannon_rate(double p_watts, const ChannelParams& params);

// FP payload bits for one sample: L*(N_H/w_H)*(N_W/w_W)*R.
std::uint64_t fp_bits(const ModelConfig& config, const ChannelParams& params);

// FP transmission latency for the interval with received power p. Zero for
// the RF variant; +inf when the link rate is zero (unreachable interval).
double t_fp(double p_watts, const ModelConfig& config, const ChannelParams& params);

// BP transmission latency, sized by the upper conv layer weight count.
double t_bp(double p_watts, std::size_t n_layer2, Variant variant, const ChannelParams& params);

double t_step(double p_watts, const ModelConfig& config, std::size_t n_layer2,
              const ChannelParams& params);

// floor(tau' / T_step); zero when T_step exceeds the interval.
std::uint64_t steps_per_interval(double t_step_s, const ChannelParams& params);

struct LatencyTimeline {
    std::vector<double> t_fp_s, t_bp_s, t_step_s;
    std::vector<std::uint64_t> n_steps;
    double t_comp_s = 0.0;
    double tau_prime_s = 33.3e-3;
};

LatencyTimeline build_timeline(const std::vector<double>& trace_dbm, const ModelConfig& config,
                               std::size_t n_layer2, const ChannelParams& params);

enum class ElapsedMode {
    PaperFormula,  // closed-form with the published "+1" step-count convention
    EventSim,      // step-by-step clock advance under the same convention
};

struct Elapsed {
    double t_n_s = 0.0;
    std::size_t k_n = 0;  // 1-based interval index
};

// Elapsed time until SGD step n (n >= 1). Intervals with zero step budget
// contribute a full tau' and defer the pending step. Throws TraceError when
// the trace ends before step n.
Elapsed elapsed_time(std::uint64_t n, const LatencyTimeline& timeline,
                     ElapsedMode mode = ElapsedMode::PaperFormula);

}  // namespace multsl
