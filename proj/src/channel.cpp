#include "multsl/channel.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace multsl {

double dbm_to_watts(double dbm) { return 1.0e-3 * std::pow(10.0, dbm / 10.0); }

double watts_to_dbm(double watts) { return 10.0 * std::log10(watts / 1.0e-3); }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

double ChannelParams::noise_power_watts() const {
    return dbm_to_watts(noise_psd_dbm_per_hz) * bandwidth_hz;
}

void ChannelParams::validate() const {
    if (!(bandwidth_hz > 0.0)) throw ConfigError("ChannelParams: bandwidth must be > 0");
    if (bits_per_pixel == 0 || bits_per_grad == 0) {
        throw ConfigError("ChannelParams: bit widths must be > 0");
    }
    if (!(t_comp_s > 0.0)) throw ConfigError("ChannelParams: t_comp must be > 0");
    if (!(tau_prime_s > 0.0)) throw ConfigError("ChannelParams: tau' must be > 0");
}

double default_t_comp_s(Variant v) { return v == Variant::RF ? 0.21e-3 : 1.00e-3; }

double shannon_rate(double p_watts, const ChannelParams& params) {
    if (p_watts < 0.0) throw NumericError("shannon_rate: negative received power");
    return params.bandwidth_hz * std::log2(1.0 + p_watts / params.noise_power_watts());
}

std::uint64_t fp_bits(const ModelConfig& config, const ChannelParams& params) {
    return static_cast<std::uint64_t>(config.L) * config.pooled_h() * config.pooled_w() *
           params.bits_per_pixel;
}

double t_fp(double p_watts, const ModelConfig& config, const ChannelParams& params) {
    if (config.variant == Variant::RF) return 0.0;
    const double rate = shannon_rate(p_watts, params);
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(fp_bits(config, params)) / rate;
}

double t_bp(double p_watts, std::size_t n_layer2, Variant variant, const ChannelParams& params) {
    if (variant == Variant::RF) return 0.0;
    const double rate = shannon_rate(p_watts, params);
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(n_layer2) * params.bits_per_grad / rate;
}

double t_step(double p_watts, const ModelConfig& config, std::size_t n_layer2,
              const ChannelParams& params) {
    return t_fp(p_watts, config, params) + t_bp(p_watts, n_layer2, config.variant, params) +
           params.t_comp_s;
}

std::uint64_t steps_per_interval(double t_step_s, const ChannelParams& params) {
    if (!std::isfinite(t_step_s) || t_step_s <= 0.0) return 0;
    return static_cast<std::uint64_t>(std::floor(params.tau_prime_s / t_step_s));
}

LatencyTimeline build_timeline(const std::vector<double>& trace_dbm, const ModelConfig& config,
                               std::size_t n_layer2, const ChannelParams& params) {
    params.validate();
    config.validate();
    LatencyTimeline tl;
    tl.t_comp_s = params.t_comp_s;
    tl.tau_prime_s = params.tau_prime_s;
    tl.t_fp_s.reserve(trace_dbm.size());
    for (double p_dbm : trace_dbm) {
        const double p_w = dbm_to_watts(p_dbm);
        const double fp = t_fp(p_w, config, params);
        const double bp = t_bp(p_w, n_layer2, config.variant, params);
        const double step = fp + bp + params.t_comp_s;
        tl.t_fp_s.push_back(fp);
        tl.t_bp_s.push_back(bp);
        tl.t_step_s.push_back(step);
        tl.n_steps.push_back(steps_per_interval(step, params));
    }
    return tl;
}

Elapsed elapsed_time(std::uint64_t n, const LatencyTimeline& timeline, ElapsedMode mode) {
    if (n < 1) throw TraceError("elapsed_time: step index must be >= 1");
    const std::size_t intervals = timeline.n_steps.size();
    if (intervals == 0) throw TraceError("elapsed_time: empty timeline");

    if (mode == ElapsedMode::EventSim) {
        // The clock includes one extra step duration in the landing interval,
        // matching the published step-count convention; see elapsed-time notes
        // in the README.
        std::uint64_t executed = 0;
        double clock = 0.0;
        for (std::size_t k = 0; k < intervals; ++k) {
            if (timeline.n_steps[k] == 0) {
                clock += timeline.tau_prime_s;
                continue;
            }
            for (std::uint64_t i = 0; i < timeline.n_steps[k]; ++i) {
                clock += timeline.t_step_s[k];
                ++executed;
                if (executed == n + 1) return {clock, k + 1};
            }
        }
        throw TraceError("elapsed_time: trace exhausted before step " + std::to_string(n));
    }

    // Paper formula. k_n is the largest interval whose cumulative step count
    // stays <= n; the landing interval is charged n - sum(N) + 1 steps.
    std::uint64_t cum = 0;
    std::size_t k_n = 0;  // 0 means "no complete interval yet"
    std::uint64_t cum_before = 0;
    double busy_before = 0.0;
    std::uint64_t total = 0;
    for (std::size_t k = 0; k < intervals; ++k) total += timeline.n_steps[k];
    if (total < n) {
        throw TraceError("elapsed_time: trace supports only " + std::to_string(total) +
                         " steps, requested " + std::to_string(n));
    }

    for (std::size_t k = 0; k < intervals; ++k) {
        if (cum + timeline.n_steps[k] > n) break;
        cum += timeline.n_steps[k];
        k_n = k + 1;
    }

    // Zero-budget intervals cannot host the charged step; defer to the next
    // interval that can (or, past the end of the trace, the last one that could).
    std::size_t landing = k_n == 0 ? 1 : k_n;
    while (landing <= intervals && timeline.n_steps[landing - 1] == 0) ++landing;
    if (landing > intervals) {
        landing = intervals;
        while (landing > 1 && timeline.n_steps[landing - 1] == 0) --landing;
    }
    for (std::size_t k = 0; k + 1 < landing; ++k) {
        cum_before += timeline.n_steps[k];
        busy_before += timeline.n_steps[k] > 0
                           ? static_cast<double>(timeline.n_steps[k]) * timeline.t_step_s[k]
                           : timeline.tau_prime_s;
    }
    const double remaining = static_cast<double>(n - cum_before) + 1.0;
    return {busy_before + remaining * timeline.t_step_s[landing - 1], landing};
}

}  // namespace multsl
