#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "multsl/protocol.hpp"
#include "multsl/tensor.hpp"

namespace multsl {

enum class LinkLabel : std::uint8_t { LoS = 0, NLoS = 1, Transition = 2 };

std::string label_name(LinkLabel label);
LinkLabel label_from_name(const std::string& name);

struct ScenarioConfig {
    std::size_t n_samples = 2000;  // 15325 in paper-mode
    std::size_t N_H = 16, N_W = 16;
    double tau_ms = 33.3;
    double los_power_dbm = -60.0;
    double nlos_drop_db = 15.0;
    double nlos_duration_ms_min = 200.0, nlos_duration_ms_max = 300.0;
    double transition_ms_min = 50.0, transition_ms_max = 200.0;
    std::size_t pedestrians = 2;
    double speed_min = 0.4, speed_max = 0.8;  // frame widths per second
    double size_min = 0.15, size_max = 0.30;  // fraction of the frame dims
    double noise_std_db = 0.5;
    std::uint64_t seed = 1;

    void validate() const;
};

// One blockage crossing. Times in seconds from the start of the trace.
struct Episode {
    std::size_t pedestrian = 0;
    double overlap_start_s = 0.0;  // rectangle first touches the link column
    double onset_s = 0.0;          // power ramp-down begins
    double ramp_down_s = 0.0;
    double dwell_s = 0.0;
    double ramp_up_s = 0.0;
    double end_s() const { return onset_s + ramp_down_s + dwell_s + ramp_up_s; }
};

struct Dataset {
    ScenarioConfig config;
    std::vector<Tensor> frames;  // each 1×N_H×N_W, values in [0,1]
    std::vector<double> powers_dbm;
    std::vector<LinkLabel> labels;
    std::vector<Episode> episodes;

    std::size_t size() const { return powers_dbm.size(); }
};

Dataset generate(const ScenarioConfig& config);

enum class SplitMode { Paper, Disjoint };

struct IndexRange {
    std::size_t lo = 0, hi = 0;  // 1-based, inclusive
    std::size_t count() const { return hi >= lo ? hi - lo + 1 : 0; }
};

struct SplitSpec {
    SplitMode mode = SplitMode::Paper;
    IndexRange train, valid, test;
};

// Paper-mode boundaries scale the published index sets proportionally:
// round(n*9928/15325) and round(n*13228/15325). In paper mode the test set
// overlaps the validation set, exactly as printed; disjoint mode starts the
// test set after the validation set.
SplitSpec split_dataset(std::size_t n, SplitMode mode);

struct Standardizer {
    double mean = 0.0;
    double stddev = 1.0;
    double standardize(double x) const { return (x - mean) / stddev; }
    double destandardize(double z) const { return z * stddev + mean; }
};

Standardizer fit_standardizer(const Dataset& dataset, const IndexRange& train);

// Batches for one epoch over the given split. Every sample window
// {k-L+1..k+S} stays inside the range; anchors are shuffled deterministically
// from (seed, epoch); the final short batch is emitted as-is. Returns an
// empty vector when the split is too small for any sample.
std::vector<SampleBatch> make_batches(const Dataset& dataset, const IndexRange& range,
                                      std::size_t L, std::size_t S, std::size_t batch_size,
                                      std::uint64_t seed, std::uint64_t epoch,
                                      const Standardizer& std_spec);

// frames.bin: magic "MSDF", version, count, H, W, then binary32 pixels.
// trace.csv: k,P_dBm,label rows.
void export_dataset(const Dataset& dataset, const std::string& frames_path,
                    const std::string& trace_path);
Dataset import_dataset(const std::string& frames_path, const std::string& trace_path);

}  // namespace multsl
