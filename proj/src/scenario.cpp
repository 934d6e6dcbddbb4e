#include "multsl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace multsl {

std::string label_name(LinkLabel label) {
    switch (label) {
        case LinkLabel::LoS: return "LoS";
        case LinkLabel::NLoS: return "NLoS";
        case LinkLabel::Transition: return "Transition";
    }
    return "?";
}

LinkLabel label_from_name(const std::string& name) {
    if (name == "LoS") return LinkLabel::LoS;
    if (name == "NLoS") return LinkLabel::NLoS;
    if (name == "Transition") return LinkLabel::Transition;
    throw IoError("unknown link label: " + name);
}

void ScenarioConfig::validate() const {
    if (n_samples < 1) throw ConfigError("ScenarioConfig: n_samples must be >= 1");
    if (N_H < 4 || N_W < 4) throw ConfigError("ScenarioConfig: frame must be at least 4x4");
    if (!(tau_ms > 0.0)) throw ConfigError("ScenarioConfig: tau must be > 0");
    if (!(nlos_drop_db > 0.0)) throw ConfigError("ScenarioConfig: nlos_drop_db must be > 0");
    if (nlos_duration_ms_min > nlos_duration_ms_max || !(nlos_duration_ms_min > 0.0)) {
        throw ConfigError("ScenarioConfig: bad NLoS duration range");
    }
    if (transition_ms_min > transition_ms_max || !(transition_ms_min > 0.0)) {
        throw ConfigError("ScenarioConfig: bad transition duration range");
    }
    if (speed_min > speed_max || !(speed_min > 0.0)) {
        throw ConfigError("ScenarioConfig: bad speed range");
    }
    if (size_min > size_max || !(size_min > 0.0) || size_max > 1.0) {
        throw ConfigError("ScenarioConfig: bad size range");
    }
    if (noise_std_db < 0.0) throw ConfigError("ScenarioConfig: noise_std_db must be >= 0");
}

namespace {

// Platform-stable uniform/gaussian draws on top of mt19937_64.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : rng_(seed) {}
    double uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    double gaussian() {
        // Box-Muller; draws two uniforms per call.
        const double u1 = std::max(uniform01(), 1e-300);
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }
    std::uint64_t uniform_index(std::uint64_t n) { return rng_() % n; }

  private:
    std::mt19937_64 rng_;
};

// Visual attributes of one crossing.
struct Crossing {
    Episode ep;
    int direction = 1;          // +1 left-to-right
    double speed_px_s = 0.0;    // leading-edge speed
    double width_px = 0.0;
    double height_px = 0.0;
    double row_center = 0.0;
    double depth = 1.0;         // pixel intensity, near = high
};

}  // namespace

Dataset generate(const ScenarioConfig& config) {
    config.validate();
    Rng rng(config.seed);

    const double tau_s = config.tau_ms * 1e-3;
    const double duration_s = static_cast<double>(config.n_samples) * tau_s;
    const double link_col = static_cast<double>(config.N_W) / 2.0;

    // Episodes are scheduled round-robin across pedestrians on a single
    // global cursor so blockage events never overlap; the rectangle touches
    // the link column 1.5 ramps before the power drop begins, so frames carry
    // predictive information.
    std::vector<Crossing> crossings;
    if (config.pedestrians > 0) {
        double cursor = rng.uniform(0.5, 2.0);
        std::size_t count = 0;
        while (true) {
            Crossing c;
            c.ep.pedestrian = count % config.pedestrians;
            c.ep.ramp_down_s = rng.uniform(config.transition_ms_min, config.transition_ms_max) * 1e-3;
            c.ep.dwell_s = rng.uniform(config.nlos_duration_ms_min, config.nlos_duration_ms_max) * 1e-3;
            c.ep.ramp_up_s = rng.uniform(config.transition_ms_min, config.transition_ms_max) * 1e-3;
            c.ep.onset_s = cursor + 1.5 * c.ep.ramp_down_s;
            c.ep.overlap_start_s = cursor;
            c.direction = (count % 2 == 0) ? 1 : -1;
            c.speed_px_s = rng.uniform(config.speed_min, config.speed_max) *
                           static_cast<double>(config.N_W);
            c.width_px = rng.uniform(config.size_min, config.size_max) *
                         static_cast<double>(config.N_W);
            c.height_px = rng.uniform(config.size_min, config.size_max) *
                          static_cast<double>(config.N_H);
            c.row_center = rng.uniform(0.3, 0.7) * static_cast<double>(config.N_H);
            c.depth = rng.uniform(0.5, 1.0);
            if (c.ep.end_s() >= duration_s) break;
            crossings.push_back(c);
            cursor = c.ep.end_s() + rng.uniform(1.0, 3.0);
            ++count;
        }
    }

    Dataset ds;
    ds.config = config;
    ds.frames.reserve(config.n_samples);
    ds.powers_dbm.reserve(config.n_samples);
    ds.labels.reserve(config.n_samples);
    for (const Crossing& c : crossings) ds.episodes.push_back(c.ep);

    for (std::size_t k = 0; k < config.n_samples; ++k) {
        const double t = static_cast<double>(k) * tau_s;

        // Noiseless blockage attenuation and the label derived from it.
        double drop = 0.0;
        for (const Crossing& c : crossings) {
            const Episode& ep = c.ep;
            if (t < ep.onset_s || t >= ep.end_s()) continue;
            if (t < ep.onset_s + ep.ramp_down_s) {
                drop = config.nlos_drop_db * (t - ep.onset_s) / ep.ramp_down_s;
            } else if (t < ep.onset_s + ep.ramp_down_s + ep.dwell_s) {
                drop = config.nlos_drop_db;
            } else {
                drop = config.nlos_drop_db *
                       (1.0 - (t - ep.onset_s - ep.ramp_down_s - ep.dwell_s) / ep.ramp_up_s);
            }
            break;
        }
        LinkLabel label = LinkLabel::LoS;
        if (drop >= config.nlos_drop_db) {
            label = LinkLabel::NLoS;
        } else if (drop > 0.0) {
            label = LinkLabel::Transition;
        }

        const double noise = config.noise_std_db > 0.0 ? config.noise_std_db * rng.gaussian() : 0.0;
        ds.powers_dbm.push_back(config.los_power_dbm - drop + noise);
        ds.labels.push_back(label);

        // Render the frame: background 0, pedestrians as filled rectangles.
        Tensor frame({1, config.N_H, config.N_W});
        for (const Crossing& c : crossings) {
            const double dt = t - c.ep.overlap_start_s;
            double x_lead = link_col + c.direction * c.speed_px_s * dt;
            double x_lo, x_hi;
            if (c.direction > 0) {
                x_hi = x_lead;
                x_lo = x_lead - c.width_px;
            } else {
                x_lo = x_lead;
                x_hi = x_lead + c.width_px;
            }
            if (x_hi < 0.0 || x_lo >= static_cast<double>(config.N_W)) continue;
            const double y_lo = c.row_center - c.height_px / 2.0;
            const double y_hi = c.row_center + c.height_px / 2.0;
            const std::size_t cx0 = static_cast<std::size_t>(std::max(0.0, std::floor(x_lo)));
            const std::size_t cx1 = static_cast<std::size_t>(
                std::min(static_cast<double>(config.N_W) - 1.0, std::ceil(x_hi) - 1.0));
            const std::size_t cy0 = static_cast<std::size_t>(std::max(0.0, std::floor(y_lo)));
            const std::size_t cy1 = static_cast<std::size_t>(
                std::min(static_cast<double>(config.N_H) - 1.0, std::ceil(y_hi) - 1.0));
            for (std::size_t y = cy0; y <= cy1 && y < config.N_H; ++y) {
                for (std::size_t x = cx0; x <= cx1 && x < config.N_W; ++x) {
                    frame.at3(0, y, x) = std::max(frame.at3(0, y, x), c.depth);
                }
            }
        }
        ds.frames.push_back(std::move(frame));
    }
    return ds;
}

SplitSpec split_dataset(std::size_t n, SplitMode mode) {
    if (n < 8) throw ConfigError("split_dataset: dataset too small to split");
    const auto scale = [n](double boundary) {
        return static_cast<std::size_t>(
            std::llround(static_cast<double>(n) * boundary / 15325.0));
    };
    const std::size_t b1 = scale(9928.0);
    const std::size_t b2 = scale(13228.0);
    if (b1 < 1 || b2 <= b1 || b2 >= n) throw ConfigError("split_dataset: degenerate boundaries");

    SplitSpec spec;
    spec.mode = mode;
    spec.train = {1, b1};
    spec.valid = {b1 + 1, b2};
    spec.test = mode == SplitMode::Paper ? IndexRange{b1 + 1, n} : IndexRange{b2 + 1, n};
    return spec;
}

Standardizer fit_standardizer(const Dataset& dataset, const IndexRange& train) {
    if (train.lo < 1 || train.hi > dataset.size() || train.count() == 0) {
        throw ConfigError("fit_standardizer: train range outside dataset");
    }
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t k = train.lo; k <= train.hi; ++k) {
        const double p = dataset.powers_dbm[k - 1];
        sum += p;
        sum_sq += p * p;
    }
    const double n = static_cast<double>(train.count());
    Standardizer s;
    s.mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - s.mean * s.mean);
    s.stddev = var > 0.0 ? std::sqrt(var) : 1.0;
    return s;
}

std::vector<SampleBatch> make_batches(const Dataset& dataset, const IndexRange& range,
                                      std::size_t L, std::size_t S, std::size_t batch_size,
                                      std::uint64_t seed, std::uint64_t epoch,
                                      const Standardizer& std_spec) {
    if (L < 1 || S < 1 || batch_size < 1) throw ConfigError("make_batches: L, S, batch >= 1");
    if (range.lo < 1 || range.hi > dataset.size()) {
        throw ConfigError("make_batches: range outside dataset");
    }

    std::vector<std::size_t> anchors;
    for (std::size_t k = range.lo + L - 1; k + S <= range.hi; ++k) anchors.push_back(k);
    if (anchors.empty()) return {};

    // Deterministic per-epoch shuffle.
    Rng rng(seed * 0x9e3779b97f4a7c15ULL + epoch + 1);
    for (std::size_t i = anchors.size(); i > 1; --i) {
        std::swap(anchors[i - 1], anchors[rng.uniform_index(i)]);
    }

    const std::size_t H = dataset.config.N_H, W = dataset.config.N_W;
    std::vector<SampleBatch> batches;
    for (std::size_t start = 0; start < anchors.size(); start += batch_size) {
        SampleBatch batch;
        const std::size_t end = std::min(start + batch_size, anchors.size());
        for (std::size_t i = start; i < end; ++i) {
            const std::size_t k = anchors[i];
            Tensor frames({L, 1, H, W});
            std::vector<double> powers(L);
            for (std::size_t t = 0; t < L; ++t) {
                const std::size_t idx = k - L + 1 + t;  // 1-based
                std::memcpy(frames.data.data() + t * H * W, dataset.frames[idx - 1].data.data(),
                            H * W * sizeof(double));
                powers[t] = std_spec.standardize(dataset.powers_dbm[idx - 1]);
            }
            batch.frames.push_back(std::move(frames));
            batch.powers_std.push_back(std::move(powers));
            batch.targets_std.push_back(std_spec.standardize(dataset.powers_dbm[k + S - 1]));
            batch.anchors.push_back(k);
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

namespace {
constexpr char kFramesMagic[4] = {'M', 'S', 'D', 'F'};
constexpr std::uint32_t kFramesVersion = 1;
}  // namespace

void export_dataset(const Dataset& dataset, const std::string& frames_path,
                    const std::string& trace_path) {
    std::ofstream fb(frames_path, std::ios::binary);
    if (!fb) throw IoError("cannot open for writing: " + frames_path);
    fb.write(kFramesMagic, 4);
    const std::uint32_t meta[4] = {kFramesVersion, static_cast<std::uint32_t>(dataset.size()),
                                   static_cast<std::uint32_t>(dataset.config.N_H),
                                   static_cast<std::uint32_t>(dataset.config.N_W)};
    fb.write(reinterpret_cast<const char*>(meta), sizeof(meta));
    std::vector<float> buf;
    for (const Tensor& frame : dataset.frames) {
        buf.assign(frame.data.begin(), frame.data.end());
        fb.write(reinterpret_cast<const char*>(buf.data()),
                 static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!fb) throw IoError("write failed: " + frames_path);

    std::ofstream tc(trace_path);
    if (!tc) throw IoError("cannot open for writing: " + trace_path);
    tc << "k,P_dBm,label\n";
    tc.precision(17);
    for (std::size_t k = 1; k <= dataset.size(); ++k) {
        tc << k << ',' << dataset.powers_dbm[k - 1] << ',' << label_name(dataset.labels[k - 1])
           << '\n';
    }
    if (!tc) throw IoError("write failed: " + trace_path);
}

Dataset import_dataset(const std::string& frames_path, const std::string& trace_path) {
    std::ifstream fb(frames_path, std::ios::binary);
    if (!fb) throw IoError("cannot open: " + frames_path);
    char magic[4];
    fb.read(magic, 4);
    if (!fb || std::memcmp(magic, kFramesMagic, 4) != 0) {
        throw IoError("bad frames magic in " + frames_path);
    }
    std::uint32_t meta[4];
    fb.read(reinterpret_cast<char*>(meta), sizeof(meta));
    if (!fb || meta[0] != kFramesVersion) throw IoError("bad frames header in " + frames_path);

    Dataset ds;
    ds.config.n_samples = meta[1];
    ds.config.N_H = meta[2];
    ds.config.N_W = meta[3];
    const std::size_t px = static_cast<std::size_t>(meta[2]) * meta[3];
    std::vector<float> buf(px);
    for (std::uint32_t i = 0; i < meta[1]; ++i) {
        fb.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(px * sizeof(float)));
        if (!fb) throw IoError("truncated frames file: " + frames_path);
        Tensor frame({1, meta[2], meta[3]});
        for (std::size_t j = 0; j < px; ++j) frame.data[j] = static_cast<double>(buf[j]);
        ds.frames.push_back(std::move(frame));
    }

    std::ifstream tc(trace_path);
    if (!tc) throw IoError("cannot open: " + trace_path);
    std::string line;
    if (!std::getline(tc, line) || line != "k,P_dBm,label") {
        throw IoError("bad trace header in " + trace_path);
    }
    while (std::getline(tc, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        if (!std::getline(row, field, ',')) throw IoError("bad trace row: " + line);
        if (!std::getline(row, field, ',')) throw IoError("bad trace row: " + line);
        ds.powers_dbm.push_back(std::stod(field));
        if (!std::getline(row, field)) throw IoError("bad trace row: " + line);
        ds.labels.push_back(label_from_name(field));
    }
    if (ds.powers_dbm.size() != ds.frames.size()) {
        throw IoError("frames/trace length mismatch between " + frames_path + " and " +
                      trace_path);
    }
    return ds;
}

}  // namespace multsl
