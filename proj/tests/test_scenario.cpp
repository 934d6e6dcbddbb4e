#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <set>
#include <vector>

#include "multsl/scenario.hpp"

using namespace multsl;

namespace {

ScenarioConfig desk_config(std::uint64_t seed) {
    ScenarioConfig c;
    c.seed = seed;
    return c;  // 2000 samples, 16x16, two pedestrians
}

// True when any pixel in one of the two columns adjacent to the link line
// (x = N_W/2) is occupied.
bool covers_link_column(const Tensor& frame, std::size_t n_w) {
    const std::size_t h = frame.dim(1);
    for (std::size_t y = 0; y < h; ++y) {
        if (frame.at3(0, y, n_w / 2 - 1) > 0.0 || frame.at3(0, y, n_w / 2) > 0.0) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("zero pedestrians give a quiet trace") {
    ScenarioConfig c = desk_config(3);
    c.pedestrians = 0;
    c.n_samples = 400;
    Dataset ds = generate(c);
    REQUIRE(ds.size() == 400);
    CHECK(ds.episodes.empty());
    for (std::size_t k = 0; k < ds.size(); ++k) {
        CHECK(ds.labels[k] == LinkLabel::LoS);
        CHECK(std::abs(ds.powers_dbm[k] - c.los_power_dbm) < 6.0 * c.noise_std_db);
        for (double px : ds.frames[k].data) CHECK(px == 0.0);
    }

    c.noise_std_db = 0.0;
    Dataset quiet = generate(c);
    for (double p : quiet.powers_dbm) CHECK(p == c.los_power_dbm);
}

TEST_CASE("generation is deterministic per seed") {
    ScenarioConfig c = desk_config(7);
    c.n_samples = 600;
    Dataset a = generate(c);
    Dataset b = generate(c);
    CHECK(a.powers_dbm == b.powers_dbm);
    CHECK(a.labels == b.labels);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t k = 0; k < a.frames.size(); ++k) {
        CHECK(a.frames[k].data == b.frames[k].data);
    }

    c.seed = 8;
    Dataset other = generate(c);
    CHECK(a.powers_dbm != other.powers_dbm);
}

TEST_CASE("nlos drop depth matches the configured attenuation") {
    Dataset ds = generate(desk_config(11));
    std::size_t episodes = ds.episodes.size();
    REQUIRE(episodes >= 10);

    double los_sum = 0.0, nlos_sum = 0.0;
    std::size_t los_n = 0, nlos_n = 0;
    for (std::size_t k = 0; k < ds.size(); ++k) {
        if (ds.labels[k] == LinkLabel::LoS) {
            los_sum += ds.powers_dbm[k];
            ++los_n;
        } else if (ds.labels[k] == LinkLabel::NLoS) {
            nlos_sum += ds.powers_dbm[k];
            ++nlos_n;
        }
    }
    REQUIRE(los_n > 0);
    REQUIRE(nlos_n > 0);
    const double delta = nlos_sum / nlos_n - los_sum / los_n;
    CHECK(std::abs(delta - (-15.0)) < 1.0);
}

TEST_CASE("nlos runs last a dwell duration within one sample interval") {
    Dataset ds = generate(desk_config(13));
    const ScenarioConfig& c = ds.config;
    const double tau_s = c.tau_ms * 1e-3;

    std::size_t run = 0, runs_seen = 0;
    for (std::size_t k = 0; k <= ds.size(); ++k) {
        if (k < ds.size() && ds.labels[k] == LinkLabel::NLoS) {
            ++run;
            continue;
        }
        if (run > 0) {
            ++runs_seen;
            const double dur = static_cast<double>(run) * tau_s;
            CHECK(dur >= c.nlos_duration_ms_min * 1e-3 - tau_s);
            CHECK(dur <= c.nlos_duration_ms_max * 1e-3 + tau_s);
            run = 0;
        }
    }
    CHECK(runs_seen >= 10);
    CHECK(runs_seen == ds.episodes.size());
}

TEST_CASE("transition labels sit strictly between the levels") {
    ScenarioConfig c = desk_config(17);
    c.noise_std_db = 0.0;  // inspect the noiseless process directly
    Dataset ds = generate(c);
    for (std::size_t k = 0; k < ds.size(); ++k) {
        const double p = ds.powers_dbm[k];
        switch (ds.labels[k]) {
            case LinkLabel::LoS: CHECK(p == c.los_power_dbm); break;
            case LinkLabel::NLoS: CHECK(p == c.los_power_dbm - c.nlos_drop_db); break;
            case LinkLabel::Transition:
                CHECK(p < c.los_power_dbm);
                CHECK(p > c.los_power_dbm - c.nlos_drop_db);
                break;
        }
    }
}

TEST_CASE("pedestrians appear near the link before the power drops") {
    Dataset ds = generate(desk_config(19));
    const double tau_s = ds.config.tau_ms * 1e-3;
    for (const Episode& ep : ds.episodes) {
        // Search a window that starts safely after the previous crossing.
        const std::size_t k_from = static_cast<std::size_t>(
            std::max(0.0, (ep.overlap_start_s - 0.4) / tau_s));
        const std::size_t k_onset = static_cast<std::size_t>(ep.onset_s / tau_s);
        REQUIRE(k_onset < ds.size());
        std::size_t k_seen = ds.size();
        for (std::size_t k = k_from; k <= k_onset; ++k) {
            if (covers_link_column(ds.frames[k], ds.config.N_W)) {
                k_seen = k;
                break;
            }
        }
        REQUIRE(k_seen < ds.size());
        const double lead_s = ep.onset_s - static_cast<double>(k_seen) * tau_s;
        CHECK(lead_s >= ep.ramp_down_s - tau_s);
    }
}

TEST_CASE("paper split of 15325 samples is verbatim") {
    SplitSpec spec = split_dataset(15325, SplitMode::Paper);
    CHECK(spec.train.lo == 1);
    CHECK(spec.train.hi == 9928);
    CHECK(spec.valid.lo == 9929);
    CHECK(spec.valid.hi == 13228);
    CHECK(spec.test.lo == 9929);
    CHECK(spec.test.hi == 15325);
}

TEST_CASE("scaled and disjoint splits") {
    SplitSpec spec = split_dataset(2000, SplitMode::Paper);
    CHECK(spec.train.hi == 1296);
    CHECK(spec.valid.lo == 1297);
    CHECK(spec.valid.hi == 1726);
    CHECK(spec.test.lo == 1297);
    CHECK(spec.test.hi == 2000);

    SplitSpec dj = split_dataset(2000, SplitMode::Disjoint);
    CHECK(dj.train.hi == 1296);
    CHECK(dj.valid.hi == 1726);
    CHECK(dj.test.lo == 1727);
    CHECK(dj.test.hi == 2000);
    // Pairwise disjoint in disjoint mode.
    CHECK(dj.train.hi < dj.valid.lo);
    CHECK(dj.valid.hi < dj.test.lo);

    CHECK_THROWS_AS(split_dataset(4, SplitMode::Paper), ConfigError);
}

TEST_CASE("standardizer round-trips and centers the training range") {
    Dataset ds = generate(desk_config(23));
    SplitSpec spec = split_dataset(ds.size(), SplitMode::Paper);
    Standardizer s = fit_standardizer(ds, spec.train);
    CHECK(s.stddev > 0.0);

    double sum = 0.0;
    for (std::size_t k = spec.train.lo; k <= spec.train.hi; ++k) {
        sum += s.standardize(ds.powers_dbm[k - 1]);
    }
    CHECK(std::abs(sum / static_cast<double>(spec.train.count())) < 1e-9);
    CHECK(std::abs(s.destandardize(s.standardize(-63.75)) - (-63.75)) < 1e-12);
}

TEST_CASE("batch anchors enumerate exactly the valid windows") {
    ScenarioConfig c = desk_config(29);
    c.n_samples = 64;
    Dataset ds = generate(c);
    Standardizer s{0.0, 1.0};

    auto anchors_of = [](const std::vector<SampleBatch>& batches) {
        std::set<std::size_t> ks;
        for (const SampleBatch& b : batches) ks.insert(b.anchors.begin(), b.anchors.end());
        return ks;
    };

    // Range {1..10}, L=4, S=4: anchors 4, 5, 6 (targets 8, 9, 10).
    auto batches = make_batches(ds, {1, 10}, 4, 4, 64, 1, 0, s);
    CHECK(anchors_of(batches) == std::set<std::size_t>{4, 5, 6});

    // L=1, S=1 over {1,2}: the single window k=1 -> target 2.
    batches = make_batches(ds, {1, 2}, 1, 1, 64, 1, 0, s);
    REQUIRE(batches.size() == 1);
    CHECK(batches[0].anchors == std::vector<std::size_t>{1});

    // Too small for any window.
    CHECK(make_batches(ds, {1, 7}, 4, 4, 64, 1, 0, s).empty());

    // Batch partitioning with a short tail.
    batches = make_batches(ds, {1, 20}, 4, 4, 4, 1, 0, s);
    std::size_t total = 0;
    for (const SampleBatch& b : batches) total += b.size();
    CHECK(total == 13);  // anchors 4..16
    CHECK(batches.back().size() == 1);
}

TEST_CASE("batch shuffling is deterministic per seed and epoch") {
    ScenarioConfig c = desk_config(31);
    c.n_samples = 120;
    Dataset ds = generate(c);
    Standardizer s = fit_standardizer(ds, {1, 80});

    auto flat_anchors = [&](std::uint64_t seed, std::uint64_t epoch) {
        std::vector<std::size_t> out;
        for (const SampleBatch& b : make_batches(ds, {1, 100}, 4, 4, 16, seed, epoch, s)) {
            out.insert(out.end(), b.anchors.begin(), b.anchors.end());
        }
        return out;
    };

    CHECK(flat_anchors(1, 0) == flat_anchors(1, 0));
    CHECK(flat_anchors(1, 0) != flat_anchors(1, 1));
    CHECK(flat_anchors(1, 0) != flat_anchors(2, 0));

    // The batch payload matches the dataset at its anchor.
    auto batches = make_batches(ds, {1, 100}, 4, 4, 16, 5, 2, s);
    const SampleBatch& b0 = batches.front();
    const std::size_t k = b0.anchors[0];
    CHECK(b0.targets_std[0] == s.standardize(ds.powers_dbm[k + 4 - 1]));
    CHECK(b0.powers_std[0][3] == s.standardize(ds.powers_dbm[k - 1]));
    CHECK(b0.frames[0].data[3 * 16 * 16] == ds.frames[k - 1].data[0]);
}

TEST_CASE("dataset export and import round-trip") {
    ScenarioConfig c = desk_config(37);
    c.n_samples = 150;
    Dataset ds = generate(c);

    const std::string frames_path = "ds_roundtrip_frames.bin";
    const std::string trace_path = "ds_roundtrip_trace.csv";
    export_dataset(ds, frames_path, trace_path);
    Dataset back = import_dataset(frames_path, trace_path);
    std::remove(frames_path.c_str());
    std::remove(trace_path.c_str());

    REQUIRE(back.size() == ds.size());
    CHECK(back.labels == ds.labels);
    for (std::size_t k = 0; k < ds.size(); ++k) {
        CHECK(back.powers_dbm[k] == ds.powers_dbm[k]);  // 17 digits round-trip doubles
        REQUIRE(back.frames[k].numel() == ds.frames[k].numel());
        for (std::size_t j = 0; j < ds.frames[k].numel(); ++j) {
            // Pixels travel as binary32.
            CHECK(back.frames[k].data[j] ==
                  static_cast<double>(static_cast<float>(ds.frames[k].data[j])));
        }
    }

    CHECK_THROWS_AS(import_dataset("missing_frames.bin", trace_path), IoError);
}

TEST_CASE("config validation rejects bad ranges") {
    ScenarioConfig c = desk_config(1);
    c.nlos_duration_ms_min = 400.0;  // min above max
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = desk_config(1);
    c.nlos_drop_db = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = desk_config(1);
    c.size_max = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);

    CHECK(label_name(LinkLabel::Transition) == "Transition");
    CHECK(label_from_name("NLoS") == LinkLabel::NLoS);
    CHECK_THROWS_AS(label_from_name("nlos"), IoError);
}
