#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "multsl/layers.hpp"
#include "multsl/metrics.hpp"
#include "test_util.hpp"

using namespace multsl;
using multsl_test::TestRng;

namespace {

std::vector<PredictionRecord> records_from_errors(const std::vector<double>& errors,
                                                  LinkLabel label = LinkLabel::LoS) {
    std::vector<PredictionRecord> recs;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        PredictionRecord r;
        r.k = i + 1;
        r.p_actual_dbm = -60.0;
        r.p_hat_dbm = -60.0 + errors[i];
        r.label = label;
        recs.push_back(r);
    }
    return recs;
}

}  // namespace

TEST_CASE("rmse basics") {
    CHECK(rmse(records_from_errors({0.0, 0.0, 0.0})) == 0.0);
    CHECK(rmse(records_from_errors({0.0, 0.0, 2.0})) == doctest::Approx(std::sqrt(4.0 / 3.0)));
    CHECK_THROWS_AS(rmse({}), MetricError);
}

TEST_CASE("rmse detects offsets and scales covariantly") {
    TestRng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const double c = rng.uniform(-5.0, 5.0);
        std::vector<double> errs(10, c);
        CHECK(rmse(records_from_errors(errs)) == doctest::Approx(std::abs(c)).epsilon(1e-12));

        std::vector<double> base(10);
        for (double& e : base) e = rng.uniform(-3.0, 3.0);
        const double a = rng.uniform(0.1, 4.0);
        std::vector<double> scaled = base;
        for (double& e : scaled) e *= a;
        CHECK(rmse(records_from_errors(scaled)) ==
              doctest::Approx(a * rmse(records_from_errors(base))).epsilon(1e-12));
    }
}

TEST_CASE("segmented rmse keys and weighting identity") {
    auto recs = records_from_errors({1.0, 1.0}, LinkLabel::LoS);
    auto map = segmented_rmse(recs);
    CHECK(map.size() == 1);
    CHECK(map.count(LinkLabel::LoS) == 1);
    CHECK(map.count(LinkLabel::NLoS) == 0);  // absent, never reported as zero

    auto nlos = records_from_errors({4.0, 4.0, 4.0}, LinkLabel::NLoS);
    auto trans = records_from_errors({2.0}, LinkLabel::Transition);
    recs.insert(recs.end(), nlos.begin(), nlos.end());
    recs.insert(recs.end(), trans.begin(), trans.end());
    map = segmented_rmse(recs);
    REQUIRE(map.size() == 3);
    CHECK(map[LinkLabel::NLoS] > map[LinkLabel::LoS]);

    // Overall MSE is the record-count-weighted mean of per-label MSEs.
    double weighted = 0.0;
    weighted += 2.0 * map[LinkLabel::LoS] * map[LinkLabel::LoS];
    weighted += 3.0 * map[LinkLabel::NLoS] * map[LinkLabel::NLoS];
    weighted += 1.0 * map[LinkLabel::Transition] * map[LinkLabel::Transition];
    const double overall = rmse(recs);
    CHECK(overall * overall == doctest::Approx(weighted / 6.0).epsilon(1e-12));
}

TEST_CASE("nearest-neighbor upsampling") {
    Tensor m({1, 2, 2}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
    Tensor up = upsample_nearest(m, 2, 2);
    REQUIRE(up.shape == std::vector<std::size_t>{1, 4, 4});
    CHECK(up.at3(0, 0, 0) == 1.0);
    CHECK(up.at3(0, 0, 1) == 1.0);
    CHECK(up.at3(0, 1, 1) == 1.0);
    CHECK(up.at3(0, 0, 2) == 2.0);
    CHECK(up.at3(0, 3, 3) == 4.0);

    Tensor same = upsample_nearest(m, 1, 1);
    CHECK(same.data == m.data);

    // Every output pixel equals some input pixel.
    Tensor up32 = upsample_nearest(m, 3, 2);
    for (double v : up32.data) {
        CHECK(std::find(m.data.begin(), m.data.end(), v) != m.data.end());
    }
}

TEST_CASE("upsample then block max pool recovers a non-negative map") {
    TestRng rng(43);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor m({1, 4, 5});
        rng.fill(m, 0.0, 1.0);
        Tensor up = upsample_nearest(m, 3, 2);
        PoolResult pooled = max_pool(up, 3, 2);
        CHECK(pooled.output.data == m.data);
    }
}

TEST_CASE("image distance basics and triangle inequality") {
    Tensor a({1, 3, 3}, 0.0);
    Tensor b({1, 3, 3}, 1.0);
    CHECK(image_distance(a, a) == 0.0);
    CHECK(image_distance(a, b) == doctest::Approx(3.0));  // sqrt(9)

    TestRng rng(47);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x({1, 4, 4}), y({1, 4, 4}), z({1, 4, 4});
        rng.fill(x, 0.0, 1.0);
        rng.fill(y, 0.0, 1.0);
        rng.fill(z, 0.0, 1.0);
        CHECK(image_distance(x, z) <= image_distance(x, y) + image_distance(y, z) + 1e-12);
        CHECK(image_distance(x, y) == doctest::Approx(image_distance(y, x)));
    }

    CHECK_THROWS_AS(image_distance(a, Tensor({1, 2, 2})), DimensionError);
}

TEST_CASE("privacy leakage reciprocal and degenerate case") {
    // A constant output frame min-max normalizes to zeros, so against an
    // all-ones 5x5 raw frame the distance is exactly 5 and the leakage 0.2.
    Tensor ones({1, 5, 5}, 1.0);
    std::vector<Tensor> raws{ones};
    std::vector<Tensor> outs{Tensor({1, 5, 5}, 0.7)};
    CHECK(privacy_leakage(raws, outs) == doctest::Approx(0.2).epsilon(1e-12));

    // A single differing unit pixel: distance sqrt(24).
    Tensor spike({1, 5, 5}, 0.0);
    spike.data[0] = 1.0;
    std::vector<Tensor> spike_outs{spike};
    CHECK(privacy_leakage(raws, spike_outs) == doctest::Approx(1.0 / std::sqrt(24.0)));

    // Identical input/output pairs are degenerate (maximal leakage).
    std::vector<Tensor> same{spike};
    CHECK_THROWS_AS(privacy_leakage(same, same), DegenerateLeakage);

    CHECK_THROWS_AS(privacy_leakage({}, {}), MetricError);
    std::vector<Tensor> one{ones};
    CHECK_THROWS_AS(privacy_leakage(one, {}), MetricError);
}

TEST_CASE("privacy leakage upsamples outputs and ignores ordering") {
    TestRng rng(53);
    std::vector<Tensor> raws, outs;
    for (int i = 0; i < 6; ++i) {
        Tensor raw({1, 8, 8});
        rng.fill(raw, 0.0, 1.0);
        Tensor out({1, 2, 2});
        rng.fill(out, 0.0, 3.0);  // arbitrary activation scale
        raws.push_back(std::move(raw));
        outs.push_back(std::move(out));
    }
    const double leak = privacy_leakage(raws, outs);
    CHECK(leak > 0.0);

    std::reverse(raws.begin(), raws.end());
    std::reverse(outs.begin(), outs.end());
    CHECK(privacy_leakage(raws, outs) == leak);

    // Only the argmax-distance pair matters: dropping any other pair keeps it.
    double max_d = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < raws.size(); ++i) {
        std::vector<Tensor> r{raws[i]}, o{outs[i]};
        double d = 1.0 / privacy_leakage(r, o);
        if (d > max_d) {
            max_d = d;
            arg = i;
        }
    }
    std::vector<Tensor> r{raws[arg]}, o{outs[arg]};
    CHECK(privacy_leakage(r, o) == doctest::Approx(leak).epsilon(1e-12));
}
