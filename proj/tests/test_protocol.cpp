#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "multsl/protocol.hpp"
#include "multsl/scenario.hpp"
#include "test_util.hpp"

using namespace multsl;
using multsl_test::TestRng;

namespace {

ModelConfig toy_config(Variant v) {
    ModelConfig c;
    c.N_H = c.N_W = 8;
    c.w_H = c.w_W = 2;
    c.conv1_channels = 2;
    c.lstm_hidden_channels = 2;
    c.variant = v;
    return c;
}

SampleBatch toy_batch(const ModelConfig& c, std::size_t b, std::uint64_t seed) {
    TestRng rng(seed);
    SampleBatch batch;
    for (std::size_t i = 0; i < b; ++i) {
        Tensor frames({c.L, 1, c.N_H, c.N_W});
        rng.fill(frames, 0.0, 1.0);
        batch.frames.push_back(std::move(frames));
        std::vector<double> powers(c.L);
        for (double& p : powers) p = rng.uniform(-1.5, 1.5);
        batch.powers_std.push_back(std::move(powers));
        batch.targets_std.push_back(rng.uniform(-1.5, 1.5));
        batch.anchors.push_back(i + c.L);
    }
    return batch;
}

template <typename PtrVec>
std::vector<double> flatten_params(const PtrVec& params) {
    std::vector<double> flat;
    for (const Tensor* p : params) flat.insert(flat.end(), p->data.begin(), p->data.end());
    return flat;
}

// Count value slots whose bit patterns differ between two decoded tensors, so
// a flip that lands on a NaN payload still counts as exactly one difference.
std::size_t bitwise_diff_count(const Tensor& a, const Tensor& b, WireDtype dtype) {
    std::size_t diffs = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (dtype == WireDtype::F32) {
            const float fa = static_cast<float>(a.data[i]), fb = static_cast<float>(b.data[i]);
            if (std::memcmp(&fa, &fb, 4) != 0) ++diffs;
        } else {
            if (std::memcmp(&a.data[i], &b.data[i], 8) != 0) ++diffs;
        }
    }
    return diffs;
}

}  // namespace

TEST_CASE("fp message size for the worked example") {
    // One sample, L=4 maps of 10x10 binary32 values: 12800 body bits.
    FpMessage msg;
    msg.maps.emplace_back(std::vector<std::size_t>{4, 1, 10, 10}, 0.5);
    std::vector<std::uint8_t> bytes = encode_fp(msg);
    CHECK((bytes.size() - 24) * 8 == 12800);
}

TEST_CASE("payload bit accounting") {
    ModelConfig c;  // paper geometry: L=4, 40x40
    c.w_H = c.w_W = 1;
    CHECK(fp_payload_bits(c, 32) == 204800);
    c.w_H = c.w_W = 4;
    CHECK(fp_payload_bits(c, 32) == 12800);
    c.w_H = c.w_W = 40;
    CHECK(fp_payload_bits(c, 32) == 128);

    // 4x4 pooling shrinks the payload by exactly the pixel ratio.
    ModelConfig full;
    full.w_H = full.w_W = 1;
    ModelConfig pooled;
    pooled.w_H = pooled.w_W = 4;
    CHECK(fp_payload_bits(full, 32) / fp_payload_bits(pooled, 32) == 16);

    CHECK(bp_payload_bits(c, 576, 32) == 18432);
    CHECK(bp_payload_bits(c, 72, 32) == 2304);
    CHECK(bp_payload_bits(c, 0, 32) == 0);
    c.w_H = c.w_W = 4;
    CHECK(bp_payload_bits(c, 576, 32, BpAccounting::BodySize) == 12800);
}

TEST_CASE("payload bits scale linearly in batch and precision") {
    ModelConfig c;
    for (std::size_t b : {1, 2, 7, 64}) {
        CHECK(fp_payload_bits(c, 32, b) == b * fp_payload_bits(c, 32));
    }
    CHECK(fp_payload_bits(c, 64) == 2 * fp_payload_bits(c, 32));
    CHECK(bp_payload_bits(c, 576, 64) == 2 * bp_payload_bits(c, 576, 32));
}

TEST_CASE("empty messages round-trip") {
    FpMessage fp;
    FpMessage fp_back = decode_fp(encode_fp(fp));
    CHECK(fp_back.maps.empty());

    BpMessage bp;
    bp.accounting_bits = 18432;
    BpMessage bp_back = decode_bp(encode_bp(bp));
    CHECK(bp_back.grads.empty());
    CHECK(bp_back.accounting_bits == 18432);
}

TEST_CASE("randomized wire round-trips are bitwise at the wire precision") {
    TestRng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t b = 1 + rng.index(4);
        const std::size_t L = 1 + rng.index(4);
        const std::size_t h = 1 + rng.index(5), w = 1 + rng.index(5);
        const WireDtype dtype = rng.index(2) ? WireDtype::F64 : WireDtype::F32;

        FpMessage fp;
        fp.dtype = dtype;
        for (std::size_t i = 0; i < b; ++i) {
            Tensor t({L, 1, h, w});
            rng.fill(t, -100.0, 100.0);
            if (dtype == WireDtype::F32) {
                for (double& v : t.data) v = static_cast<double>(static_cast<float>(v));
            }
            fp.maps.push_back(std::move(t));
        }
        FpMessage back = decode_fp(encode_fp(fp));
        REQUIRE(back.maps.size() == b);
        for (std::size_t i = 0; i < b; ++i) {
            CHECK(back.maps[i].shape == fp.maps[i].shape);
            CHECK(back.maps[i].data == fp.maps[i].data);
        }

        BpMessage bp;
        bp.dtype = dtype;
        bp.accounting_bits = rng.index(1u << 20);
        bp.grads = fp.maps;
        BpMessage bp_back = decode_bp(encode_bp(bp));
        CHECK(bp_back.accounting_bits == bp.accounting_bits);
        REQUIRE(bp_back.grads.size() == b);
        for (std::size_t i = 0; i < b; ++i) CHECK(bp_back.grads[i].data == bp.grads[i].data);
    }
}

TEST_CASE("header corruption is detected") {
    FpMessage fp;
    fp.maps.emplace_back(std::vector<std::size_t>{2, 1, 3, 3}, 1.0);
    std::vector<std::uint8_t> bytes = encode_fp(fp);

    auto corrupt = [&](std::size_t at, std::uint8_t v) {
        std::vector<std::uint8_t> c = bytes;
        c[at] = v;
        return c;
    };
    CHECK_THROWS_AS(decode_fp(corrupt(0, 'X')), DecodeError);             // magic
    CHECK_THROWS_AS(decode_fp(corrupt(4, 9)), DecodeError);               // version
    CHECK_THROWS_AS(decode_fp(corrupt(6, 7)), DecodeError);               // dtype tag
    CHECK_THROWS_AS(decode_fp(corrupt(8, 200)), DecodeError);             // b vs length
    CHECK_THROWS_AS(decode_bp(bytes), DecodeError);                       // wrong magic family
    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + 10);
    CHECK_THROWS_AS(decode_fp(truncated), DecodeError);
    std::vector<std::uint8_t> padded = bytes;
    padded.push_back(0);
    CHECK_THROWS_AS(decode_fp(padded), DecodeError);

    BpMessage bp;
    bp.grads.emplace_back(std::vector<std::size_t>{2, 1, 3, 3}, 1.0);
    std::vector<std::uint8_t> bp_bytes = encode_bp(bp);
    bp_bytes[0] = 'Q';
    CHECK_THROWS_AS(decode_bp(bp_bytes), DecodeError);
}

TEST_CASE("a single body bit flip perturbs exactly one element") {
    for (WireDtype dtype : {WireDtype::F32, WireDtype::F64}) {
        TestRng rng(dtype == WireDtype::F32 ? 91 : 92);
        FpMessage fp;
        fp.dtype = dtype;
        Tensor t({2, 1, 4, 4});
        rng.fill(t, 0.1, 2.0);
        fp.maps.push_back(t);
        std::vector<std::uint8_t> bytes = encode_fp(fp);
        const FpMessage clean = decode_fp(bytes);

        for (int trial = 0; trial < 64; ++trial) {
            std::vector<std::uint8_t> bad = bytes;
            const std::size_t byte_at = 24 + rng.index(bytes.size() - 24);
            bad[byte_at] ^= static_cast<std::uint8_t>(1u << rng.index(8));
            const FpMessage dirty = decode_fp(bad);  // body flips must still decode
            CHECK(bitwise_diff_count(clean.maps[0], dirty.maps[0], dtype) == 1);
        }
    }
}

TEST_CASE("ragged or malformed tensors are rejected before encoding") {
    FpMessage fp;
    fp.maps.emplace_back(std::vector<std::size_t>{2, 1, 3, 3}, 1.0);
    fp.maps.emplace_back(std::vector<std::size_t>{2, 1, 4, 4}, 1.0);
    CHECK_THROWS_AS(encode_fp(fp), DimensionError);

    FpMessage bad_rank;
    bad_rank.maps.emplace_back(std::vector<std::size_t>{3, 3}, 1.0);
    CHECK_THROWS_AS(encode_fp(bad_rank), DimensionError);

    FpMessage nonfinite;
    Tensor t({1, 1, 2, 2}, 1.0);
    t.data[1] = std::nan("");
    nonfinite.maps.push_back(t);
    CHECK_THROWS_AS(encode_fp(nonfinite), NumericError);
}

TEST_CASE("training loss decreases on a fixed batch for most seeds") {
    std::size_t improved = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ModelConfig c = toy_config(Variant::ImgRF);
        UESegment ue = UESegment::init(c, seed);
        BSSegment bs = BSSegment::init(c, seed + 101);
        AdamState ue_state = AdamState::like(ue.params());
        AdamState bs_state = AdamState::like(bs.params());
        AdamHyper hyper;
        hyper.learning_rate = 1e-2;
        SampleBatch batch = toy_batch(c, 8, seed);

        const double first =
            run_training_step(c, ue, bs, ue_state, bs_state, hyper, batch).loss;
        double last = first;
        for (int i = 0; i < 30; ++i) {
            last = run_training_step(c, ue, bs, ue_state, bs_state, hyper, batch).loss;
        }
        if (last < first) ++improved;
    }
    CHECK(improved >= 18);
}

TEST_CASE("split and monolithic training agree") {
    for (Variant v : {Variant::RF, Variant::Img, Variant::ImgRF}) {
        ModelConfig c = toy_config(v);
        UESegment ue_a = UESegment::init(c, 31), ue_b = UESegment::init(c, 31);
        BSSegment bs_a = BSSegment::init(c, 32), bs_b = BSSegment::init(c, 32);
        AdamState ua = AdamState::like(ue_a.params()), ub = AdamState::like(ue_b.params());
        AdamState ba = AdamState::like(bs_a.params()), bb = AdamState::like(bs_b.params());
        AdamHyper hyper;

        for (int step = 0; step < 5; ++step) {
            SampleBatch batch = toy_batch(c, 4, 400 + step);
            const double la =
                run_training_step(c, ue_a, bs_a, ua, ba, hyper, batch, WireDtype::F64).loss;
            const double lb = monolithic_training_step(c, ue_b, bs_b, ub, bb, hyper, batch).loss;
            CHECK(la == lb);  // lossless wire: bitwise equality end to end
        }
        CHECK(flatten_params(ue_a.params()) == flatten_params(ue_b.params()));
        CHECK(flatten_params(bs_a.params()) == flatten_params(bs_b.params()));
    }
}

TEST_CASE("f32 wire keeps parameters within the serialization tolerance") {
    ModelConfig c = toy_config(Variant::ImgRF);
    UESegment ue_a = UESegment::init(c, 55), ue_b = UESegment::init(c, 55);
    BSSegment bs_a = BSSegment::init(c, 56), bs_b = BSSegment::init(c, 56);
    AdamState ua = AdamState::like(ue_a.params()), ub = AdamState::like(ue_b.params());
    AdamState ba = AdamState::like(bs_a.params()), bb = AdamState::like(bs_b.params());
    AdamHyper hyper;

    for (int step = 0; step < 10; ++step) {
        SampleBatch batch = toy_batch(c, 4, 500 + step);
        run_training_step(c, ue_a, bs_a, ua, ba, hyper, batch, WireDtype::F32);
        monolithic_training_step(c, ue_b, bs_b, ub, bb, hyper, batch);
    }
    auto deviation = [](const std::vector<double>& a, const std::vector<double>& b) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            num += (a[i] - b[i]) * (a[i] - b[i]);
            den += b[i] * b[i];
        }
        return std::sqrt(num) / std::sqrt(den);
    };
    CHECK(deviation(flatten_params(ue_a.params()), flatten_params(ue_b.params())) <= 1e-5);
    CHECK(deviation(flatten_params(bs_a.params()), flatten_params(bs_b.params())) <= 1e-5);
}

TEST_CASE("a failed step leaves both segments untouched") {
    ModelConfig c = toy_config(Variant::ImgRF);
    UESegment ue = UESegment::init(c, 61);
    BSSegment bs = BSSegment::init(c, 62);
    AdamState ue_state = AdamState::like(ue.params());
    AdamState bs_state = AdamState::like(bs.params());
    AdamHyper hyper;

    const std::vector<double> ue_before = flatten_params(ue.params());
    const std::vector<double> bs_before = flatten_params(bs.params());

    SampleBatch bad = toy_batch(c, 2, 600);
    bad.frames[1] = Tensor({c.L, 1, c.N_H + 1, c.N_W});  // malformed mid-batch
    CHECK_THROWS_AS(run_training_step(c, ue, bs, ue_state, bs_state, hyper, bad), Error);

    SampleBatch poisoned = toy_batch(c, 2, 601);
    poisoned.frames[0].data[5] = std::nan("");  // rejected at input validation
    CHECK_THROWS_AS(run_training_step(c, ue, bs, ue_state, bs_state, hyper, poisoned),
                    NumericError);

    CHECK(flatten_params(ue.params()) == ue_before);
    CHECK(flatten_params(bs.params()) == bs_before);
    CHECK(ue_state.step_count == 0);
    CHECK(bs_state.step_count == 0);

    SampleBatch empty;
    CHECK_THROWS_AS(run_training_step(c, ue, bs, ue_state, bs_state, hyper, empty), ConfigError);
}

TEST_CASE("channel clock consumes interval budgets in order") {
    LatencyTimeline tl;
    tl.t_fp_s = {1e-3, 2e-3, 3e-3};
    tl.t_bp_s = {1e-4, 2e-4, 3e-4};
    tl.t_step_s = {2e-3, 4e-3, 6e-3};
    tl.n_steps = {2, 0, 1};
    tl.t_comp_s = 1e-3;

    ChannelClock clock(tl);
    CHECK(clock.tick().interval_k == 1);
    CHECK(clock.tick().interval_k == 1);
    StepTiming t = clock.tick();  // interval 2 has no budget and is skipped
    CHECK(t.interval_k == 3);
    CHECK(t.t_step_s == 6e-3);
    CHECK(clock.tick().interval_k == 1);  // the trace repeats cyclically
    CHECK(clock.steps_taken() == 4);

    LatencyTimeline dead = tl;
    dead.n_steps = {0, 0, 0};
    CHECK_THROWS_AS(ChannelClock{dead}, TraceError);
}

TEST_CASE("rf steps never touch the wire") {
    ModelConfig c = toy_config(Variant::RF);
    UESegment ue = UESegment::init(c, 71);
    BSSegment bs = BSSegment::init(c, 72);
    const std::vector<double> ue_before = flatten_params(ue.params());
    AdamState ue_state = AdamState::like(ue.params());
    AdamState bs_state = AdamState::like(bs.params());
    AdamHyper hyper;
    SampleBatch batch = toy_batch(c, 3, 700);

    MessageLog log;
    run_training_step(c, ue, bs, ue_state, bs_state, hyper, batch, WireDtype::F32, nullptr, &log);
    CHECK(log.empty());
    CHECK(flatten_params(ue.params()) == ue_before);  // no image path, no UE update
    CHECK(bs_state.step_count == 1);
}

TEST_CASE("capture records one fp and one bp message per image step") {
    ModelConfig c = toy_config(Variant::ImgRF);
    UESegment ue = UESegment::init(c, 81);
    BSSegment bs = BSSegment::init(c, 82);
    AdamState ue_state = AdamState::like(ue.params());
    AdamState bs_state = AdamState::like(bs.params());
    AdamHyper hyper;
    SampleBatch batch = toy_batch(c, 2, 800);

    MessageLog log;
    run_training_step(c, ue, bs, ue_state, bs_state, hyper, batch, WireDtype::F32, nullptr, &log);
    REQUIRE(log.size() == 2);
    CHECK(std::memcmp(log[0].data(), "MSFP", 4) == 0);
    CHECK(std::memcmp(log[1].data(), "MSBP", 4) == 0);
    const BpMessage bp = decode_bp(log[1]);
    CHECK(bp.accounting_bits == count_upper_layer_weights(ue) * 32);
}
