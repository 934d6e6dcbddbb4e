#pragma once

#include <cstdint>
#include <vector>

#include "multsl/model.hpp"
#include "multsl/tensor.hpp"

namespace multsl {

// Values on the wire: binary32 by default (R = R' = 32 bits per value),
// binary64 for the split/unsplit equivalence test mode.
enum class WireDtype : std::uint8_t { F32 = 0, F64 = 1 };

std::size_t wire_value_bytes(WireDtype dtype);

// FP message: the UE's pooled activation maps for b samples, each L×1×h×w.
struct FpMessage {
    std::vector<Tensor> maps;
    WireDtype dtype = WireDtype::F32;
};

// BP message: cut-activation gradients for b samples. accounting_bits holds
// the reported payload size, which in paper mode is N_layer2 * R' regardless
// of the body length.
struct BpMessage {
    std::vector<Tensor> grads;
    WireDtype dtype = WireDtype::F32;
    std::uint64_t accounting_bits = 0;
};

// Byte layout (little-endian):
//   magic[4] ("MSFP"/"MSBP"), version u16, dtype u8, reserved u8,
//   b u32, L u32, h u32, w u32,
//   accounting_bits u64 (BP only),
//   body: b*L*h*w values, row-major, sample-major.
std::vector<std::uint8_t> encode_fp(const FpMessage& msg);
FpMessage decode_fp(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_bp(const BpMessage& msg);
BpMessage decode_bp(const std::vector<std::uint8_t>& bytes);

// Nominal payload accounting used by the latency model. The default batch
// factor is 1: per-step latency is charged for a single sample.
std::uint64_t fp_payload_bits(const ModelConfig& config, std::uint32_t bits_per_pixel,
                              std::size_t batch = 1);

enum class BpAccounting { Paper, BodySize };

std::uint64_t bp_payload_bits(const ModelConfig& config, std::size_t n_layer2,
                              std::uint32_t bits_per_grad,
                              BpAccounting mode = BpAccounting::Paper);

}  // namespace multsl
