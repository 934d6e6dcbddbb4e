#include "multsl/wire.hpp"

#include <cstring>
#include <string>

namespace multsl {

namespace {

constexpr std::uint16_t kWireVersion = 1;
constexpr char kFpMagic[4] = {'M', 'S', 'F', 'P'};
constexpr char kBpMagic[4] = {'M', 'S', 'B', 'P'};

struct Header {
    std::uint32_t b = 0, L = 0, h = 0, w = 0;
};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

Header header_of(const std::vector<Tensor>& tensors, const char* what) {
    Header h;
    h.b = static_cast<std::uint32_t>(tensors.size());
    if (h.b == 0) return h;
    const Tensor& t0 = tensors.front();
    if (t0.rank() != 4 || t0.dim(1) != 1) {
        throw DimensionError(std::string(what) + ": tensors must be L×1×h×w");
    }
    h.L = static_cast<std::uint32_t>(t0.dim(0));
    h.h = static_cast<std::uint32_t>(t0.dim(2));
    h.w = static_cast<std::uint32_t>(t0.dim(3));
    for (const Tensor& t : tensors) {
        if (!t.same_shape(t0)) throw DimensionError(std::string(what) + ": ragged tensor list");
        check_finite(t, what);
    }
    return h;
}

void encode_body(std::vector<std::uint8_t>& out, const std::vector<Tensor>& tensors,
                 WireDtype dtype) {
    for (const Tensor& t : tensors) {
        for (double v : t.data) {
            if (dtype == WireDtype::F32) {
                const float f = static_cast<float>(v);
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                put_u32(out, bits);
            } else {
                std::uint64_t bits;
                std::memcpy(&bits, &v, 8);
                put_u64(out, bits);
            }
        }
    }
}

std::vector<Tensor> decode_body(const std::uint8_t* p, const Header& h, WireDtype dtype) {
    std::vector<Tensor> tensors;
    tensors.reserve(h.b);
    const std::size_t per = static_cast<std::size_t>(h.L) * h.h * h.w;
    const std::size_t vb = wire_value_bytes(dtype);
    for (std::uint32_t s = 0; s < h.b; ++s) {
        Tensor t({h.L, 1, h.h, h.w});
        for (std::size_t i = 0; i < per; ++i) {
            if (dtype == WireDtype::F32) {
                const std::uint32_t bits = get_u32(p);
                float f;
                std::memcpy(&f, &bits, 4);
                t.data[i] = static_cast<double>(f);
            } else {
                const std::uint64_t bits = get_u64(p);
                double v;
                std::memcpy(&v, &bits, 8);
                t.data[i] = v;
            }
            p += vb;
        }
        tensors.push_back(std::move(t));
    }
    return tensors;
}

}  // namespace

std::size_t wire_value_bytes(WireDtype dtype) { return dtype == WireDtype::F32 ? 4 : 8; }

std::vector<std::uint8_t> encode_fp(const FpMessage& msg) {
    const Header h = header_of(msg.maps, "encode_fp");
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kFpMagic, kFpMagic + 4);
    put_u16(out, kWireVersion);
    out.push_back(static_cast<std::uint8_t>(msg.dtype));
    out.push_back(0);
    put_u32(out, h.b);
    put_u32(out, h.L);
    put_u32(out, h.h);
    put_u32(out, h.w);
    encode_body(out, msg.maps, msg.dtype);
    return out;
}

FpMessage decode_fp(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 24) throw DecodeError("FP message truncated before header end");
    if (std::memcmp(bytes.data(), kFpMagic, 4) != 0) throw DecodeError("bad FP magic");
    if (get_u16(bytes.data() + 4) != kWireVersion) throw DecodeError("unsupported wire version");
    if (bytes[6] > 1) throw DecodeError("unknown wire dtype tag");
    FpMessage msg;
    msg.dtype = static_cast<WireDtype>(bytes[6]);
    Header h;
    h.b = get_u32(bytes.data() + 8);
    h.L = get_u32(bytes.data() + 12);
    h.h = get_u32(bytes.data() + 16);
    h.w = get_u32(bytes.data() + 20);
    const std::size_t expected =
        24 + static_cast<std::size_t>(h.b) * h.L * h.h * h.w * wire_value_bytes(msg.dtype);
    if (bytes.size() != expected) {
        throw DecodeError("FP body length mismatch: expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes.size()));
    }
    msg.maps = decode_body(bytes.data() + 24, h, msg.dtype);
    return msg;
}

std::vector<std::uint8_t> encode_bp(const BpMessage& msg) {
    const Header h = header_of(msg.grads, "encode_bp");
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kBpMagic, kBpMagic + 4);
    put_u16(out, kWireVersion);
    out.push_back(static_cast<std::uint8_t>(msg.dtype));
    out.push_back(0);
    put_u32(out, h.b);
    put_u32(out, h.L);
    put_u32(out, h.h);
    put_u32(out, h.w);
    put_u64(out, msg.accounting_bits);
    encode_body(out, msg.grads, msg.dtype);
    return out;
}

BpMessage decode_bp(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 32) throw DecodeError("BP message truncated before header end");
    if (std::memcmp(bytes.data(), kBpMagic, 4) != 0) throw DecodeError("bad BP magic");
    if (get_u16(bytes.data() + 4) != kWireVersion) throw DecodeError("unsupported wire version");
    if (bytes[6] > 1) throw DecodeError("unknown wire dtype tag");
    BpMessage msg;
    msg.dtype = static_cast<WireDtype>(bytes[6]);
    Header h;
    h.b = get_u32(bytes.data() + 8);
    h.L = get_u32(bytes.data() + 12);
    h.h = get_u32(bytes.data() + 16);
    h.w = get_u32(bytes.data() + 20);
    msg.accounting_bits = get_u64(bytes.data() + 24);
    const std::size_t expected =
        32 + static_cast<std::size_t>(h.b) * h.L * h.h * h.w * wire_value_bytes(msg.dtype);
    if (bytes.size() != expected) {
        throw DecodeError("BP body length mismatch: expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes.size()));
    }
    msg.grads = decode_body(bytes.data() + 32, h, msg.dtype);
    return msg;
}

std::uint64_t fp_payload_bits(const ModelConfig& config, std::uint32_t bits_per_pixel,
                              std::size_t batch) {
    return static_cast<std::uint64_t>(batch) * config.L * config.pooled_h() * config.pooled_w() *
           bits_per_pixel;
}

std::uint64_t bp_payload_bits(const ModelConfig& config, std::size_t n_layer2,
                              std::uint32_t bits_per_grad, BpAccounting mode) {
    if (mode == BpAccounting::Paper) {
        return static_cast<std::uint64_t>(n_layer2) * bits_per_grad;
    }
    return static_cast<std::uint64_t>(config.L) * config.pooled_h() * config.pooled_w() *
           bits_per_grad;
}

}  // namespace multsl
