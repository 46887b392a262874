#pragma once

// Internal helpers for the binary model checkpoint format:
// magic "VRDM", u32 version, u32 kind, kind-specific dims, then layers
// as little-endian 64-bit reals.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "vrd/mlp.hpp"

namespace vrd::ckpt {

constexpr char kMagic[4] = {'V', 'R', 'D', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kKindFusion = 1;
constexpr std::uint32_t kKindAttribute = 2;

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

inline void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
    return v;
}

inline void put_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
}

inline double get_f64(std::istream& in, const std::string& path) {
    double v = 0.0;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
    return v;
}

inline void put_mlp(std::ostream& out, const MlpParams& params) {
    put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& l : params.layers) {
        put_u32(out, static_cast<std::uint32_t>(l.in));
        put_u32(out, static_cast<std::uint32_t>(l.out));
        put_u32(out, static_cast<std::uint32_t>(l.activation));
        for (double w : l.weights) put_f64(out, w);
        for (double b : l.biases) put_f64(out, b);
    }
}

inline MlpParams get_mlp(std::istream& in, const std::string& path) {
    MlpParams params;
    const std::uint32_t n_layers = get_u32(in, path);
    for (std::uint32_t li = 0; li < n_layers; ++li) {
        Layer layer;
        layer.in = get_u32(in, path);
        layer.out = get_u32(in, path);
        layer.activation = static_cast<Activation>(get_u32(in, path));
        if (layer.in == 0 || layer.out == 0) {
            throw std::runtime_error(path + ": zero layer dimension in checkpoint");
        }
        layer.weights.resize(layer.in * layer.out);
        for (auto& w : layer.weights) w = get_f64(in, path);
        layer.biases.resize(layer.out);
        for (auto& b : layer.biases) b = get_f64(in, path);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

inline void put_header(std::ostream& out, std::uint32_t kind) {
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, kind);
}

inline void check_header(std::istream& in, std::uint32_t expected_kind, const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error(path + ": bad checkpoint magic");
    }
    const std::uint32_t version = get_u32(in, path);
    if (version != kVersion) {
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    }
    const std::uint32_t kind = get_u32(in, path);
    if (kind != expected_kind) {
        throw std::runtime_error(path + ": checkpoint kind mismatch");
    }
}

}  // namespace vrd::ckpt
