#pragma once

// Binary weights container: a 20-byte little-endian header
// (int32 major, int32 minor, int32 revision, uint64 images_seen) followed,
// for each convolutional layer in order, by float32 biases, then (with batch
// norm) scales, rolling means and rolling variances, then the filter weights.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "littleyolo/error.hpp"
#include "littleyolo/graph.hpp"
#include "littleyolo/splitmix.hpp"

namespace littleyolo {

using Bytes = std::vector<std::uint8_t>;

namespace detail {

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}

inline std::uint64_t get_u64(const std::uint8_t* p) {
  return std::uint64_t{get_u32(p)} | std::uint64_t{get_u32(p + 4)} << 32;
}

class FloatReader {
 public:
  FloatReader(const std::uint8_t* p) : p_(p) {}
  void read_into(std::vector<float>& dst) {
    for (float& v : dst) {
      v = std::bit_cast<float>(get_u32(p_));
      p_ += 4;
    }
  }

 private:
  const std::uint8_t* p_;
};

inline void put_floats(Bytes& out, const std::vector<float>& v) {
  for (float f : v) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

}  // namespace detail

constexpr std::size_t kWeightsHeaderBytes = 20;

inline NetworkGraph load_weights(NetworkGraph graph, std::span<const std::uint8_t> bytes) {
  const std::uint64_t expected = model_bytes(graph);
  if (bytes.size() < 12)
    throw FormatError("weights: truncated header, expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
  WeightsHeader h;
  h.major = static_cast<std::int32_t>(detail::get_u32(bytes.data()));
  h.minor = static_cast<std::int32_t>(detail::get_u32(bytes.data() + 4));
  h.revision = static_cast<std::int32_t>(detail::get_u32(bytes.data() + 8));
  if (static_cast<std::int64_t>(h.major) * 10 + h.minor < 2)
    throw FormatError("weights: unsupported container version " + std::to_string(h.major) + "." +
                      std::to_string(h.minor) + "." + std::to_string(h.revision) +
                      " (need 0.2 or later)");
  if (bytes.size() != expected)
    throw FormatError(std::string("weights: ") + (bytes.size() < expected ? "truncated" : "trailing bytes") +
                      ", expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(bytes.size()));
  h.images_seen = detail::get_u64(bytes.data() + 12);
  graph.header = h;

  detail::FloatReader reader(bytes.data() + kWeightsHeaderBytes);
  for (auto& layer : graph.layers) {
    if (!layer.conv) continue;
    auto& c = *layer.conv;
    reader.read_into(c.bias);
    if (c.batch_norm) {
      reader.read_into(c.batch_norm->scale);
      reader.read_into(c.batch_norm->rolling_mean);
      reader.read_into(c.batch_norm->rolling_var);
    }
    reader.read_into(c.weights);
  }
  return graph;
}

inline Bytes save_weights(const NetworkGraph& graph) {
  Bytes out;
  out.reserve(model_bytes(graph));
  detail::put_u32(out, static_cast<std::uint32_t>(graph.header.major));
  detail::put_u32(out, static_cast<std::uint32_t>(graph.header.minor));
  detail::put_u32(out, static_cast<std::uint32_t>(graph.header.revision));
  detail::put_u64(out, graph.header.images_seen);
  for (const auto& layer : graph.layers) {
    if (!layer.conv) continue;
    const auto& c = *layer.conv;
    detail::put_floats(out, c.bias);
    if (c.batch_norm) {
      detail::put_floats(out, c.batch_norm->scale);
      detail::put_floats(out, c.batch_norm->rolling_mean);
      detail::put_floats(out, c.batch_norm->rolling_var);
    }
    detail::put_floats(out, c.weights);
  }
  return out;
}

// Maps one SplitMix64 output to [-0.1, 0.1): the top 24 bits, recentred,
// times 0.1 / 2^23. A single exact-integer product keeps the value
// identical on every IEEE-754 platform.
inline float weight_from_bits(std::uint64_t bits) {
  const auto centred = static_cast<std::int64_t>(bits >> 40) - (std::int64_t{1} << 23);
  return static_cast<float>(static_cast<double>(centred) * (0.1 / 8388608.0));
}

// Deterministic fixture weights: biases 0, batch-norm scale 1, mean 0,
// variance 1, filter weights drawn in storage order, layer by layer.
inline NetworkGraph init_random(NetworkGraph graph, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (auto& layer : graph.layers) {
    if (!layer.conv) continue;
    auto& c = *layer.conv;
    std::fill(c.bias.begin(), c.bias.end(), 0.0f);
    if (c.batch_norm) {
      std::fill(c.batch_norm->scale.begin(), c.batch_norm->scale.end(), 1.0f);
      std::fill(c.batch_norm->rolling_mean.begin(), c.batch_norm->rolling_mean.end(), 0.0f);
      std::fill(c.batch_norm->rolling_var.begin(), c.batch_norm->rolling_var.end(), 1.0f);
    }
    for (float& w : c.weights) w = weight_from_bits(rng.next());
  }
  return graph;
}

inline Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace littleyolo
