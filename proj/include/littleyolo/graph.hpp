#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "littleyolo/config.hpp"
#include "littleyolo/error.hpp"
#include "littleyolo/tensor.hpp"

namespace littleyolo {

// Container header of the .weights format.
struct WeightsHeader {
  std::int32_t major = 0;
  std::int32_t minor = 2;
  std::int32_t revision = 0;
  std::uint64_t images_seen = 0;
  friend bool operator==(const WeightsHeader&, const WeightsHeader&) = default;
};

struct GraphLayer {
  LayerSpec spec;
  std::vector<int> inputs;  // absolute layer indices; -1 is the network input
  Shape input_shape;        // shape of the primary (first) input
  Shape output;
  std::optional<ConvParams> conv;  // convolutional layers only
  Activation activation = Activation::linear;

  bool is_conv() const { return std::holds_alternative<ConvolutionalSpec>(spec); }
  bool is_yolo() const { return std::holds_alternative<YoloSpec>(spec); }
};

// Executable, shape-inferred network. Layers only reference earlier layers.
struct NetworkGraph {
  Shape input;
  std::vector<GraphLayer> layers;
  WeightsHeader header;

  std::size_t size() const { return layers.size(); }

  std::vector<int> yolo_layers() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].is_yolo()) out.push_back(static_cast<int>(i));
    return out;
  }

  std::vector<int> conv_layers() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].is_conv()) out.push_back(static_cast<int>(i));
    return out;
  }
};

namespace detail {

[[noreturn]] inline void layer_error(std::size_t index, std::string_view type, const std::string& what) {
  throw ShapeError("layer " + std::to_string(index) + " (" + std::string(type) + "): " + what);
}

}  // namespace detail

// Resolves inputs and infers every layer's output shape. Convolution storage
// is allocated zeroed (batch-norm scale 1, mean 0, variance 1).
inline NetworkGraph build_graph(const std::vector<LayerSpec>& specs, Shape input) {
  if (input.channels < 1 || input.height < 1 || input.width < 1)
    throw ShapeError("network input must be positive, got " + to_string(input));
  NetworkGraph g;
  g.input = input;
  g.layers.reserve(specs.size());

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const int index = static_cast<int>(i);
    GraphLayer layer;
    layer.spec = specs[i];
    const Shape prev = i == 0 ? input : g.layers[i - 1].output;
    const auto type = layer_type_name(layer.spec);
    auto shape_of = [&](int src) -> Shape {
      if (src < 0 || src >= index)
        detail::layer_error(i, type, "reference to layer " + std::to_string(src) +
                                         " is not an earlier layer");
      return g.layers[src].output;
    };

    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, ConvolutionalSpec>) {
            layer.inputs = {index - 1};
            ConvParams p;
            p.filters = l.filters;
            p.in_channels = prev.channels;
            p.size = l.size;
            p.stride = l.stride;
            p.pad = l.padding();
            const int oh = conv_out_dim(prev.height, p.size, p.stride, p.pad);
            const int ow = conv_out_dim(prev.width, p.size, p.stride, p.pad);
            if (oh < 1 || ow < 1)
              detail::layer_error(i, type, "kernel " + std::to_string(l.size) +
                                               " does not fit input " + to_string(prev));
            p.allocate(l.batch_normalize);
            layer.conv = std::move(p);
            layer.activation = l.activation;
            layer.output = {l.filters, oh, ow};
          } else if constexpr (std::is_same_v<T, MaxpoolSpec>) {
            layer.inputs = {index - 1};
            const int oh = conv_out_dim(prev.height, l.size, l.stride, l.padding);
            const int ow = conv_out_dim(prev.width, l.size, l.stride, l.padding);
            if (prev.height + 2 * l.padding < l.size || prev.width + 2 * l.padding < l.size ||
                oh < 1 || ow < 1)
              detail::layer_error(i, type, "window " + std::to_string(l.size) +
                                               " larger than padded input " + to_string(prev));
            layer.output = {prev.channels, oh, ow};
          } else if constexpr (std::is_same_v<T, RouteSpec>) {
            if (l.layers.empty()) detail::layer_error(i, type, "no source layers");
            layer.inputs = l.layers;
            Shape first = shape_of(l.layers.front());
            int channels = 0;
            for (int src : l.layers) {
              Shape s = shape_of(src);
              if (s.height != first.height || s.width != first.width)
                detail::layer_error(i, type, "cannot concatenate " + to_string(first) + " and " +
                                                 to_string(s) + " (layer " + std::to_string(src) +
                                                 ")");
              channels += s.channels;
            }
            layer.output = {channels, first.height, first.width};
          } else if constexpr (std::is_same_v<T, ShortcutSpec>) {
            if (index == 0) detail::layer_error(i, type, "needs a preceding layer");
            layer.inputs = {index - 1, l.from};
            Shape from = shape_of(l.from);
            if (from.height != prev.height || from.width != prev.width)
              detail::layer_error(i, type, "spatial mismatch " + to_string(prev) + " vs " +
                                               to_string(from) + " (layer " +
                                               std::to_string(l.from) + ")");
            layer.activation = l.activation;
            layer.output = prev;
          } else if constexpr (std::is_same_v<T, UpsampleSpec>) {
            layer.inputs = {index - 1};
            if (l.stride < 1) detail::layer_error(i, type, "stride must be >= 1");
            layer.output = {prev.channels, prev.height * l.stride, prev.width * l.stride};
          } else if constexpr (std::is_same_v<T, YoloSpec>) {
            layer.inputs = {index - 1};
            const int expected = static_cast<int>(l.mask.size()) * l.channels_per_slot();
            if (prev.channels != expected)
              detail::layer_error(i, type, "input has " + std::to_string(prev.channels) +
                                               " channels, expected " + std::to_string(expected) +
                                               " = " + std::to_string(l.mask.size()) + " x (5 + " +
                                               std::to_string(l.classes) + ")");
            for (int m : l.mask)
              if (m < 0 || m >= static_cast<int>(l.anchors.size()))
                detail::layer_error(i, type, "mask index outside anchors");
            layer.output = prev;
          }
        },
        layer.spec);
    layer.input_shape = layer.inputs.front() < 0 ? input : g.layers[layer.inputs.front()].output;
    g.layers.push_back(std::move(layer));
  }
  return g;
}

inline NetworkGraph build_graph(const NetworkSpec& spec) {
  return build_graph(spec.layers, Shape{spec.net.channels, spec.net.height, spec.net.width});
}

// Raw YOLO-layer outputs keyed by layer index.
using HeadOutputs = std::map<int, Tensor>;

inline HeadOutputs forward(const NetworkGraph& g, const Tensor& input, unsigned threads = 1) {
  if (input.shape() != g.input)
    throw ShapeError("forward: input " + to_string(input.shape()) + " does not match network input " +
                     to_string(g.input));

  // Release each activation after its last consumer.
  std::vector<std::size_t> last_use(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    last_use[i] = g.layers[i].is_yolo() ? g.size() : i;
    for (int src : g.layers[i].inputs)
      if (src >= 0) last_use[src] = std::max(last_use[src], i);
  }

  std::vector<Tensor> outputs(g.size());
  HeadOutputs heads;
  auto input_of = [&](int src) -> const Tensor& { return src < 0 ? input : outputs[src]; };

  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& layer = g.layers[i];
    Tensor out = std::visit(
        [&](const auto& l) -> Tensor {
          using T = std::decay_t<decltype(l)>;
          const Tensor& prev = input_of(layer.inputs.front());
          if constexpr (std::is_same_v<T, ConvolutionalSpec>) {
            Tensor y = conv2d(prev, *layer.conv, threads);
            activate_inplace(y, layer.activation);
            return y;
          } else if constexpr (std::is_same_v<T, MaxpoolSpec>) {
            return maxpool(prev, l.size, l.stride, l.padding);
          } else if constexpr (std::is_same_v<T, RouteSpec>) {
            std::vector<const Tensor*> parts;
            for (int src : l.layers) parts.push_back(&outputs[src]);
            return concat_channels(std::span<const Tensor* const>(parts));
          } else if constexpr (std::is_same_v<T, ShortcutSpec>) {
            Tensor y = shortcut_add(prev, outputs[l.from]);
            activate_inplace(y, layer.activation);
            return y;
          } else if constexpr (std::is_same_v<T, UpsampleSpec>) {
            return upsample_nearest(prev, l.stride);
          } else {
            return prev;
          }
        },
        layer.spec);
    if (out.shape() != layer.output)
      throw ShapeError("layer " + std::to_string(i) + " produced " + to_string(out.shape()) +
                       ", expected " + to_string(layer.output));
    if (layer.is_yolo()) heads.emplace(static_cast<int>(i), out);
    outputs[i] = std::move(out);
    for (int src : layer.inputs)
      if (src >= 0 && last_use[src] == i) outputs[src] = Tensor();
  }
  return heads;
}

// Stored reals: weights, biases and batch-norm triples.
inline std::uint64_t param_count(const NetworkGraph& g) {
  std::uint64_t total = 0;
  for (const auto& layer : g.layers) {
    if (!layer.conv) continue;
    const auto& c = *layer.conv;
    total += c.weight_count() + static_cast<std::uint64_t>(c.filters);
    if (c.batch_norm) total += 3ull * c.filters;
  }
  return total;
}

inline std::uint64_t model_bytes(const NetworkGraph& g) { return 20 + 4 * param_count(g); }

inline double conv_flops(const GraphLayer& layer) {
  if (!layer.conv) return 0.0;
  const auto& c = *layer.conv;
  return 2.0 * c.size * c.size * c.in_channels * c.filters * layer.output.height *
         layer.output.width;
}

// Billions of floating-point operations per forward pass, convolutions only.
inline double flops(const NetworkGraph& g) {
  double total = 0.0;
  for (const auto& layer : g.layers) total += conv_flops(layer);
  return total / 1e9;
}

}  // namespace littleyolo
