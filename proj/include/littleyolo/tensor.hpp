#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "littleyolo/error.hpp"
#include "littleyolo/parallel.hpp"

namespace littleyolo {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

// Dense C x H x W feature map, channel-major (index = c*H*W + y*W + x).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f) : shape_(shape) {
    if (shape.channels <= 0 || shape.height <= 0 || shape.width <= 0)
      throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
    data_.assign(shape.size(), fill);
  }
  Tensor(int c, int h, int w, float fill = 0.0f) : Tensor(Shape{c, h, w}, fill) {}
  Tensor(Shape shape, std::vector<float> data) : Tensor(shape) {
    if (data.size() != shape.size())
      throw ShapeError("tensor " + to_string(shape) + " needs " + std::to_string(shape.size()) +
                       " values, got " + std::to_string(data.size()));
    data_ = std::move(data);
  }

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }
  float at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }

  std::span<float> channel(int c) {
    std::size_t plane = static_cast<std::size_t>(shape_.height) * shape_.width;
    return {data_.data() + c * plane, plane};
  }
  std::span<const float> channel(int c) const {
    std::size_t plane = static_cast<std::size_t>(shape_.height) * shape_.width;
    return {data_.data() + c * plane, plane};
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& storage() { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

struct BatchNorm {
  std::vector<float> scale;         // gamma
  std::vector<float> rolling_mean;  // mu
  std::vector<float> rolling_var;   // sigma^2
  float epsilon = 1e-6f;

  friend bool operator==(const BatchNorm&, const BatchNorm&) = default;
};

struct ConvParams {
  int filters = 1;
  int in_channels = 1;
  int size = 1;
  int stride = 1;
  int pad = 0;
  std::vector<float> weights;  // [filters][in_channels][size][size]
  std::vector<float> bias;     // [filters]
  std::optional<BatchNorm> batch_norm;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(filters) * in_channels * size * size;
  }

  // Allocates zeroed storage of the right sizes.
  void allocate(bool with_batch_norm) {
    weights.assign(weight_count(), 0.0f);
    bias.assign(filters, 0.0f);
    if (with_batch_norm)
      batch_norm = BatchNorm{std::vector<float>(filters, 1.0f), std::vector<float>(filters, 0.0f),
                             std::vector<float>(filters, 1.0f), 1e-6f};
    else
      batch_norm.reset();
  }

  void validate() const {
    if (filters < 1 || in_channels < 1 || size < 1 || stride < 1 || pad < 0)
      throw ShapeError("convolution needs filters, channels, size, stride >= 1 and pad >= 0");
    if (weights.size() != weight_count())
      throw ShapeError("convolution expects " + std::to_string(weight_count()) + " weights, got " +
                       std::to_string(weights.size()));
    if (bias.size() != static_cast<std::size_t>(filters))
      throw ShapeError("convolution expects " + std::to_string(filters) + " biases, got " +
                       std::to_string(bias.size()));
    if (batch_norm) {
      const auto n = static_cast<std::size_t>(filters);
      if (batch_norm->scale.size() != n || batch_norm->rolling_mean.size() != n ||
          batch_norm->rolling_var.size() != n)
        throw ShapeError("batch-norm vectors must each hold " + std::to_string(n) + " values");
      for (float v : batch_norm->rolling_var)
        if (!(v + batch_norm->epsilon > 0.0f))
          throw ShapeError("batch-norm variance + epsilon must be positive");
    }
  }

  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

inline int conv_out_dim(int in, int size, int stride, int pad) {
  return (in + 2 * pad - size) / stride + 1;
}

namespace detail {

// Lowers the receptive fields of `input` into a [c_in*k*k][out_h*out_w]
// matrix; out-of-bounds taps are zero.
inline std::vector<float> im2col(const Tensor& input, int size, int stride, int pad, int out_h,
                                 int out_w) {
  const int c_in = input.channels(), h = input.height(), w = input.width();
  const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
  std::vector<float> col(static_cast<std::size_t>(c_in) * size * size * cols, 0.0f);
  for (int c = 0; c < c_in; ++c) {
    for (int ky = 0; ky < size; ++ky) {
      for (int kx = 0; kx < size; ++kx) {
        float* row = col.data() + ((static_cast<std::size_t>(c) * size + ky) * size + kx) * cols;
        for (int oy = 0; oy < out_h; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const float* src = input.channel(c).data() + static_cast<std::size_t>(iy) * w;
          float* dst = row + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ox] = src[ix];
          }
        }
      }
    }
  }
  return col;
}

// out[n][p] = sum_k a[n][k] * b[k][p], k ascending with a single float
// accumulator per element. Rows of `a` are split across threads in blocks of
// kRows, so the arithmetic for any element never depends on thread count.
inline void gemm(const float* a, const float* b, float* out, std::size_t n_rows, std::size_t depth,
                 std::size_t cols, unsigned threads) {
  constexpr std::size_t kRows = 4;
  constexpr std::size_t kCols = 8;
  constexpr std::size_t kDepth = 256;
  using Lanes = float __attribute__((vector_size(kCols * sizeof(float))));
  parallel_for(n_rows, threads, kRows, [&](std::size_t r_begin, std::size_t r_end) {
    std::vector<float> panel(kDepth * kCols);
    const std::size_t r_full = r_begin + (r_end - r_begin) / kRows * kRows;
    std::size_t p = 0;
    for (; p + kCols <= cols; p += kCols) {
      for (std::size_t k0 = 0; k0 < depth; k0 += kDepth) {
        const std::size_t kn = std::min(kDepth, depth - k0);
        for (std::size_t k = 0; k < kn; ++k)
          std::copy(b + (k0 + k) * cols + p, b + (k0 + k) * cols + p + kCols, &panel[k * kCols]);
        for (std::size_t r = r_begin; r < r_full; r += kRows) {
          Lanes acc[kRows];
          for (std::size_t i = 0; i < kRows; ++i) {
            if (k0 == 0)
              acc[i] = Lanes{};
            else
              std::memcpy(&acc[i], out + (r + i) * cols + p, sizeof(Lanes));
          }
          const float* a0 = a + r * depth + k0;
          for (std::size_t k = 0; k < kn; ++k) {
            Lanes bk;
            std::memcpy(&bk, &panel[k * kCols], sizeof(Lanes));
            for (std::size_t i = 0; i < kRows; ++i) acc[i] += a0[i * depth + k] * bk;
          }
          for (std::size_t i = 0; i < kRows; ++i)
            std::memcpy(out + (r + i) * cols + p, &acc[i], sizeof(Lanes));
        }
      }
    }
    for (std::size_t r = r_begin; r < r_full; ++r)
      for (std::size_t q = p; q < cols; ++q) {
        float acc = 0.0f;
        for (std::size_t k = 0; k < depth; ++k) acc += a[r * depth + k] * b[k * cols + q];
        out[r * cols + q] = acc;
      }
    for (std::size_t r = r_full; r < r_end; ++r) {
      float* orow = out + r * cols;
      std::fill(orow, orow + cols, 0.0f);
      for (std::size_t k = 0; k < depth; ++k) {
        const float av = a[r * depth + k];
        const float* bk = b + k * cols;
        for (std::size_t q = 0; q < cols; ++q) orow[q] += av * bk[q];
      }
    }
  });
}

}  // namespace detail

// 2-D convolution with zero padding. With batch norm present the result is
// gamma * (conv - mean) / sqrt(var + eps) + bias, otherwise conv + bias.
// No activation is applied.
inline Tensor conv2d(const Tensor& input, const ConvParams& params, unsigned threads = 1) {
  params.validate();
  if (input.channels() != params.in_channels)
    throw ShapeError("conv2d: input has " + std::to_string(input.channels()) +
                     " channels but weights expect " + std::to_string(params.in_channels));
  if (params.pad > params.size)
    throw ShapeError("conv2d: pad " + std::to_string(params.pad) + " exceeds kernel size " +
                     std::to_string(params.size));
  const int out_h = conv_out_dim(input.height(), params.size, params.stride, params.pad);
  const int out_w = conv_out_dim(input.width(), params.size, params.stride, params.pad);
  if (out_h < 1 || out_w < 1)
    throw ShapeError("conv2d: kernel " + std::to_string(params.size) + " does not fit input " +
                     to_string(input.shape()));

  Tensor out(params.filters, out_h, out_w);
  const std::size_t cols = static_cast<std::size_t>(out_h) * out_w;
  const std::size_t depth = static_cast<std::size_t>(params.in_channels) * params.size * params.size;
  if (params.size == 1 && params.stride == 1 && params.pad == 0) {
    detail::gemm(params.weights.data(), input.data().data(), out.data().data(), params.filters,
                 depth, cols, threads);
  } else {
    auto col = detail::im2col(input, params.size, params.stride, params.pad, out_h, out_w);
    detail::gemm(params.weights.data(), col.data(), out.data().data(), params.filters, depth, cols,
                 threads);
  }

  for (int f = 0; f < params.filters; ++f) {
    auto plane = out.channel(f);
    if (params.batch_norm) {
      const auto& bn = *params.batch_norm;
      const float mean = bn.rolling_mean[f];
      const float inv = bn.scale[f] / std::sqrt(bn.rolling_var[f] + bn.epsilon);
      const float b = params.bias[f];
      for (float& v : plane) v = (v - mean) * inv + b;
    } else {
      const float b = params.bias[f];
      for (float& v : plane) v += b;
    }
  }
  return out;
}

// Max pooling; padded positions never win.
inline Tensor maxpool(const Tensor& input, int size, int stride, int pad) {
  if (size < 1 || stride < 1 || pad < 0)
    throw ShapeError("maxpool: size and stride must be >= 1 and pad >= 0");
  const int out_h = conv_out_dim(input.height(), size, stride, pad);
  const int out_w = conv_out_dim(input.width(), size, stride, pad);
  if (input.height() + 2 * pad < size || input.width() + 2 * pad < size || out_h < 1 || out_w < 1)
    throw ShapeError("maxpool: window " + std::to_string(size) + " larger than padded input " +
                     to_string(input.shape()) + " (pad " + std::to_string(pad) + ")");
  Tensor out(input.channels(), out_h, out_w);
  for (int c = 0; c < input.channels(); ++c) {
    for (int oy = 0; oy < out_h; ++oy) {
      const int y0 = std::max(oy * stride - pad, 0);
      const int y1 = std::min(oy * stride - pad + size, input.height());
      for (int ox = 0; ox < out_w; ++ox) {
        const int x0 = std::max(ox * stride - pad, 0);
        const int x1 = std::min(ox * stride - pad + size, input.width());
        float best = -std::numeric_limits<float>::infinity();
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) best = std::max(best, input.at(c, y, x));
        out.at(c, oy, ox) = best;
      }
    }
  }
  return out;
}

inline Tensor upsample_nearest(const Tensor& input, int factor) {
  if (factor < 1) throw ShapeError("upsample: factor must be >= 1");
  Tensor out(input.channels(), input.height() * factor, input.width() * factor);
  for (int c = 0; c < out.channels(); ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) out.at(c, y, x) = input.at(c, y / factor, x / factor);
  return out;
}

inline Tensor concat_channels(std::span<const Tensor* const> inputs) {
  if (inputs.empty()) throw ShapeError("concat: no inputs");
  const int h = inputs.front()->height(), w = inputs.front()->width();
  int channels = 0;
  for (const Tensor* t : inputs) {
    if (t->height() != h || t->width() != w) {
      std::ostringstream msg;
      msg << "concat: spatial mismatch among inputs";
      for (const Tensor* u : inputs) msg << ' ' << to_string(u->shape());
      throw ShapeError(msg.str());
    }
    channels += t->channels();
  }
  Tensor out(channels, h, w);
  auto dst = out.data().begin();
  for (const Tensor* t : inputs) dst = std::copy(t->data().begin(), t->data().end(), dst);
  return out;
}

inline Tensor concat_channels(const std::vector<Tensor>& inputs) {
  std::vector<const Tensor*> ptrs;
  for (const auto& t : inputs) ptrs.push_back(&t);
  return concat_channels(std::span<const Tensor* const>(ptrs));
}

// Residual add. The first min(C_cur, C_from) channels are summed; any extra
// channels of `current` pass through.
inline Tensor shortcut_add(const Tensor& current, const Tensor& from) {
  if (current.height() != from.height() || current.width() != from.width())
    throw ShapeError("shortcut: spatial mismatch " + to_string(current.shape()) + " vs " +
                     to_string(from.shape()));
  Tensor out = current;
  const int shared = std::min(current.channels(), from.channels());
  for (int c = 0; c < shared; ++c) {
    auto dst = out.channel(c);
    auto src = from.channel(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return out;
}

enum class Activation { linear, leaky, mish };

inline double softplus(double x) { return x > 20.0 ? x : std::log1p(std::exp(x)); }

inline float activate_value(float x, Activation kind) {
  switch (kind) {
    case Activation::linear:
      return x;
    case Activation::leaky:
      return x > 0.0f ? x : 0.1f * x;
    case Activation::mish: {
      const double xd = x;
      return static_cast<float>(xd * std::tanh(softplus(xd)));
    }
  }
  return x;
}

inline void activate_inplace(Tensor& t, Activation kind) {
  if (kind == Activation::linear) return;
  for (float& v : t.data()) v = activate_value(v, kind);
}

inline Tensor activate(Tensor input, Activation kind) {
  activate_inplace(input, kind);
  return input;
}

}  // namespace littleyolo
