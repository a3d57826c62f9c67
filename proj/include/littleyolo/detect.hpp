#pragma once

// Image -> detections: letterbox, forward, YOLO decode, confidence filter,
// per-class NMS, and the inverse letterbox back to image pixels.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "littleyolo/anchor_set.hpp"
#include "littleyolo/boxmath.hpp"
#include "littleyolo/graph.hpp"
#include "littleyolo/tensor.hpp"

namespace littleyolo {

struct LetterboxTransform {
  double scale = 1.0;
  double pad_x = 0.0;  // network pixels left of the content region
  double pad_y = 0.0;
  int orig_w = 0, orig_h = 0;
  int net_w = 0, net_h = 0;

  // Original-image pixels -> network pixels.
  BBox forward(const BBox& b) const {
    return {b.x1 * scale + pad_x, b.y1 * scale + pad_y, b.x2 * scale + pad_x, b.y2 * scale + pad_y};
  }
  BBox inverse(const BBox& b) const {
    return {(b.x1 - pad_x) / scale, (b.y1 - pad_y) / scale, (b.x2 - pad_x) / scale,
            (b.y2 - pad_y) / scale};
  }
};

enum class Resample { bilinear, nearest };

struct Letterboxed {
  Tensor tensor;
  LetterboxTransform transform;
};

constexpr float kLetterboxFill = 0.5f;

// Aspect-preserving resize into a net_w x net_h canvas filled with 0.5 gray.
// Destination pixel centres map to source coordinates through the single
// scale factor, so the geometry matches LetterboxTransform exactly.
inline Letterboxed letterbox(const Tensor& image, int net_w, int net_h,
                             Resample mode = Resample::bilinear) {
  if (image.empty() || image.width() < 1 || image.height() < 1)
    throw ShapeError("letterbox: zero-dimension image");
  if (image.channels() != 3)
    throw ShapeError("letterbox: expected 3 channels, got " + std::to_string(image.channels()));
  if (net_w < 1 || net_h < 1) throw ShapeError("letterbox: network size must be positive");

  LetterboxTransform t;
  t.orig_w = image.width();
  t.orig_h = image.height();
  t.net_w = net_w;
  t.net_h = net_h;
  t.scale = std::min(static_cast<double>(net_w) / t.orig_w, static_cast<double>(net_h) / t.orig_h);
  const int new_w = std::clamp(static_cast<int>(std::lround(t.orig_w * t.scale)), 1, net_w);
  const int new_h = std::clamp(static_cast<int>(std::lround(t.orig_h * t.scale)), 1, net_h);
  const int off_x = (net_w - new_w) / 2;
  const int off_y = (net_h - new_h) / 2;
  t.pad_x = off_x;
  t.pad_y = off_y;

  Tensor out(3, net_h, net_w, kLetterboxFill);
  const int sw = image.width(), sh = image.height();
  for (int dy = 0; dy < new_h; ++dy) {
    const double sy = (dy + 0.5) / t.scale - 0.5;
    for (int dx = 0; dx < new_w; ++dx) {
      const double sx = (dx + 0.5) / t.scale - 0.5;
      for (int c = 0; c < 3; ++c) {
        float v;
        if (mode == Resample::nearest) {
          const int ix = std::clamp(static_cast<int>(std::floor((dx + 0.5) / t.scale)), 0, sw - 1);
          const int iy = std::clamp(static_cast<int>(std::floor((dy + 0.5) / t.scale)), 0, sh - 1);
          v = image.at(c, iy, ix);
        } else {
          const double cx = std::clamp(sx, 0.0, static_cast<double>(sw - 1));
          const double cy = std::clamp(sy, 0.0, static_cast<double>(sh - 1));
          const int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
          const int x1 = std::min(x0 + 1, sw - 1), y1 = std::min(y0 + 1, sh - 1);
          const double fx = cx - x0, fy = cy - y0;
          const double top = image.at(c, y0, x0) * (1 - fx) + image.at(c, y0, x1) * fx;
          const double bot = image.at(c, y1, x0) * (1 - fx) + image.at(c, y1, x1) * fx;
          v = static_cast<float>(top * (1 - fy) + bot * fy);
        }
        out.at(c, dy + off_y, dx + off_x) = v;
      }
    }
  }
  return {std::move(out), t};
}

// A decoded prediction slot, still in network pixels.
struct RawDetection {
  BBox box;
  float objectness = 0.0f;
  std::vector<float> class_probs;
};

struct Detection {
  BBox box;
  int class_id = 0;
  std::string class_name;
  float objectness = 0.0f;
  float class_prob = 0.0f;
  float confidence = 0.0f;  // objectness * class_prob
};

inline float logistic(float x) { return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x)))); }

// Decodes one head. Channel block a*(5+classes) holds tx, ty, tw, th,
// objectness, then one logit per class, for mask slot a.
inline std::vector<RawDetection> decode_yolo(const Tensor& raw, const AnchorSet& anchors,
                                             std::span<const int> mask, int net_w, int net_h,
                                             int classes) {
  const int per_slot = 5 + classes;
  const int expected = static_cast<int>(mask.size()) * per_slot;
  if (raw.channels() != expected)
    throw ShapeError("decode_yolo: raw tensor has " + std::to_string(raw.channels()) +
                     " channels, expected " + std::to_string(expected) + " = " +
                     std::to_string(mask.size()) + " x (5 + " + std::to_string(classes) + ")");
  for (int m : mask)
    if (m < 0 || m >= static_cast<int>(anchors.anchors.size()))
      throw ShapeError("decode_yolo: mask index " + std::to_string(m) + " outside anchor set");

  const int gh = raw.height(), gw = raw.width();
  std::vector<RawDetection> out;
  out.reserve(static_cast<std::size_t>(gh) * gw * mask.size());
  for (int cy = 0; cy < gh; ++cy) {
    for (int cx = 0; cx < gw; ++cx) {
      for (std::size_t a = 0; a < mask.size(); ++a) {
        const int base = static_cast<int>(a) * per_slot;
        const auto& anchor = anchors.anchors[mask[a]];
        const double bx = (logistic(raw.at(base + 0, cy, cx)) + cx) / static_cast<double>(gw) * net_w;
        const double by = (logistic(raw.at(base + 1, cy, cx)) + cy) / static_cast<double>(gh) * net_h;
        const double bw = anchor.w * std::exp(static_cast<double>(raw.at(base + 2, cy, cx)));
        const double bh = anchor.h * std::exp(static_cast<double>(raw.at(base + 3, cy, cx)));
        RawDetection d;
        d.box = BBox::from_center(bx, by, bw, bh);
        d.objectness = logistic(raw.at(base + 4, cy, cx));
        d.class_probs.resize(classes);
        for (int k = 0; k < classes; ++k) d.class_probs[k] = logistic(raw.at(base + 5 + k, cy, cx));
        out.push_back(std::move(d));
      }
    }
  }
  return out;
}

inline std::string class_name_for(const std::vector<std::string>& names, int id) {
  if (id >= 0 && id < static_cast<int>(names.size())) return names[id];
  return "class" + std::to_string(id);
}

// Keeps slots with objectness * max class probability strictly above the
// threshold, labelled with the arg-max class (lowest index on ties).
inline std::vector<Detection> filter_confidence(std::span<const RawDetection> raw, float threshold,
                                                const std::vector<std::string>& names = {}) {
  std::vector<Detection> out;
  for (const auto& r : raw) {
    if (r.class_probs.empty()) continue;
    auto best = std::max_element(r.class_probs.begin(), r.class_probs.end());
    const float conf = r.objectness * *best;
    if (!(conf > threshold)) continue;
    Detection d;
    d.box = r.box;
    d.class_id = static_cast<int>(best - r.class_probs.begin());
    d.class_name = class_name_for(names, d.class_id);
    d.objectness = r.objectness;
    d.class_prob = *best;
    d.confidence = conf;
    out.push_back(std::move(d));
  }
  return out;
}

// Greedy per-class suppression. Output is sorted by confidence descending,
// ties by original position.
inline std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  std::vector<bool> removed(dets.size(), false);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& keep = dets[order[i]];
    if (removed[order[i]]) continue;
    kept.push_back(keep);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const auto& other = dets[order[j]];
      if (removed[order[j]] || other.class_id != keep.class_id) continue;
      if (iou(keep.box, other.box) > iou_threshold) removed[order[j]] = true;
    }
  }
  return kept;
}

inline std::vector<Detection> unletterbox(std::vector<Detection> dets, const LetterboxTransform& t) {
  const double w = t.orig_w, h = t.orig_h;
  for (auto& d : dets) {
    BBox b = t.inverse(d.box).normalized();
    d.box = {std::clamp(b.x1, 0.0, w), std::clamp(b.y1, 0.0, h), std::clamp(b.x2, 0.0, w),
             std::clamp(b.y2, 0.0, h)};
  }
  return dets;
}

struct DetectOptions {
  float conf_threshold = 0.25f;
  double nms_threshold = 0.45;
  unsigned threads = 1;
  Resample resample = Resample::bilinear;
  std::vector<std::string> class_names;
};

inline std::vector<std::string> default_class_names(int classes) {
  if (classes == 2) return {"car", "bus"};
  if (classes == 3) return {"car", "bus", "truck"};
  std::vector<std::string> names;
  for (int i = 0; i < classes; ++i) names.push_back("class" + std::to_string(i));
  return names;
}

inline std::vector<Detection> detect(const NetworkGraph& graph, const AnchorSet& anchors,
                                     const Tensor& image, const DetectOptions& opt = {}) {
  auto boxed = letterbox(image, graph.input.width, graph.input.height, opt.resample);
  auto heads = forward(graph, boxed.tensor, opt.threads);
  const auto yolo = graph.yolo_layers();
  if (anchors.masks.size() != yolo.size())
    throw ShapeError("detect: anchor set has " + std::to_string(anchors.masks.size()) +
                     " masks for " + std::to_string(yolo.size()) + " yolo layers");
  std::vector<RawDetection> raw;
  for (std::size_t h = 0; h < yolo.size(); ++h) {
    const auto& spec = std::get<YoloSpec>(graph.layers[yolo[h]].spec);
    auto part = decode_yolo(heads.at(yolo[h]), anchors, anchors.masks[h], graph.input.width,
                            graph.input.height, spec.classes);
    raw.insert(raw.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  auto names = opt.class_names;
  if (names.empty() && !yolo.empty())
    names = default_class_names(std::get<YoloSpec>(graph.layers[yolo.front()].spec).classes);
  auto kept = nms(filter_confidence(raw, opt.conf_threshold, names), opt.nms_threshold);
  return unletterbox(std::move(kept), boxed.transform);
}

inline nlohmann::json to_json(const Detection& d) {
  return {{"class_id", d.class_id},
          {"class_name", d.class_name},
          {"confidence", static_cast<double>(d.confidence)},
          {"objectness", static_cast<double>(d.objectness)},
          {"class_prob", static_cast<double>(d.class_prob)},
          {"bbox", {{"x1", d.box.x1}, {"y1", d.box.y1}, {"x2", d.box.x2}, {"y2", d.box.y2}}}};
}

inline nlohmann::json detections_document(const std::string& image, int width, int height,
                                          const std::vector<Detection>& dets) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& d : dets) list.push_back(to_json(d));
  return {{"image", image}, {"width", width}, {"height", height}, {"detections", std::move(list)}};
}

}  // namespace littleyolo
