#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace littleyolo {

// Axis-aligned box in corner form.
struct BBox {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  static BBox from_center(double cx, double cy, double w, double h) {
    return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
  }

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return (x1 + x2) / 2; }
  double cy() const { return (y1 + y2) / 2; }

  BBox normalized() const {
    return {std::min(x1, x2), std::min(y1, y2), std::max(x1, x2), std::max(y1, y2)};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct GIoUBreakdown {
  double intersection = 0.0;
  double union_area = 0.0;
  double pred_area = 0.0;
  double gt_area = 0.0;
  double enclosing_area = 0.0;
  double iou = 0.0;
  double giou = 0.0;
  bool degenerate = false;  // zero union or zero enclosing area; iou = giou = 0
};

inline GIoUBreakdown giou(const BBox& p, const BBox& g) {
  GIoUBreakdown r;
  r.pred_area = p.area();
  r.gt_area = g.area();
  const double iw = std::max(0.0, std::min(p.x2, g.x2) - std::max(p.x1, g.x1));
  const double ih = std::max(0.0, std::min(p.y2, g.y2) - std::max(p.y1, g.y1));
  r.intersection = iw * ih;
  r.union_area = r.pred_area + r.gt_area - r.intersection;
  const double cw = std::max(p.x2, g.x2) - std::min(p.x1, g.x1);
  const double ch = std::max(p.y2, g.y2) - std::min(p.y1, g.y1);
  r.enclosing_area = cw * ch;
  if (!(r.union_area > 0.0) || !(r.enclosing_area > 0.0)) {
    r.degenerate = true;
    return r;
  }
  r.iou = r.intersection / r.union_area;
  r.giou = r.iou - (r.enclosing_area - r.union_area) / r.enclosing_area;
  return r;
}

inline double iou(const BBox& a, const BBox& b) { return giou(a, b).iou; }

struct GIoULoss {
  double loss = 1.0;
  std::array<double, 4> grad{};  // d loss / d (x1, y1, x2, y2) of the prediction
  bool degenerate = false;
};

// 1 - GIoU and its analytic gradient with respect to the predicted corners.
// I, U and the enclosing area are piecewise bilinear in the corners; at a
// tie (coincident edges) the ground-truth edge is taken as the active one,
// i.e. the one-sided derivative from the piece where the prediction does
// not define the min/max.
inline GIoULoss giou_loss_with_grad(const BBox& p, const BBox& g) {
  GIoULoss out;
  const auto b = giou(p, g);
  out.loss = 1.0 - b.giou;
  if (b.degenerate) {
    out.degenerate = true;
    return out;
  }

  const double pw = p.x2 - p.x1, ph = p.y2 - p.y1;
  const std::array<double, 4> d_pred_area{-ph, -pw, ph, pw};

  const double iw = std::min(p.x2, g.x2) - std::max(p.x1, g.x1);
  const double ih = std::min(p.y2, g.y2) - std::max(p.y1, g.y1);
  std::array<double, 4> d_inter{};
  if (iw > 0.0 && ih > 0.0) {
    d_inter[0] = p.x1 > g.x1 ? -ih : 0.0;
    d_inter[1] = p.y1 > g.y1 ? -iw : 0.0;
    d_inter[2] = p.x2 < g.x2 ? ih : 0.0;
    d_inter[3] = p.y2 < g.y2 ? iw : 0.0;
  }

  const double cw = std::max(p.x2, g.x2) - std::min(p.x1, g.x1);
  const double ch = std::max(p.y2, g.y2) - std::min(p.y1, g.y1);
  const std::array<double, 4> d_encl{
      p.x1 < g.x1 ? -ch : 0.0,
      p.y1 < g.y1 ? -cw : 0.0,
      p.x2 > g.x2 ? ch : 0.0,
      p.y2 > g.y2 ? cw : 0.0,
  };

  const double I = b.intersection, U = b.union_area, C = b.enclosing_area;
  // loss = 2 - I/U - U/C
  for (int k = 0; k < 4; ++k) {
    const double dU = d_pred_area[k] - d_inter[k];
    const double d_iou = (d_inter[k] * U - I * dU) / (U * U);
    const double d_ratio = (dU * C - U * d_encl[k]) / (C * C);
    out.grad[k] = -d_iou - d_ratio;
  }
  return out;
}

inline double giou_loss(const BBox& pred, const BBox& gt) { return 1.0 - giou(pred, gt).giou; }

inline std::array<double, 4> giou_loss_grad(const BBox& pred, const BBox& gt) {
  return giou_loss_with_grad(pred, gt).grad;
}

inline double mse(std::span<const double> y, std::span<const double> y_pred) {
  if (y.size() != y_pred.size())
    throw std::invalid_argument("mse: length mismatch " + std::to_string(y.size()) + " vs " +
                                std::to_string(y_pred.size()));
  if (y.empty()) throw std::invalid_argument("mse: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - y_pred[i];
    sum += d * d;
  }
  return sum / static_cast<double>(y.size());
}

}  // namespace littleyolo
