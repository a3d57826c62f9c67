#pragma once

#include <vector>

#include "littleyolo/config.hpp"
#include "littleyolo/graph.hpp"

namespace littleyolo {

// Anchor priors in network-input pixels plus the per-head masks, one mask
// per YOLO layer in graph order (coarsest grid first in the reference
// network, which therefore owns the largest anchors).
struct AnchorSet {
  std::vector<AnchorDim> anchors;
  std::vector<std::vector<int>> masks;
  friend bool operator==(const AnchorSet&, const AnchorSet&) = default;
};

// Collects anchors and masks from the YOLO layers of a built graph. All
// heads must share one anchor list, as they do in the dialect.
inline AnchorSet anchor_set_from_graph(const NetworkGraph& g) {
  AnchorSet set;
  bool first = true;
  for (int idx : g.yolo_layers()) {
    const auto& y = std::get<YoloSpec>(g.layers[idx].spec);
    if (first) {
      set.anchors = y.anchors;
      first = false;
    } else if (y.anchors != set.anchors) {
      throw ShapeError("yolo layer " + std::to_string(idx) + " uses a different anchor list");
    }
    set.masks.push_back(y.mask);
  }
  return set;
}

}  // namespace littleyolo
