#pragma once

// k-means++ clustering of box dimensions into anchor priors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "littleyolo/anchor_set.hpp"
#include "littleyolo/error.hpp"
#include "littleyolo/splitmix.hpp"

namespace littleyolo {

// Box width/height as fractions of the image size.
struct BoxDim {
  double w = 0.0;
  double h = 0.0;
  friend bool operator==(const BoxDim&, const BoxDim&) = default;
  friend auto operator<=>(const BoxDim&, const BoxDim&) = default;
};

enum class ClusterDistance { one_minus_iou, euclidean };

// IoU of two boxes sharing a centre.
inline double cocentred_iou(const BoxDim& a, const BoxDim& b) {
  const double inter = std::min(a.w, b.w) * std::min(a.h, b.h);
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline double dim_distance(const BoxDim& a, const BoxDim& b, ClusterDistance kind) {
  if (kind == ClusterDistance::one_minus_iou) return 1.0 - cocentred_iou(a, b);
  return std::hypot(a.w - b.w, a.h - b.h);
}

// Per-point cost minimised by Lloyd iterations: 1 - IoU for the IoU
// distance, squared distance for euclidean (so the mean update is exact).
inline double dim_cost(const BoxDim& a, const BoxDim& b, ClusterDistance kind) {
  const double d = dim_distance(a, b, kind);
  return kind == ClusterDistance::euclidean ? d * d : d;
}

namespace detail {

inline std::size_t distinct_count(std::span<const BoxDim> dims) {
  std::set<BoxDim> seen(dims.begin(), dims.end());
  return seen.size();
}

inline std::pair<std::size_t, double> nearest(const BoxDim& x, std::span<const BoxDim> centroids,
                                              ClusterDistance kind) {
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double cost = dim_cost(x, centroids[c], kind);
    if (cost < best_cost) {
      best_cost = cost;
      best = c;
    }
  }
  return {best, best_cost};
}

}  // namespace detail

// First centroid uniform over the data, every further one drawn with
// probability proportional to D(x)^2, D being the distance to the nearest
// centroid chosen so far.
inline std::vector<BoxDim> kmeanspp_seed(std::span<const BoxDim> dims, int k, std::uint64_t seed,
                                         ClusterDistance kind = ClusterDistance::one_minus_iou) {
  if (k < 1) throw Error("kmeans++: k must be >= 1");
  if (dims.size() < static_cast<std::size_t>(k))
    throw Error("kmeans++: k = " + std::to_string(k) + " exceeds the " +
                std::to_string(dims.size()) + " data points");
  if (detail::distinct_count(dims) < static_cast<std::size_t>(k))
    throw Error("kmeans++: k = " + std::to_string(k) + " exceeds the number of distinct boxes (" +
                std::to_string(detail::distinct_count(dims)) + ")");

  SplitMix64 rng(seed);
  std::vector<BoxDim> centroids{dims[rng.below(dims.size())]};
  std::vector<double> d2(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const double d = dim_distance(dims[i], centroids[0], kind);
    d2[i] = d * d;
  }
  while (centroids.size() < static_cast<std::size_t>(k)) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      pick = dims.size() - 1;
      for (std::size_t i = 0; i < dims.size(); ++i) {
        cum += d2[i];
        if (cum > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] <= 0.0 && pick > 0) --pick;  // never re-pick a chosen point
    }
    centroids.push_back(dims[pick]);
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const double d = dim_distance(dims[i], centroids.back(), kind);
      d2[i] = std::min(d2[i], d * d);
    }
  }
  return centroids;
}

struct ClusterResult {
  AnchorSet anchors;                // network pixels, area ascending
  std::vector<BoxDim> centroids;    // normalized, same order as anchors
  std::vector<int> assignment;      // per input dim, index into centroids
  std::vector<double> cost_history; // total within-cluster cost after each assignment step
  int iterations = 0;
  bool converged = false;
  int restart = 0;                  // index of the restart that was kept
  int guarded_updates = 0;          // mean updates rejected for raising a cluster's cost
};

// Default masks: for k >= 2 the coarse head (listed first) takes the upper
// half of the area-sorted anchors and the fine head the lower half.
inline std::vector<std::vector<int>> default_masks(int k) {
  if (k < 2) return {{0}};
  std::vector<int> small, large;
  for (int i = 0; i < k / 2; ++i) small.push_back(i);
  for (int i = k / 2; i < k; ++i) large.push_back(i);
  return {large, small};
}

constexpr int kDefaultRestarts = 10;
constexpr double kCostTolerance = 1e-12;  // relative, for the per-step monotonicity check

namespace detail {

struct LloydRun {
  std::vector<BoxDim> centroids;
  std::vector<int> assign;
  std::vector<double> cost_history;
  int iterations = 0;
  bool converged = false;
  int guarded_updates = 0;
};

// Lloyd iterations from one k-means++ seed. A cluster's mean replaces its
// centroid only when it does not raise that cluster's cost, which keeps the
// total non-increasing under the IoU distance too. An empty cluster is
// re-seeded at the point farthest from its current centroid.
inline LloydRun lloyd(std::span<const BoxDim> dims, int k, ClusterDistance kind, std::uint64_t seed,
                      int max_iters) {
  LloydRun run;
  run.centroids = kmeanspp_seed(dims, k, seed, kind);
  run.assign.assign(dims.size(), -1);
  auto& centroids = run.centroids;
  auto& assign = run.assign;

  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double total = 0.0;
    std::vector<double> point_cost(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
      auto [c, cost] = nearest(dims[i], centroids, kind);
      if (assign[i] != static_cast<int>(c)) changed = true;
      assign[i] = static_cast<int>(c);
      point_cost[i] = cost;
      total += cost;
    }
    if (!run.cost_history.empty() && total > run.cost_history.back() * (1 + kCostTolerance))
      throw Error("cluster_anchors: within-cluster cost rose from " +
                  std::to_string(run.cost_history.back()) + " to " + std::to_string(total));
    run.cost_history.push_back(total);
    run.iterations = iter + 1;
    if (!changed) {
      run.converged = true;
      break;
    }

    std::vector<double> sw(k, 0.0), sh(k, 0.0), old_cost(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < dims.size(); ++i) {
      sw[assign[i]] += dims[i].w;
      sh[assign[i]] += dims[i].h;
      old_cost[assign[i]] += point_cost[i];
      ++count[assign[i]];
    }
    std::vector<BoxDim> means(k);
    std::vector<double> new_cost(k, 0.0);
    for (int c = 0; c < k; ++c)
      if (count[c] > 0) means[c] = {sw[c] / count[c], sh[c] / count[c]};
    for (std::size_t i = 0; i < dims.size(); ++i) new_cost[assign[i]] += dim_cost(dims[i], means[assign[i]], kind);
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) {
        if (new_cost[c] <= old_cost[c])
          centroids[c] = means[c];
        else
          ++run.guarded_updates;
        continue;
      }
      auto far = std::max_element(point_cost.begin(), point_cost.end()) - point_cost.begin();
      centroids[c] = dims[far];
      point_cost[far] = 0.0;
    }
  }
  return run;
}

}  // namespace detail

// Best of `restarts` seeded Lloyd runs by final cost (first wins ties).
// Restart seeds are successive outputs of a splitmix64 stream on `seed`.
inline ClusterResult cluster_anchors(std::span<const BoxDim> dims, int k, ClusterDistance kind,
                                     std::uint64_t seed, int max_iters, int net_w = 416,
                                     int net_h = 416, int restarts = kDefaultRestarts) {
  if (max_iters < 1) throw Error("cluster_anchors: max_iters must be >= 1");
  if (restarts < 1) throw Error("cluster_anchors: restarts must be >= 1");
  SplitMix64 seeds(seed);
  detail::LloydRun best;
  int best_index = -1;
  for (int r = 0; r < restarts; ++r) {
    auto run = detail::lloyd(dims, k, kind, seeds.next(), max_iters);
    if (best_index < 0 || run.cost_history.back() < best.cost_history.back()) {
      best = std::move(run);
      best_index = r;
    }
  }

  ClusterResult result;
  result.cost_history = std::move(best.cost_history);
  result.iterations = best.iterations;
  result.converged = best.converged;
  result.restart = best_index;
  result.guarded_updates = best.guarded_updates;
  const auto& centroids = best.centroids;
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return centroids[a].w * centroids[a].h < centroids[b].w * centroids[b].h;
  });
  std::vector<int> rank(k);
  for (int r = 0; r < k; ++r) rank[order[r]] = r;
  for (int r = 0; r < k; ++r) {
    const auto& c = centroids[order[r]];
    result.centroids.push_back(c);
    result.anchors.anchors.push_back({c.w * net_w, c.h * net_h});
  }
  result.anchors.masks = default_masks(k);
  result.assignment.resize(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) result.assignment[i] = rank[best.assign[i]];
  return result;
}

// Mean over the data of the best co-centred IoU against the anchors (both
// in the same units).
inline double mean_iou_report(std::span<const BoxDim> dims, std::span<const BoxDim> anchors) {
  if (dims.empty() || anchors.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& d : dims) {
    double best = 0.0;
    for (const auto& a : anchors) best = std::max(best, cocentred_iou(d, a));
    sum += best;
  }
  return sum / static_cast<double>(dims.size());
}

inline std::string format_pixels(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  std::string out = s.str();
  while (!out.empty() && out.back() == '0') out.pop_back();
  if (!out.empty() && out.back() == '.') out.pop_back();
  return out == "-0" ? "0" : out;
}

// "w,h, w,h, ..." as written in a yolo section's anchors key.
inline std::string anchors_line(const AnchorSet& set) {
  std::string out;
  for (std::size_t i = 0; i < set.anchors.size(); ++i) {
    if (i) out += ", ";
    out += format_pixels(set.anchors[i].w) + "," + format_pixels(set.anchors[i].h);
  }
  return out;
}

}  // namespace littleyolo
