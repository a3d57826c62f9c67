#pragma once

// Subcommand implementations behind the littleyolo CLI. Each returns a
// process exit code and never throws: diagnostics go to `err`.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "littleyolo/anchors.hpp"
#include "littleyolo/annotations.hpp"
#include "littleyolo/config.hpp"
#include "littleyolo/detect.hpp"
#include "littleyolo/eval.hpp"
#include "littleyolo/graph.hpp"
#include "littleyolo/image.hpp"
#include "littleyolo/weights.hpp"

namespace littleyolo {

namespace fs = std::filesystem;

struct ModelArgs {
  fs::path cfg;
  std::optional<fs::path> weights;
  int size = 0;  // 0: use the [net] section
  unsigned threads = 1;
};

struct DetectArgs {
  ModelArgs model;
  fs::path input;
  std::optional<fs::path> output;
  float conf = 0.25f;
  double nms = 0.45;
  bool annotate = false;
  Resample resample = Resample::bilinear;
  std::vector<std::string> class_names;
};

struct AnchorsArgs {
  fs::path input;
  int k = 6;
  int size = 416;
  std::uint64_t seed = 0;
  ClusterDistance distance = ClusterDistance::one_minus_iou;
  int max_iters = 300;
  int restarts = kDefaultRestarts;
  std::optional<fs::path> output;
};

struct EvalArgs {
  fs::path ground_truth;
  fs::path predictions;
  double iou = 0.5;
  Interpolation interp = Interpolation::all_point;
  std::optional<fs::path> output;
};

struct InfoArgs {
  ModelArgs model;
  std::optional<fs::path> output;
};

struct BenchArgs {
  ModelArgs model;
  std::optional<fs::path> input;
  int iterations = 10;
  std::uint64_t seed = 0;
};

namespace detail {

inline void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_file_bytes(tmp, std::span(reinterpret_cast<const std::uint8_t*>(content.data()), content.size()));
  fs::rename(tmp, path);
}

inline NetworkGraph load_model(const ModelArgs& args, bool require_weights, std::ostream& err,
                               std::uint64_t seed = 0) {
  if (!fs::exists(args.cfg)) throw Error("config not found: '" + args.cfg.string() + "'");
  NetworkSpec spec = parse_network(read_text_file(args.cfg));
  for (const auto& w : spec.warnings) err << "warning: " << args.cfg.string() << ": " << w << '\n';
  Shape input{spec.net.channels, spec.net.height, spec.net.width};
  if (args.size > 0) input.height = input.width = args.size;
  NetworkGraph graph = build_graph(spec.layers, input);
  if (args.weights) {
    if (!fs::exists(*args.weights)) throw Error("weights not found: '" + args.weights->string() + "'");
    try {
      graph = load_weights(std::move(graph), read_file_bytes(*args.weights));
    } catch (const FormatError& e) {
      throw FormatError(args.weights->string() + " does not match " + args.cfg.string() + ": " +
                        e.what());
    }
  } else if (require_weights) {
    throw Error("missing --weights");
  } else {
    graph = init_random(std::move(graph), seed);
  }
  return graph;
}

inline std::vector<fs::path> list_images(const fs::path& input) {
  if (!fs::exists(input)) throw Error("input not found: '" + input.string() + "'");
  if (!fs::is_directory(input)) return {input};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(input))
    if (e.is_regular_file() && (e.path().extension() == ".ppm" || e.path().extension() == ".PPM"))
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no .ppm images in '" + input.string() + "'");
  return files;
}

inline Rgb class_color(int id) {
  static const Rgb palette[] = {{0.9f, 0.1f, 0.1f}, {0.1f, 0.6f, 0.9f}, {0.1f, 0.8f, 0.2f},
                                {0.9f, 0.7f, 0.1f}, {0.7f, 0.2f, 0.9f}};
  return palette[static_cast<std::size_t>(id) % std::size(palette)];
}

inline Tensor annotate(Tensor image, const std::vector<Detection>& dets) {
  for (const auto& d : dets) {
    const Rgb color = class_color(d.class_id);
    draw_box(image, d.box, color);
    std::ostringstream label;
    label << d.class_name << ' ' << std::fixed << std::setprecision(2) << d.confidence;
    const int top = std::max(0, static_cast<int>(d.box.y1) - 12);
    draw_label(image, static_cast<int>(d.box.x1), top, label.str(), color);
  }
  return image;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace detail

inline int cmd_detect(const DetectArgs& args, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (!(args.conf >= 0.0f && args.conf <= 1.0f) || !(args.nms >= 0.0 && args.nms <= 1.0))
      throw Error("thresholds must lie in [0, 1]");
    if (!args.model.weights) throw Error("missing --weights");
    const auto images = detail::list_images(args.input);
    const bool many = fs::is_directory(args.input);
    if (args.annotate && !args.output) throw Error("--annotate needs --output");
    NetworkGraph graph = detail::load_model(args.model, true, err);
    const AnchorSet anchors = anchor_set_from_graph(graph);

    DetectOptions opt;
    opt.conf_threshold = args.conf;
    opt.nms_threshold = args.nms;
    opt.threads = args.model.threads;
    opt.resample = args.resample;
    opt.class_names = args.class_names;

    fs::path out_dir;
    if (args.output) {
      out_dir = many ? *args.output : args.output->parent_path();
      if (!out_dir.empty()) fs::create_directories(out_dir);
    }

    nlohmann::json all = nlohmann::json::array(), index = nlohmann::json::array();
    for (const auto& path : images) {
      Tensor image = read_ppm(path);
      auto dets = detect(graph, anchors, image, opt);
      auto doc = detections_document(path.string(), image.width(), image.height(), dets);
      if (args.output) {
        const fs::path json_path = many ? out_dir / (path.stem().string() + ".json") : *args.output;
        detail::write_atomic(json_path, doc.dump(2) + "\n");
        index.push_back({{"image", path.string()}, {"json", json_path.string()},
                         {"detections", dets.size()}});
        if (args.annotate) {
          const fs::path ppm = out_dir / (path.stem().string() + ".annotated.ppm");
          write_ppm(ppm, detail::annotate(image, dets));
        }
      } else if (many) {
        all.push_back(std::move(doc));
      } else {
        out << doc.dump(2) << '\n';
      }
    }
    if (many && args.output) detail::write_atomic(out_dir / "index.json", index.dump(2) + "\n");
    if (many && !args.output) out << all.dump(2) << '\n';
    return 0;
  });
}

inline int cmd_anchors(const AnchorsArgs& args, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    auto images = load_annotations(args.input);
    auto dims = box_dims(images);
    if (dims.empty()) throw Error("no usable boxes in '" + args.input.string() + "'");
    auto result = cluster_anchors(dims, args.k, args.distance, args.seed, args.max_iters, args.size,
                                  args.size, args.restarts);
    const double quality = mean_iou_report(dims, result.centroids);

    out << anchors_line(result.anchors) << '\n';
    out << "# boxes: " << dims.size() << "  images: " << images.size() << "  k: " << args.k
        << "  distance: "
        << (args.distance == ClusterDistance::one_minus_iou ? "iou" : "euclid")
        << "  seed: " << args.seed
        << "  restarts: " << args.restarts << '\n';
    out << "# iterations: " << result.iterations << (result.converged ? " (converged)" : " (limit)")
        << "  mean IoU: " << std::fixed << std::setprecision(4) << quality << '\n';
    std::vector<std::size_t> members(args.k, 0);
    for (int a : result.assignment) ++members[a];
    for (int i = 0; i < args.k; ++i)
      out << "#   " << i << ": " << format_pixels(result.anchors.anchors[i].w) << " x "
          << format_pixels(result.anchors.anchors[i].h) << "  (" << members[i] << " boxes)\n";

    if (args.output) {
      nlohmann::json anchors = nlohmann::json::array();
      for (const auto& a : result.anchors.anchors) anchors.push_back({a.w, a.h});
      nlohmann::json doc = {{"anchors", anchors},
                            {"masks", result.anchors.masks},
                            {"line", anchors_line(result.anchors)},
                            {"mean_iou", quality},
                            {"iterations", result.iterations},
                            {"converged", result.converged},
                            {"restart", result.restart},
                            {"boxes", dims.size()}};
      detail::write_atomic(*args.output, doc.dump(2) + "\n");
    }
    (void)err;
    return 0;
  });
}

inline int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (!(args.iou >= 0.0 && args.iou <= 1.0)) throw Error("--iou must lie in [0, 1]");
    if (!fs::exists(args.ground_truth))
      throw Error("ground truth not found: '" + args.ground_truth.string() + "'");
    if (!fs::exists(args.predictions))
      throw Error("predictions not found: '" + args.predictions.string() + "'");
    EvalCorpus corpus;
    load_ground_truth(args.ground_truth, corpus);
    load_predictions(args.predictions, corpus);

    std::set<std::string> gt_images, pred_images;
    for (const auto& g : corpus.ground_truth) gt_images.insert(g.image);
    for (const auto& p : corpus.predictions) pred_images.insert(p.image);
    std::size_t unknown = 0;
    for (const auto& id : pred_images)
      if (!gt_images.count(id)) ++unknown;
    if (!pred_images.empty() && unknown == pred_images.size())
      err << "warning: no prediction image id matches the ground truth\n";
    else if (unknown)
      err << "warning: " << unknown << " prediction image id(s) have no ground truth\n";

    auto report = mean_ap(corpus, args.iou, args.interp);
    out << to_text(report);
    if (args.output) detail::write_atomic(*args.output, to_json(report).dump(2) + "\n");
    return 0;
  });
}

inline std::string layer_size_stride(const GraphLayer& layer) {
  return std::visit(
      [](const auto& l) -> std::string {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ConvolutionalSpec>) {
          std::string s = std::to_string(l.size) + " x " + std::to_string(l.size);
          return l.stride > 1 ? s + "/ " + std::to_string(l.stride) : s;
        } else if constexpr (std::is_same_v<T, MaxpoolSpec>) {
          std::string s = std::to_string(l.size) + " x " + std::to_string(l.size);
          return l.stride > 1 ? s + "/ " + std::to_string(l.stride) : s;
        } else if constexpr (std::is_same_v<T, UpsampleSpec>) {
          return std::to_string(l.stride) + "x";
        } else {
          return "";
        }
      },
      layer.spec);
}

inline std::string layer_table_type(const GraphLayer& layer) {
  static const char* names[] = {"Convolution", "Max", "Route", "Shortcut", "Upsample", "YOLO"};
  return names[layer.spec.index()];
}

inline int cmd_info(const InfoArgs& args, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    NetworkGraph graph = detail::load_model(args.model, false, err);
    out << std::left << std::setw(5) << "#" << std::setw(13) << "Type" << std::setw(9) << "Filters"
        << std::setw(13) << "Size/Stride" << std::setw(16) << "Input" << std::setw(16) << "Output"
        << "BFLOPs\n";
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t i = 0; i < graph.size(); ++i) {
      const auto& l = graph.layers[i];
      std::ostringstream src;
      if (std::holds_alternative<RouteSpec>(l.spec) || std::holds_alternative<ShortcutSpec>(l.spec)) {
        for (std::size_t k = 0; k < l.inputs.size(); ++k) src << (k ? "," : "") << l.inputs[k];
      }
      const auto out_dims = std::to_string(l.output.width) + " x " + std::to_string(l.output.height) +
                            " x " + std::to_string(l.output.channels);
      const auto in_dims = std::to_string(l.input_shape.width) + " x " +
                           std::to_string(l.input_shape.height) + " x " +
                           std::to_string(l.input_shape.channels);
      const std::string filters = l.conv ? std::to_string(l.conv->filters) : src.str();
      out << std::left << std::setw(5) << i << std::setw(13) << layer_table_type(l) << std::setw(9)
          << filters << std::setw(13) << layer_size_stride(l) << std::setw(16) << in_dims
          << std::setw(16) << out_dims;
      if (l.conv) out << std::fixed << std::setprecision(3) << conv_flops(l) / 1e9;
      out << '\n';
      layers.push_back({{"index", i},
                        {"type", std::string(layer_type_name(l.spec))},
                        {"inputs", l.inputs},
                        {"output", {l.output.channels, l.output.height, l.output.width}}});
    }
    const auto params = param_count(graph);
    const auto bytes = model_bytes(graph);
    const double bflops = flops(graph);
    out << "layers: " << graph.size() << " (indices 0-" << graph.size() - 1 << ")\n";
    out << "parameters: " << params << '\n';
    out << "model size: " << bytes << " bytes (" << std::fixed << std::setprecision(2)
        << bytes / 1e6 << " MB)\n";
    out << "compute: " << std::setprecision(3) << bflops << " BFLOPs\n";
    if (args.output) {
      nlohmann::json doc = {{"layers", layers},
                            {"param_count", params},
                            {"model_bytes", bytes},
                            {"bflops", bflops},
                            {"input", {graph.input.channels, graph.input.height, graph.input.width}}};
      detail::write_atomic(*args.output, doc.dump(2) + "\n");
    }
    return 0;
  });
}

struct BenchStats {
  int iters = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double fps = 0.0;
};

inline BenchStats summarize_latencies(std::vector<double> ms) {
  BenchStats s;
  s.iters = static_cast<int>(ms.size());
  if (ms.empty()) return s;
  double sum = 0.0;
  for (double v : ms) sum += v;
  s.mean_ms = sum / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  s.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  s.fps = s.mean_ms > 0.0 ? 1000.0 / s.mean_ms : 0.0;
  return s;
}

inline nlohmann::json to_json(const BenchStats& s) {
  return {{"iters", s.iters}, {"mean_ms", s.mean_ms}, {"median_ms", s.median_ms}, {"fps", s.fps}};
}

// Times forward + decode; reports only, never judges the numbers.
inline int cmd_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (args.iterations < 1) throw Error("--iters must be >= 1");
    NetworkGraph graph = detail::load_model(args.model, false, err, args.seed);
    if (!args.model.weights) err << "note: no --weights given, timing seeded random weights\n";
    const AnchorSet anchors = anchor_set_from_graph(graph);
    Tensor image = args.input ? read_ppm(*args.input)
                              : Tensor(3, graph.input.height, graph.input.width, 0.5f);
    DetectOptions opt;
    opt.threads = args.model.threads;
    detect(graph, anchors, image, opt);  // warm-up
    std::vector<double> samples;
    for (int i = 0; i < args.iterations; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      detect(graph, anchors, image, opt);
      const auto t1 = std::chrono::steady_clock::now();
      samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    out << to_json(summarize_latencies(samples)).dump() << '\n';
    return 0;
  });
}

}  // namespace littleyolo
