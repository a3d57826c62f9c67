#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "littleyolo/commands.hpp"

using namespace littleyolo;

namespace {

void add_model_flags(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--cfg", m.cfg, "network description (.cfg)")->required();
  cmd->add_option("--size", m.size, "override the network input width/height");
  m.threads = default_threads();
  cmd->add_option("--threads", m.threads, "worker threads for convolution")
      ->capture_default_str()
      ->check(CLI::Range(1u, 1024u));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LittleYOLO-SPP inference engine and detection toolkit"};
  app.require_subcommand(1);

  DetectArgs detect_args;
  std::string detect_weights, detect_output, names, resample = "bilinear";
  auto* detect = app.add_subcommand("detect", "run detection on a PPM image or a directory of them");
  add_model_flags(detect, detect_args.model);
  detect->add_option("--weights", detect_weights, "weights file")->required();
  detect->add_option("--input", detect_args.input, "image or directory")->required();
  detect->add_option("--output", detect_output, "JSON file (single image) or directory");
  detect->add_option("--conf", detect_args.conf, "confidence threshold")->check(CLI::Range(0.0, 1.0));
  detect->add_option("--nms", detect_args.nms, "NMS IoU threshold")->check(CLI::Range(0.0, 1.0));
  detect->add_flag("--annotate", detect_args.annotate, "also write annotated PPM copies");
  detect->add_option("--names", names, "comma-separated class names");
  detect->add_option("--resample", resample, "letterbox resampling")
      ->check(CLI::IsMember({"bilinear", "nearest"}));

  AnchorsArgs anchors_args;
  std::string anchors_output, distance = "iou";
  auto* anchors = app.add_subcommand("anchors", "cluster annotation boxes into anchors (k-means++)");
  anchors->add_option("--input", anchors_args.input, "VOC XML directory/file or COCO JSON")->required();
  anchors->add_option("--k", anchors_args.k, "number of anchors")->check(CLI::PositiveNumber);
  anchors->add_option("--size", anchors_args.size, "network input size")->check(CLI::PositiveNumber);
  anchors->add_option("--seed", anchors_args.seed, "random seed");
  anchors->add_option("--distance", distance, "clustering distance")
      ->check(CLI::IsMember({"iou", "euclid"}));
  anchors->add_option("--max-iters", anchors_args.max_iters, "Lloyd iteration limit")
      ->check(CLI::PositiveNumber);
  anchors->add_option("--restarts", anchors_args.restarts, "seeded runs, lowest cost kept")
      ->check(CLI::PositiveNumber);
  anchors->add_option("--output", anchors_output, "JSON report path");

  EvalArgs eval_args;
  std::string eval_output, interp = "all";
  auto* eval = app.add_subcommand("eval", "per-class AP and mAP");
  eval->add_option("--gt", eval_args.ground_truth, "VOC XML directory or flat text")->required();
  eval->add_option("--input", eval_args.predictions, "detection JSON (file/dir) or flat text")
      ->required();
  eval->add_option("--iou", eval_args.iou, "IoU threshold")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--interp", interp, "AP interpolation")->check(CLI::IsMember({"all", "11point"}));
  eval->add_option("--output", eval_output, "JSON report path");

  InfoArgs info_args;
  std::string info_weights, info_output;
  auto* info = app.add_subcommand("info", "layer table, parameter count, model size, BFLOPs");
  add_model_flags(info, info_args.model);
  info->add_option("--weights", info_weights, "weights file to validate against the config");
  info->add_option("--output", info_output, "JSON report path");

  BenchArgs bench_args;
  std::string bench_weights, bench_input;
  auto* bench = app.add_subcommand("bench", "time forward + decode");
  add_model_flags(bench, bench_args.model);
  bench->add_option("--weights", bench_weights, "weights file (seeded random if absent)");
  bench->add_option("--input", bench_input, "PPM image (gray canvas if absent)");
  bench->add_option("--iters", bench_args.iterations, "timed iterations")->check(CLI::PositiveNumber);
  bench->add_option("--seed", bench_args.seed, "seed for random weights");

  CLI11_PARSE(app, argc, argv);

  auto opt_path = [](const std::string& s) -> std::optional<fs::path> {
    if (s.empty()) return std::nullopt;
    return fs::path(s);
  };

  if (*detect) {
    detect_args.model.weights = opt_path(detect_weights);
    detect_args.output = opt_path(detect_output);
    detect_args.resample = resample == "nearest" ? Resample::nearest : Resample::bilinear;
    for (auto item : detail::split_list(names))
      if (!item.empty()) detect_args.class_names.emplace_back(item);
    return cmd_detect(detect_args, std::cout, std::cerr);
  }
  if (*anchors) {
    anchors_args.output = opt_path(anchors_output);
    anchors_args.distance =
        distance == "euclid" ? ClusterDistance::euclidean : ClusterDistance::one_minus_iou;
    return cmd_anchors(anchors_args, std::cout, std::cerr);
  }
  if (*eval) {
    eval_args.output = opt_path(eval_output);
    eval_args.interp = interp == "11point" ? Interpolation::eleven_point : Interpolation::all_point;
    return cmd_eval(eval_args, std::cout, std::cerr);
  }
  if (*info) {
    info_args.model.weights = opt_path(info_weights);
    info_args.output = opt_path(info_output);
    return cmd_info(info_args, std::cout, std::cerr);
  }
  bench_args.model.weights = opt_path(bench_weights);
  bench_args.input = opt_path(bench_input);
  return cmd_bench(bench_args, std::cout, std::cerr);
}
