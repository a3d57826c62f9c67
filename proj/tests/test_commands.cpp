#include <gtest/gtest.h>

#include <sstream>

#include "littleyolo/commands.hpp"
#include "support/fixtures.hpp"

using namespace littleyolo;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

template <typename Args, typename Fn>
Run run(Fn fn, const Args& args) {
  std::ostringstream out, err;
  Run r;
  r.code = fn(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Planted detector cfg, weights and image written to a scratch directory.
struct PlantedFiles {
  fixture::TempDir dir{"cmd"};
  fs::path cfg = dir / "planted.cfg";
  fs::path weights = dir / "planted.weights";
  fs::path image = dir / "planted.ppm";
  PlantedFiles() {
    fixture::write_text(cfg, fixture::kPlantedCfg);
    write_file_bytes(weights, save_weights(fixture::planted_graph()));
    write_ppm(image, fixture::planted_image());
  }
  DetectArgs detect_args() const {
    DetectArgs a;
    a.model.cfg = cfg;
    a.model.weights = weights;
    a.input = image;
    return a;
  }
};

}  // namespace

TEST(CmdDetect, PlantedFixtureJson) {
  PlantedFiles f;
  const auto r = run(cmd_detect, f.detect_args());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["image"], f.image.string());
  EXPECT_EQ(doc["width"], 64);
  EXPECT_EQ(doc["height"], 64);
  ASSERT_EQ(doc["detections"].size(), 1u);
  const auto& d = doc["detections"][0];
  for (const char* key : {"class_id", "class_name", "confidence", "objectness", "class_prob", "bbox"})
    EXPECT_TRUE(d.contains(key)) << key;
  EXPECT_EQ(d["class_name"], "car");
  EXPECT_EQ(d["bbox"]["x1"], 34.0);
  EXPECT_EQ(d["bbox"]["y1"], 14.0);
  EXPECT_EQ(d["bbox"]["x2"], 54.0);
  EXPECT_EQ(d["bbox"]["y2"], 26.0);
  EXPECT_EQ(run(cmd_detect, f.detect_args()).out, r.out);
}

TEST(CmdDetect, DirectoryOutputsAndAnnotation) {
  PlantedFiles f;
  fs::create_directories(f.dir / "imgs");
  write_ppm(f.dir / "imgs" / "b.ppm", fixture::planted_image());
  write_ppm(f.dir / "imgs" / "a.ppm", Tensor(3, 64, 64, 0.0f));
  auto args = f.detect_args();
  args.input = f.dir / "imgs";
  args.output = f.dir / "out";
  args.annotate = true;
  const auto r = run(cmd_detect, args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto index = nlohmann::json::parse(read_text_file(f.dir / "out" / "index.json"));
  ASSERT_EQ(index.size(), 2u);
  EXPECT_EQ(index[0]["detections"], 0);
  EXPECT_EQ(index[1]["detections"], 1);
  EXPECT_TRUE(fs::exists(f.dir / "out" / "a.json"));
  const auto annotated = read_ppm(f.dir / "out" / "b.annotated.ppm");
  EXPECT_EQ(annotated.shape(), (Shape{3, 64, 64}));
  EXPECT_NE(annotated, fixture::planted_image());

  args.output.reset();
  const auto listing = run(cmd_detect, args);
  ASSERT_EQ(listing.code, 1);  // --annotate without --output
  args.annotate = false;
  const auto all = nlohmann::json::parse(run(cmd_detect, args).out);
  EXPECT_TRUE(all.is_array());
  EXPECT_EQ(all.size(), 2u);
}

TEST(CmdDetect, MissingWeightsNamesPath) {
  PlantedFiles f;
  auto args = f.detect_args();
  args.model.weights = f.dir / "nope.weights";
  const auto r = run(cmd_detect, args);
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("nope.weights"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
  args.model.weights.reset();
  EXPECT_NE(run(cmd_detect, args).code, 0);
}

TEST(CmdDetect, MismatchedAndBadInputs) {
  PlantedFiles f;
  auto args = f.detect_args();
  args.model.cfg = fixture::cfg_path("littleyolo-spp-416.cfg");
  auto r = run(cmd_detect, args);
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("does not match"), std::string::npos) << r.err;

  args = f.detect_args();
  fixture::write_text(f.dir / "bad.ppm", "P5\n1 1\n255\n0");
  args.input = f.dir / "bad.ppm";
  EXPECT_NE(run(cmd_detect, args).code, 0);
  args.input = f.dir / "absent.ppm";
  EXPECT_NE(run(cmd_detect, args).err.find("absent.ppm"), std::string::npos);
  args = f.detect_args();
  args.conf = 1.5f;
  EXPECT_NE(run(cmd_detect, args).code, 0);
}

TEST(CmdDetect, RandomWeightsGiveValidJson) {
  fixture::TempDir dir("rand");
  write_file_bytes(dir / "r.weights", save_weights(init_random(fixture::reference_graph(), 42)));
  write_ppm(dir / "n.ppm", fixture::noise_image(416, 416, 1));
  DetectArgs args;
  args.model.cfg = fixture::cfg_path("littleyolo-spp-416.cfg");
  args.model.weights = dir / "r.weights";
  args.model.threads = 4;
  args.input = dir / "n.ppm";
  const auto r = run(cmd_detect, args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  ASSERT_TRUE(doc["detections"].is_array());
  for (const auto& d : doc["detections"]) {
    EXPECT_GT(d["confidence"].get<double>(), 0.25);
    EXPECT_LE(d["bbox"]["x2"].get<double>(), 416.0);
  }
}

TEST(CmdAnchors, SixClusterSetIsDeterministic) {
  fixture::TempDir dir("anch");
  fixture::write_voc_set(dir / "voc", fixture::six_cluster_dims(600, 21));
  AnchorsArgs args;
  args.input = dir / "voc";
  args.output = dir / "report.json";
  const auto a = run(cmd_anchors, args);
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run(cmd_anchors, args);
  EXPECT_EQ(a.out, b.out);
  const auto report = nlohmann::json::parse(read_text_file(dir / "report.json"));
  ASSERT_EQ(report["anchors"].size(), 6u);
  const auto means = fixture::generating_means();
  for (int i = 0; i < 6; ++i) {
    EXPECT_NEAR(report["anchors"][i][0].get<double>(), means[i].w * 416, means[i].w * 416 * 0.02);
    EXPECT_NEAR(report["anchors"][i][1].get<double>(), means[i].h * 416, means[i].h * 416 * 0.02);
  }
  EXPECT_EQ(a.out.substr(0, a.out.find('\n')), report["line"].get<std::string>());
  EXPECT_EQ(report["masks"], nlohmann::json::parse("[[3,4,5],[0,1,2]]"));
}

TEST(CmdAnchors, SingleBoxAndErrors) {
  fixture::TempDir dir("anch1");
  fixture::write_voc_set(dir / "voc", {{0.1, 0.1}, {0.1, 0.1}});
  AnchorsArgs args;
  args.input = dir / "voc";
  args.k = 1;
  const auto r = run(cmd_anchors, args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "41.6,41.6");
  args.k = 2;
  EXPECT_NE(run(cmd_anchors, args).err.find("distinct"), std::string::npos);
  fs::create_directories(dir / "empty");
  args.input = dir / "empty";
  EXPECT_NE(run(cmd_anchors, args).code, 0);
  args.input = dir / "absent";
  EXPECT_NE(run(cmd_anchors, args).code, 0);
}

TEST(CmdEval, ReportAndWarnings) {
  fixture::TempDir dir("eval");
  fixture::write_text(dir / "gt.txt", "a car 0 0 10 10\nb bus 0 0 10 10\n");
  fixture::write_text(dir / "pred.txt", "a car 0.9 0 0 10 10\nb bus 0.8 50 50 60 60\nb bus 0.7 0 0 10 10\n");
  EvalArgs args;
  args.ground_truth = dir / "gt.txt";
  args.predictions = dir / "pred.txt";
  args.output = dir / "map.json";
  const auto r = run(cmd_eval, args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.err.empty()) << r.err;
  const auto j = nlohmann::json::parse(read_text_file(dir / "map.json"));
  EXPECT_EQ(j["map"], 0.75);
  EXPECT_NE(r.out.find("75.00"), std::string::npos) << r.out;

  fixture::write_text(dir / "other.txt", "z car 0.9 0 0 10 10\n");
  args.predictions = dir / "other.txt";
  const auto w = run(cmd_eval, args);
  EXPECT_EQ(w.code, 0);
  EXPECT_NE(w.err.find("warning"), std::string::npos);

  fixture::write_text(dir / "empty.txt", "# nothing\n");
  args.ground_truth = args.predictions = dir / "empty.txt";
  const auto e = run(cmd_eval, args);
  EXPECT_NE(e.code, 0);
  EXPECT_NE(e.err.find("empty"), std::string::npos);
  args.iou = 2.0;
  EXPECT_NE(run(cmd_eval, args).code, 0);
}

TEST(CmdInfo, ReferenceTable) {
  InfoArgs args;
  args.model.cfg = fixture::cfg_path("littleyolo-spp-416.cfg");
  fixture::TempDir dir("info");
  args.output = dir / "info.json";
  const auto r = run(cmd_info, args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("layers: 34 (indices 0-33)"), std::string::npos);
  EXPECT_NE(r.out.find("parameters: 12455962"), std::string::npos);
  EXPECT_NE(r.out.find("49823868 bytes (49.82 MB)"), std::string::npos);
  EXPECT_NE(r.out.find("15.279 BFLOPs"), std::string::npos);
  EXPECT_NE(r.out.find("13 x 13 x 21"), std::string::npos);
  const auto j = nlohmann::json::parse(read_text_file(dir / "info.json"));
  EXPECT_EQ(j["layers"].size(), 34u);
  EXPECT_EQ(j["model_bytes"], 49823868);
}

TEST(CmdInfo, LargeInputVariant) {
  InfoArgs args;
  args.model.cfg = fixture::cfg_path("littleyolo-spp-640.cfg");
  const auto r = run(cmd_info, args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("20 x 20 x 21"), std::string::npos);
  EXPECT_NE(r.out.find("40 x 40 x 21"), std::string::npos);
  args.model.cfg = fixture::cfg_path("littleyolo-spp-416.cfg");
  args.model.size = 640;
  EXPECT_NE(run(cmd_info, args).out.find("20 x 20 x 21"), std::string::npos);
}

TEST(CmdInfo, MalformedConfigIsPositioned) {
  fixture::TempDir dir("bad");
  fixture::write_text(dir / "bad.cfg", "[net]\nwidth=16\nheight=16\n[convolutional]\nfilters=abc\n");
  InfoArgs args;
  args.model.cfg = dir / "bad.cfg";
  const auto r = run(cmd_info, args);
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("line 5"), std::string::npos) << r.err;
  args.model.cfg = dir / "absent.cfg";
  EXPECT_NE(run(cmd_info, args).err.find("absent.cfg"), std::string::npos);
}

TEST(CmdBench, SchemaAndArithmetic) {
  PlantedFiles f;
  BenchArgs args;
  args.model.cfg = f.cfg;
  args.model.weights = f.weights;
  args.input = f.image;
  args.iterations = 1;
  const auto r = run(cmd_bench, args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.size(), 4u);
  EXPECT_EQ(j["iters"], 1);
  EXPECT_EQ(j["mean_ms"], j["median_ms"]);
  EXPECT_DOUBLE_EQ(j["fps"].get<double>(), 1000.0 / j["mean_ms"].get<double>());
  args.iterations = 0;
  EXPECT_NE(run(cmd_bench, args).code, 0);
  args.iterations = 3;
  args.model.weights.reset();
  args.input.reset();
  const auto seeded = run(cmd_bench, args);
  EXPECT_EQ(seeded.code, 0);
  EXPECT_NE(seeded.err.find("random"), std::string::npos);
}

TEST(SummarizeLatencies, Statistics) {
  const auto s = summarize_latencies({4.0, 1.0, 3.0, 2.0});
  EXPECT_EQ(s.iters, 4);
  EXPECT_EQ(s.mean_ms, 2.5);
  EXPECT_EQ(s.median_ms, 2.5);
  EXPECT_EQ(s.fps, 400.0);
  EXPECT_EQ(summarize_latencies({5.0}).fps, 200.0);
  EXPECT_EQ(summarize_latencies({}).iters, 0);
  oracle::Random rng(4);
  std::vector<double> ms;
  for (int i = 0; i < 100; ++i) ms.push_back(rng.uniform(1, 3) + (i % 17 == 0 ? 50 : 0));
  const auto b = summarize_latencies(ms);
  EXPECT_LE(b.median_ms, 2.0 * b.mean_ms);
}
