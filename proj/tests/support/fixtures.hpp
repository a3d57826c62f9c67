#pragma once

// Constructed inputs shared by the unit and acceptance suites.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "littleyolo/littleyolo.hpp"
#include "oracles.hpp"

namespace fixture {

namespace fs = std::filesystem;
using namespace littleyolo;

inline fs::path cfg_path(const std::string& name) { return fs::path(LITTLEYOLO_CFG_DIR) / name; }

inline std::string reference_cfg_text(const std::string& name = "littleyolo-spp-416.cfg") {
  return read_text_file(cfg_path(name));
}

inline NetworkGraph reference_graph(const std::string& name = "littleyolo-spp-416.cfg") {
  return build_graph(parse_network(reference_cfg_text(name)));
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("littleyolo-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// ---------------------------------------------------------------------------
// Planted detector: a 64x64 net whose 8x8 head fires only where an 8x8 cell
// of the input is white. Channel sum -> 8x8 max -> objectness 40*sum - 100,
// class logits (+10, -10), zero box offsets, one 20x12 anchor.

inline const std::string kPlantedCfg = R"([net]
width=64
height=64
channels=3

[convolutional]
filters=1
size=1
stride=1
pad=0
activation=linear

[maxpool]
size=8
stride=8
padding=0

[convolutional]
filters=7
size=1
stride=1
pad=0
activation=linear

[yolo]
mask=0
anchors=20,12
classes=2
num=1
)";

constexpr int kPlantedCellX = 5;
constexpr int kPlantedCellY = 2;

inline NetworkGraph planted_graph() {
  NetworkGraph g = build_graph(parse_network(kPlantedCfg));
  auto& sum = *g.layers[0].conv;
  sum.weights = {1.0f, 1.0f, 1.0f};
  sum.bias = {0.0f};
  auto& head = *g.layers[2].conv;
  head.weights = {0, 0, 0, 0, 40, 0, 0};
  head.bias = {0, 0, 0, 0, -100, 10, -10};
  return g;
}

inline Tensor planted_image() {
  Tensor img(3, 64, 64, 0.0f);
  for (int c = 0; c < 3; ++c)
    for (int y = 8 * kPlantedCellY; y < 8 * kPlantedCellY + 8; ++y)
      for (int x = 8 * kPlantedCellX; x < 8 * kPlantedCellX + 8; ++x) img.at(c, y, x) = 1.0f;
  return img;
}

// Centre ((5 + 0.5) / 8 * 64, (2 + 0.5) / 8 * 64) = (44, 20), size 20 x 12.
inline BBox planted_box() { return {34.0, 14.0, 54.0, 26.0}; }

// Seeded noise image with values on the 8-bit grid so PPM round trips are exact.
inline Tensor noise_image(int w, int h, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor img(3, h, w);
  for (float& v : img.data()) v = static_cast<float>(rng.below(256)) / 255.0f;
  return img;
}

// ---------------------------------------------------------------------------
// Six well-separated box clusters: generating means are the published 416
// anchors normalized, each box is the mean times independent lognormal-ish
// 1 + 0.05 * N(0,1) factors, boxes assigned round-robin.

inline std::vector<BoxDim> generating_means() {
  const double px[6][2] = {{16, 15}, {42, 40}, {95, 73}, {115, 165}, {256, 168}, {329, 314}};
  std::vector<BoxDim> means;
  for (const auto& p : px) means.push_back({p[0] / 416.0, p[1] / 416.0});
  return means;
}

inline std::vector<BoxDim> six_cluster_dims(std::size_t n, std::uint64_t seed, double spread = 0.05) {
  const auto means = generating_means();
  oracle::Random rng(seed);
  std::vector<BoxDim> dims;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = means[i % means.size()];
    dims.push_back({m.w * (1.0 + spread * rng.normal()), m.h * (1.0 + spread * rng.normal())});
  }
  return dims;
}

// One VOC XML file per box, on a 416x416 canvas, centred.
inline void write_voc_set(const fs::path& dir, const std::vector<BoxDim>& dims) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const double w = dims[i].w * 416, h = dims[i].h * 416;
    const double x1 = 208 - w / 2, y1 = 208 - h / 2;
    std::ofstream out(dir / ("img" + std::to_string(100000 + i) + ".xml"));
    out.precision(17);
    out << "<annotation>\n  <size><width>416</width><height>416</height><depth>3</depth></size>\n"
        << "  <object>\n    <name>car</name>\n    <difficult>0</difficult>\n    <bndbox>\n"
        << "      <xmin>" << x1 << "</xmin><ymin>" << y1 << "</ymin><xmax>" << x1 + w
        << "</xmax><ymax>" << y1 + h << "</ymax>\n    </bndbox>\n  </object>\n</annotation>\n";
  }
}

// ---------------------------------------------------------------------------
// Small random single-class corpus: a few images, a handful of GT boxes
// each, predictions jittered from GT plus pure false positives.

struct SmallCorpus {
  std::vector<oracle::Box> gts;
  std::vector<oracle::Box> preds;
};

inline SmallCorpus random_corpus(std::uint64_t seed) {
  oracle::Random rng(seed);
  SmallCorpus c;
  const int images = rng.integer(1, 3);
  for (int im = 0; im < images; ++im) {
    const std::string id = "im" + std::to_string(im);
    const int n = rng.integer(0, 4);
    for (int g = 0; g < n; ++g) {
      oracle::Box gt{id, rng.box(80, 10), 0.0, rng.uniform(0, 1) < 0.15};
      c.gts.push_back(gt);
      const int hits = rng.integer(0, 2);
      for (int h = 0; h < hits; ++h) {
        const double j = rng.uniform(0, 12);
        BBox b{gt.box.x1 + rng.uniform(-j, j), gt.box.y1 + rng.uniform(-j, j),
               gt.box.x2 + rng.uniform(-j, j), gt.box.y2 + rng.uniform(-j, j)};
        c.preds.push_back({id, b.normalized(), std::round(rng.uniform(0, 1) * 20) / 20, false});
      }
    }
    const int fps = rng.integer(0, 2);
    for (int f = 0; f < fps; ++f)
      c.preds.push_back({id, rng.box(80, 5), std::round(rng.uniform(0, 1) * 20) / 20, false});
  }
  return c;
}

inline EvalCorpus to_eval_corpus(const SmallCorpus& c) {
  EvalCorpus corpus;
  corpus.class_names = {"car"};
  for (const auto& g : c.gts) corpus.ground_truth.push_back({g.image, 0, g.box, g.difficult});
  for (const auto& p : c.preds) corpus.predictions.push_back({p.image, 0, p.confidence, p.box});
  return corpus;
}

}  // namespace fixture
