#pragma once

// VOC-style detection evaluation: greedy matching at an IoU threshold,
// precision/recall curves and AP per class, mAP over classes.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "littleyolo/annotations.hpp"
#include "littleyolo/boxmath.hpp"
#include "littleyolo/error.hpp"

namespace littleyolo {

struct GroundTruth {
  std::string image;
  int class_id = 0;
  BBox box;
  bool difficult = false;
};

struct Prediction {
  std::string image;
  int class_id = 0;
  double confidence = 0.0;
  BBox box;
};

struct EvalCorpus {
  std::vector<std::string> class_names;
  std::vector<GroundTruth> ground_truth;
  std::vector<Prediction> predictions;

  int class_index(const std::string& name) {
    auto it = std::find(class_names.begin(), class_names.end(), name);
    if (it != class_names.end()) return static_cast<int>(it - class_names.begin());
    class_names.push_back(name);
    return static_cast<int>(class_names.size() - 1);
  }

  bool empty() const { return ground_truth.empty() && predictions.empty(); }
};

enum class MatchFlag { tp, fp, ignored };

struct MatchResult {
  std::vector<MatchFlag> flags;  // per prediction, input order
  std::vector<std::size_t> rank; // prediction indices, descending confidence
  std::size_t total_gt = 0;      // non-difficult ground truth

  std::vector<MatchFlag> ranked_flags() const {
    std::vector<MatchFlag> out;
    for (auto i : rank) out.push_back(flags[i]);
    return out;
  }
};

// Single-class greedy matching. Predictions are taken in descending
// confidence (ties by input index); each claims its best-IoU unmatched,
// non-difficult ground truth in the same image when that IoU reaches the
// threshold. A prediction that instead overlaps a difficult object at the
// threshold is ignored rather than counted as a false positive.
inline MatchResult match_class(const std::vector<Prediction>& preds,
                               const std::vector<GroundTruth>& gts, double iou_threshold = 0.5) {
  MatchResult r;
  r.flags.assign(preds.size(), MatchFlag::fp);
  r.rank.resize(preds.size());
  std::iota(r.rank.begin(), r.rank.end(), 0);
  std::stable_sort(r.rank.begin(), r.rank.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });

  std::map<std::string, std::vector<std::size_t>> by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    by_image[gts[g].image].push_back(g);
    if (!gts[g].difficult) ++r.total_gt;
  }
  std::vector<bool> matched(gts.size(), false);

  for (std::size_t p : r.rank) {
    auto it = by_image.find(preds[p].image);
    if (it == by_image.end()) continue;
    double best = -1.0;
    std::size_t best_gt = 0;
    bool hits_difficult = false;
    for (std::size_t g : it->second) {
      const double o = iou(preds[p].box, gts[g].box);
      if (gts[g].difficult) {
        if (o >= iou_threshold) hits_difficult = true;
        continue;
      }
      if (!matched[g] && o > best) {
        best = o;
        best_gt = g;
      }
    }
    if (best >= iou_threshold) {
      matched[best_gt] = true;
      r.flags[p] = MatchFlag::tp;
    } else if (hits_difficult) {
      r.flags[p] = MatchFlag::ignored;
    }
  }
  return r;
}

enum class Interpolation { all_point, eleven_point };

// AP from ranked flags. Undefined (nullopt) when there is neither ground
// truth nor a scored prediction; 0 when only false positives exist.
inline std::optional<double> average_precision(const std::vector<MatchFlag>& ranked,
                                               std::size_t total_gt,
                                               Interpolation interp = Interpolation::all_point) {
  std::vector<double> precision, recall;
  std::size_t tp = 0, fp = 0;
  for (auto f : ranked) {
    if (f == MatchFlag::ignored) continue;
    (f == MatchFlag::tp ? tp : fp)++;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(total_gt ? static_cast<double>(tp) / static_cast<double>(total_gt) : 0.0);
  }
  if (total_gt == 0) {
    if (precision.empty()) return std::nullopt;
    return 0.0;
  }
  if (precision.empty()) return 0.0;

  if (interp == Interpolation::eleven_point) {
    double sum = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double level = t / 10.0;
      double best = 0.0;
      for (std::size_t i = 0; i < recall.size(); ++i)
        if (recall[i] >= level) best = std::max(best, precision[i]);
      sum += best;
    }
    return sum / 11.0;
  }

  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i)
    if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  return ap;
}

struct ClassAP {
  std::string name;
  std::optional<double> ap;
  std::size_t num_gt = 0;
  std::size_t num_pred = 0;
};

struct MapReport {
  double iou_threshold = 0.5;
  Interpolation interpolation = Interpolation::all_point;
  std::vector<ClassAP> classes;
  double map = 0.0;  // unweighted mean of the defined per-class APs
};

inline MapReport mean_ap(const EvalCorpus& corpus, double iou_threshold = 0.5,
                         Interpolation interp = Interpolation::all_point) {
  if (corpus.empty()) throw Error("evaluation corpus is empty");
  MapReport report;
  report.iou_threshold = iou_threshold;
  report.interpolation = interp;
  double sum = 0.0;
  int defined = 0;
  for (int c = 0; c < static_cast<int>(corpus.class_names.size()); ++c) {
    std::vector<Prediction> preds;
    std::vector<GroundTruth> gts;
    for (const auto& p : corpus.predictions)
      if (p.class_id == c) preds.push_back(p);
    for (const auto& g : corpus.ground_truth)
      if (g.class_id == c) gts.push_back(g);
    auto m = match_class(preds, gts, iou_threshold);
    ClassAP entry{corpus.class_names[c], average_precision(m.ranked_flags(), m.total_gt, interp),
                  m.total_gt, preds.size()};
    if (entry.ap) {
      sum += *entry.ap;
      ++defined;
    }
    report.classes.push_back(std::move(entry));
  }
  report.map = defined ? sum / defined : 0.0;
  return report;
}

inline nlohmann::json to_json(const MapReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : r.classes)
    classes.push_back({{"name", c.name},
                       {"ap", c.ap ? nlohmann::json(*c.ap) : nlohmann::json(nullptr)},
                       {"num_gt", c.num_gt},
                       {"num_pred", c.num_pred}});
  return {{"iou_threshold", r.iou_threshold},
          {"interpolation", r.interpolation == Interpolation::all_point ? "all" : "11point"},
          {"classes", std::move(classes)},
          {"map", r.map}};
}

inline std::string to_text(const MapReport& r) {
  std::ostringstream out;
  std::size_t width = 5;
  for (const auto& c : r.classes) width = std::max(width, c.name.size());
  out << std::left << std::setw(static_cast<int>(width)) << "class" << "  " << std::right
      << std::setw(8) << "AP" << std::setw(8) << "GT" << std::setw(8) << "preds" << '\n';
  out << std::fixed << std::setprecision(2);
  for (const auto& c : r.classes) {
    out << std::left << std::setw(static_cast<int>(width)) << c.name << "  " << std::right
        << std::setw(8);
    if (c.ap)
      out << *c.ap * 100.0;
    else
      out << "n/a";
    out << std::setw(8) << c.num_gt << std::setw(8) << c.num_pred << '\n';
  }
  out << std::left << std::setw(static_cast<int>(width)) << "mAP" << "  " << std::right
      << std::setw(8) << r.map * 100.0 << "   (IoU " << std::setprecision(2) << r.iou_threshold
      << ", " << (r.interpolation == Interpolation::all_point ? "all-point" : "11-point") << ")\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Corpus readers

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

inline double field_real(const std::string& tok, const std::string& where) {
  auto v = to_real(tok);
  if (!v) throw FormatError(where + ": '" + tok + "' is not a number");
  return *v;
}

}  // namespace detail

// "image_id class x1 y1 x2 y2 [difficult]" per line; '#' starts a comment.
inline void read_ground_truth_text(std::istream& in, EvalCorpus& corpus, const std::string& source) {
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    auto t = detail::split_ws(line);
    if (t.empty() || t[0][0] == '#') continue;
    const std::string where = source + ":" + std::to_string(n);
    if (t.size() != 6 && t.size() != 7)
      throw FormatError(where + ": expected 'image class x1 y1 x2 y2 [difficult]'");
    GroundTruth g;
    g.image = t[0];
    g.class_id = corpus.class_index(t[1]);
    g.box = BBox{detail::field_real(t[2], where), detail::field_real(t[3], where),
                 detail::field_real(t[4], where), detail::field_real(t[5], where)}
                .normalized();
    g.difficult = t.size() == 7 && detail::field_real(t[6], where) != 0.0;
    corpus.ground_truth.push_back(std::move(g));
  }
}

// "image_id class confidence x1 y1 x2 y2" per line.
inline void read_predictions_text(std::istream& in, EvalCorpus& corpus, const std::string& source) {
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    auto t = detail::split_ws(line);
    if (t.empty() || t[0][0] == '#') continue;
    const std::string where = source + ":" + std::to_string(n);
    if (t.size() != 7) throw FormatError(where + ": expected 'image class confidence x1 y1 x2 y2'");
    Prediction p;
    p.image = t[0];
    p.class_id = corpus.class_index(t[1]);
    p.confidence = detail::field_real(t[2], where);
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0))
      throw FormatError(where + ": confidence must lie in [0, 1]");
    p.box = BBox{detail::field_real(t[3], where), detail::field_real(t[4], where),
                 detail::field_real(t[5], where), detail::field_real(t[6], where)}
                .normalized();
    corpus.predictions.push_back(std::move(p));
  }
}

inline void add_ground_truth(const std::vector<AnnotatedImage>& images, EvalCorpus& corpus) {
  for (const auto& img : images)
    for (const auto& o : img.objects)
      corpus.ground_truth.push_back({img.id, corpus.class_index(o.name), o.box, o.difficult});
}

// One detection document, or an array of them. The image id is the stem of
// the document's "image" path.
inline void add_detection_json(const nlohmann::json& doc, EvalCorpus& corpus) {
  if (doc.is_array()) {
    for (const auto& d : doc) add_detection_json(d, corpus);
    return;
  }
  try {
    const std::string image =
        std::filesystem::path(doc.at("image").get<std::string>()).stem().string();
    for (const auto& d : doc.at("detections")) {
      Prediction p;
      p.image = image;
      p.class_id = corpus.class_index(d.at("class_name").get<std::string>());
      p.confidence = d.at("confidence").get<double>();
      const auto& b = d.at("bbox");
      p.box = BBox{b.at("x1").get<double>(), b.at("y1").get<double>(), b.at("x2").get<double>(),
                   b.at("y2").get<double>()}
                  .normalized();
      corpus.predictions.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("detection json: ") + e.what());
  }
}

inline void load_ground_truth(const std::filesystem::path& path, EvalCorpus& corpus) {
  if (std::filesystem::is_directory(path) || path.extension() == ".xml" ||
      path.extension() == ".json") {
    add_ground_truth(load_annotations(path), corpus);
    return;
  }
  std::ifstream in(path);
  if (!in) throw Error("cannot open ground truth '" + path.string() + "'");
  read_ground_truth_text(in, corpus, path.string());
}

// A detection JSON file, a directory of them, or a flat text file.
inline void load_predictions(const std::filesystem::path& path, EvalCorpus& corpus) {
  auto load_json = [&](const std::filesystem::path& p) {
    try {
      add_detection_json(nlohmann::json::parse(read_text_file(p)), corpus);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
  };
  if (std::filesystem::is_directory(path)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".json" &&
          e.path().filename() != "index.json")
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) load_json(f);
    return;
  }
  if (path.extension() == ".json") {
    load_json(path);
    return;
  }
  std::ifstream in(path);
  if (!in) throw Error("cannot open predictions '" + path.string() + "'");
  read_predictions_text(in, corpus, path.string());
}

}  // namespace littleyolo
