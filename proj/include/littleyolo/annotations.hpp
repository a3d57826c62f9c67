#pragma once

// Ground-truth annotation readers: VOC-style XML (one file per image) and
// COCO-style JSON (one file per split).

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "littleyolo/anchors.hpp"
#include "littleyolo/boxmath.hpp"
#include "littleyolo/config.hpp"
#include "littleyolo/error.hpp"
#include "littleyolo/weights.hpp"

namespace littleyolo {

struct AnnotatedObject {
  std::string name;
  BBox box;  // image pixels
  bool difficult = false;
};

struct AnnotatedImage {
  std::string id;
  int width = 0;
  int height = 0;
  std::vector<AnnotatedObject> objects;
};

namespace detail {

// Inner text of the first <tag>...</tag> in [from, to); npos-safe.
inline std::optional<std::string_view> xml_element(std::string_view text, std::string_view tag,
                                                    std::size_t from = 0,
                                                    std::size_t* end_out = nullptr) {
  const std::string open = "<" + std::string(tag);
  const std::string close = "</" + std::string(tag) + ">";
  std::size_t pos = from;
  while (true) {
    pos = text.find(open, pos);
    if (pos == std::string_view::npos) return std::nullopt;
    const std::size_t after = pos + open.size();
    if (after < text.size() && (text[after] == '>' || text[after] == ' ' || text[after] == '\t' ||
                                text[after] == '\n' || text[after] == '\r'))
      break;
    pos = after;
  }
  const std::size_t gt = text.find('>', pos);
  if (gt == std::string_view::npos) return std::nullopt;
  const std::size_t end = text.find(close, gt + 1);
  if (end == std::string_view::npos) return std::nullopt;
  if (end_out) *end_out = end + close.size();
  return text.substr(gt + 1, end - gt - 1);
}

inline double xml_number(std::string_view text, std::string_view tag, const std::string& where) {
  auto el = xml_element(text, tag);
  if (!el) throw FormatError(where + ": missing <" + std::string(tag) + ">");
  auto v = to_real(*el);
  if (!v) throw FormatError(where + ": <" + std::string(tag) + "> is not a number");
  return *v;
}

}  // namespace detail

inline AnnotatedImage parse_voc_xml(std::string_view xml, const std::string& id) {
  AnnotatedImage img;
  img.id = id;
  auto size = detail::xml_element(xml, "size");
  if (!size) throw FormatError(id + ": missing <size>");
  img.width = static_cast<int>(detail::xml_number(*size, "width", id));
  img.height = static_cast<int>(detail::xml_number(*size, "height", id));
  std::size_t pos = 0, next = 0;
  while (auto obj = detail::xml_element(xml, "object", pos, &next)) {
    pos = next;
    AnnotatedObject o;
    auto name = detail::xml_element(*obj, "name");
    if (!name) throw FormatError(id + ": object without <name>");
    o.name = std::string(detail::trim(*name));
    if (auto diff = detail::xml_element(*obj, "difficult"))
      o.difficult = detail::to_integer(*diff).value_or(0) != 0;
    auto bnd = detail::xml_element(*obj, "bndbox");
    if (!bnd) throw FormatError(id + ": object without <bndbox>");
    o.box = BBox{detail::xml_number(*bnd, "xmin", id), detail::xml_number(*bnd, "ymin", id),
                 detail::xml_number(*bnd, "xmax", id), detail::xml_number(*bnd, "ymax", id)}
                .normalized();
    img.objects.push_back(std::move(o));
  }
  return img;
}

inline AnnotatedImage load_voc_xml(const std::filesystem::path& path) {
  return parse_voc_xml(read_text_file(path), path.stem().string());
}

// Every *.xml in the directory, sorted by file name.
inline std::vector<AnnotatedImage> load_voc_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".xml") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<AnnotatedImage> out;
  for (const auto& f : files) out.push_back(load_voc_xml(f));
  return out;
}

// Image ids are file-name stems when available, else the numeric id.
inline std::vector<AnnotatedImage> parse_coco_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("coco: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("images") || !doc.contains("annotations"))
    throw FormatError("coco: expected 'images' and 'annotations' arrays");
  try {
    std::map<long long, std::string> categories;
    if (doc.contains("categories"))
      for (const auto& c : doc["categories"])
        categories[c.at("id").get<long long>()] = c.at("name").get<std::string>();

    std::vector<AnnotatedImage> out;
    std::map<long long, std::size_t> by_id;
    for (const auto& im : doc["images"]) {
      AnnotatedImage a;
      const auto id = im.at("id").get<long long>();
      a.id = im.contains("file_name")
                 ? std::filesystem::path(im["file_name"].get<std::string>()).stem().string()
                 : std::to_string(id);
      a.width = im.at("width").get<int>();
      a.height = im.at("height").get<int>();
      by_id[id] = out.size();
      out.push_back(std::move(a));
    }
    for (const auto& an : doc["annotations"]) {
      const auto image_id = an.at("image_id").get<long long>();
      auto it = by_id.find(image_id);
      if (it == by_id.end())
        throw FormatError("coco: annotation refers to unknown image " + std::to_string(image_id));
      const auto& b = an.at("bbox");
      const double x = b.at(0).get<double>(), y = b.at(1).get<double>();
      const double w = b.at(2).get<double>(), h = b.at(3).get<double>();
      AnnotatedObject o;
      const auto cat = an.contains("category_id") ? an["category_id"].get<long long>() : 0;
      o.name = categories.count(cat) ? categories[cat] : std::to_string(cat);
      o.box = BBox{x, y, x + w, y + h}.normalized();
      o.difficult = an.contains("iscrowd") && an["iscrowd"].get<int>() != 0;
      out[it->second].objects.push_back(std::move(o));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("coco: ") + e.what());
  }
}

inline std::vector<AnnotatedImage> load_coco_json(const std::filesystem::path& path) {
  return parse_coco_json(read_text_file(path));
}

// A directory of VOC XML files, a single VOC XML file, or a COCO JSON file.
inline std::vector<AnnotatedImage> load_annotations(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_voc_directory(path);
  if (!std::filesystem::exists(path)) throw Error("annotations not found: '" + path.string() + "'");
  if (path.extension() == ".json") return load_coco_json(path);
  return {load_voc_xml(path)};
}

// Normalized (w, h) of every box with positive area inside a sized image.
inline std::vector<BoxDim> box_dims(const std::vector<AnnotatedImage>& images) {
  std::vector<BoxDim> dims;
  for (const auto& img : images) {
    if (img.width < 1 || img.height < 1) continue;
    for (const auto& o : img.objects) {
      const double w = std::min(o.box.width() / img.width, 1.0);
      const double h = std::min(o.box.height() / img.height, 1.0);
      if (w > 0.0 && h > 0.0) dims.push_back({w, h});
    }
  }
  return dims;
}

}  // namespace littleyolo
