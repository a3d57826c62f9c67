#pragma once

// Darknet-style network description: INI-like sections, one per layer,
// preceded by a [net] section holding the input geometry.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "littleyolo/error.hpp"
#include "littleyolo/tensor.hpp"

namespace littleyolo {

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

struct ConfigSection {
  std::string name;  // canonical section name
  std::size_t line = 0;
  std::vector<ConfigEntry> entries;

  const ConfigEntry* find(std::string_view key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
};

struct ConfigDocument {
  std::vector<ConfigSection> sections;
};

// ---------------------------------------------------------------------------
// Layer descriptions

struct NetParams {
  int width = 416;
  int height = 416;
  int channels = 3;
  friend bool operator==(const NetParams&, const NetParams&) = default;
};

struct ConvolutionalSpec {
  int filters = 1;
  int size = 1;
  int stride = 1;
  bool pad = false;  // true: pad = size / 2
  bool batch_normalize = false;
  Activation activation = Activation::linear;

  int padding() const { return pad ? size / 2 : 0; }
  friend bool operator==(const ConvolutionalSpec&, const ConvolutionalSpec&) = default;
};

struct MaxpoolSpec {
  int size = 2;
  int stride = 1;
  int padding = 0;  // per side
  friend bool operator==(const MaxpoolSpec&, const MaxpoolSpec&) = default;
};

struct RouteSpec {
  std::vector<int> layers;  // absolute indices after lowering
  friend bool operator==(const RouteSpec&, const RouteSpec&) = default;
};

struct ShortcutSpec {
  int from = 0;  // absolute index after lowering
  Activation activation = Activation::linear;
  friend bool operator==(const ShortcutSpec&, const ShortcutSpec&) = default;
};

struct UpsampleSpec {
  int stride = 2;
  friend bool operator==(const UpsampleSpec&, const UpsampleSpec&) = default;
};

struct AnchorDim {
  double w = 0.0;
  double h = 0.0;
  friend bool operator==(const AnchorDim&, const AnchorDim&) = default;
};

struct YoloSpec {
  std::vector<int> mask;
  std::vector<AnchorDim> anchors;
  int classes = 1;
  double ignore_thresh = 0.5;

  int channels_per_slot() const { return 5 + classes; }
  friend bool operator==(const YoloSpec&, const YoloSpec&) = default;
};

using LayerSpec =
    std::variant<ConvolutionalSpec, MaxpoolSpec, RouteSpec, ShortcutSpec, UpsampleSpec, YoloSpec>;

struct NetworkSpec {
  NetParams net;
  std::vector<LayerSpec> layers;
  std::vector<std::string> warnings;  // not part of equality

  friend bool operator==(const NetworkSpec& a, const NetworkSpec& b) {
    return a.net == b.net && a.layers == b.layers;
  }
};

inline std::string_view layer_type_name(const LayerSpec& spec) {
  static constexpr std::string_view names[] = {"convolutional", "maxpool",  "route",
                                               "shortcut",      "upsample", "yolo"};
  return names[spec.index()];
}

inline std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::leaky: return "leaky";
    case Activation::mish: return "mish";
  }
  return "linear";
}

inline std::optional<Activation> parse_activation(std::string_view s) {
  if (s == "linear") return Activation::linear;
  if (s == "leaky") return Activation::leaky;
  if (s == "mish") return Activation::mish;
  return std::nullopt;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::optional<std::string> canonical_section(std::string_view name) {
  if (name == "net" || name == "network") return "net";
  if (name == "convolutional" || name == "conv") return "convolutional";
  if (name == "maxpool" || name == "max") return "maxpool";
  if (name == "route") return "route";
  if (name == "shortcut") return "shortcut";
  if (name == "upsample") return "upsample";
  if (name == "yolo") return "yolo";
  return std::nullopt;
}

enum class ValueKind { integer, real, int_list, real_list, text };

// Value grammar of every key the lowering understands. Keys absent here are
// kept verbatim and reported as warnings during lowering.
inline std::optional<ValueKind> known_key(std::string_view section, std::string_view key) {
  using K = ValueKind;
  static const std::map<std::pair<std::string_view, std::string_view>, K> table = {
      {{"net", "width"}, K::integer},
      {{"net", "height"}, K::integer},
      {{"net", "channels"}, K::integer},
      {{"convolutional", "filters"}, K::integer},
      {{"convolutional", "size"}, K::integer},
      {{"convolutional", "stride"}, K::integer},
      {{"convolutional", "pad"}, K::integer},
      {{"convolutional", "batch_normalize"}, K::integer},
      {{"convolutional", "activation"}, K::text},
      {{"maxpool", "size"}, K::integer},
      {{"maxpool", "stride"}, K::integer},
      {{"maxpool", "padding"}, K::integer},
      {{"route", "layers"}, K::int_list},
      {{"shortcut", "from"}, K::integer},
      {{"shortcut", "activation"}, K::text},
      {{"upsample", "stride"}, K::integer},
      {{"yolo", "mask"}, K::int_list},
      {{"yolo", "anchors"}, K::real_list},
      {{"yolo", "classes"}, K::integer},
      {{"yolo", "num"}, K::integer},
      {{"yolo", "ignore_thresh"}, K::real},
  };
  auto it = table.find({section, key});
  if (it == table.end()) return std::nullopt;
  return it->second;
}

inline std::optional<long long> to_integer(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<double> to_real(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.size() > 1 && out.back().empty()) out.pop_back();  // trailing comma
  return out;
}

inline bool valid_value(std::string_view value, ValueKind kind) {
  switch (kind) {
    case ValueKind::integer: return to_integer(value).has_value();
    case ValueKind::real: return to_real(value).has_value();
    case ValueKind::int_list:
      for (auto item : split_list(value))
        if (!to_integer(item)) return false;
      return true;
    case ValueKind::real_list:
      for (auto item : split_list(value))
        if (!to_real(item)) return false;
      return true;
    case ValueKind::text: return !value.empty();
  }
  return false;
}

}  // namespace detail

inline ConfigDocument parse_config(std::string_view text) {
  ConfigDocument doc;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      auto name = detail::trim(line.substr(1, line.size() - 2));
      auto canonical = detail::canonical_section(name);
      if (!canonical) throw ParseError(line_no, "unknown section [" + std::string(name) + "]");
      if (*canonical == "net" && std::any_of(doc.sections.begin(), doc.sections.end(),
                                             [](const auto& sec) { return sec.name == "net"; }))
        throw ParseError(line_no, "duplicate [net] section");
      doc.sections.push_back({*canonical, line_no, {}});
      continue;
    }

    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(line_no, "malformed line, expected key=value: '" + std::string(line) + "'");
    if (doc.sections.empty()) throw ParseError(line_no, "key=value before any section");
    auto key = detail::trim(line.substr(0, eq));
    auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");
    auto& section = doc.sections.back();
    if (section.find(key))
      throw ParseError(line_no, "duplicate key '" + std::string(key) + "' in [" + section.name + "]");
    if (auto kind = detail::known_key(section.name, key); kind && !detail::valid_value(value, *kind))
      throw ParseError(line_no, "invalid value '" + std::string(value) + "' for key '" +
                                    std::string(key) + "'");
    section.entries.push_back({std::string(key), std::string(value), line_no});
  }
  if (doc.sections.empty()) throw ParseError(0, "no network-parameters section");
  return doc;
}

namespace detail {

class SectionReader {
 public:
  SectionReader(const ConfigSection& s, std::vector<std::string>& warnings)
      : section_(s), warnings_(warnings) {}

  int integer(std::string_view key, int fallback) {
    const auto* e = take(key);
    if (!e) return fallback;
    auto v = to_integer(e->value);
    if (!v || *v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max())
      throw ParseError(e->line, "integer out of range for '" + e->key + "'");
    return static_cast<int>(*v);
  }

  int positive(std::string_view key, int fallback) {
    int v = integer(key, fallback);
    if (v < 1) throw ParseError(line_of(key), std::string(key) + " must be >= 1");
    return v;
  }

  double real(std::string_view key, double fallback) {
    const auto* e = take(key);
    if (!e) return fallback;
    auto v = to_real(e->value);
    if (!v) throw ParseError(e->line, "invalid real for '" + e->key + "'");
    return *v;
  }

  std::optional<std::vector<int>> int_list(std::string_view key) {
    const auto* e = take(key);
    if (!e) return std::nullopt;
    std::vector<int> out;
    for (auto item : split_list(e->value)) {
      auto parsed = to_integer(item);
      if (!parsed) throw ParseError(e->line, "invalid integer list for '" + e->key + "'");
      auto v = *parsed;
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw ParseError(e->line, "integer out of range in '" + e->key + "'");
      out.push_back(static_cast<int>(v));
    }
    return out;
  }

  std::optional<std::vector<double>> real_list(std::string_view key) {
    const auto* e = take(key);
    if (!e) return std::nullopt;
    std::vector<double> out;
    for (auto item : split_list(e->value)) {
      auto v = to_real(item);
      if (!v) throw ParseError(e->line, "invalid real list for '" + e->key + "'");
      out.push_back(*v);
    }
    return out;
  }

  Activation activation(std::string_view key) {
    const auto* e = take(key);
    if (!e) return Activation::linear;
    auto a = parse_activation(e->value);
    if (!a) throw ParseError(e->line, "unsupported activation '" + e->value + "'");
    return *a;
  }

  std::size_t line_of(std::string_view key) const {
    const auto* e = section_.find(key);
    return e ? e->line : section_.line;
  }
  std::size_t line() const { return section_.line; }

  void finish() {
    for (const auto& e : section_.entries)
      if (!used_.count(e.key))
        warnings_.push_back("line " + std::to_string(e.line) + ": ignoring key '" + e.key +
                            "' in [" + section_.name + "]");
  }

 private:
  const ConfigEntry* take(std::string_view key) {
    const auto* e = section_.find(key);
    if (e) used_.insert(e->key);
    return e;
  }

  const ConfigSection& section_;
  std::vector<std::string>& warnings_;
  std::set<std::string> used_;
};

inline int resolve_index(int value, int current, std::size_t line, std::string_view what) {
  int abs = value < 0 ? current + value : value;
  if (abs < 0) throw ParseError(line, std::string(what) + " refers before the first layer");
  if (abs >= current)
    throw ParseError(line, std::string(what) + " " + std::to_string(value) +
                               " is a forward reference from layer " + std::to_string(current));
  return abs;
}

}  // namespace detail

// Converts sections to typed layers: applies defaults and rewrites every
// route/shortcut reference to an absolute layer index.
inline NetworkSpec lower_to_specs(const ConfigDocument& doc) {
  if (doc.sections.empty()) throw ParseError(0, "no network-parameters section");
  if (doc.sections.front().name != "net")
    throw ParseError(doc.sections.front().line,
                     "first section must be [net], found [" + doc.sections.front().name + "]");
  NetworkSpec spec;
  {
    detail::SectionReader r(doc.sections.front(), spec.warnings);
    spec.net.width = r.positive("width", 416);
    spec.net.height = r.positive("height", 416);
    spec.net.channels = r.positive("channels", 3);
    r.finish();
  }

  for (std::size_t s = 1; s < doc.sections.size(); ++s) {
    const auto& section = doc.sections[s];
    const int index = static_cast<int>(s - 1);
    detail::SectionReader r(section, spec.warnings);
    if (section.name == "convolutional") {
      ConvolutionalSpec c;
      c.filters = r.positive("filters", 1);
      c.size = r.positive("size", 1);
      c.stride = r.positive("stride", 1);
      c.pad = r.integer("pad", 0) != 0;
      c.batch_normalize = r.integer("batch_normalize", 0) != 0;
      c.activation = r.activation("activation");
      spec.layers.emplace_back(c);
    } else if (section.name == "maxpool") {
      MaxpoolSpec m;
      m.stride = r.positive("stride", 1);
      m.size = r.positive("size", m.stride);
      m.padding = r.integer("padding", (m.size - 1) / 2);
      if (m.padding < 0) throw ParseError(r.line_of("padding"), "padding must be >= 0");
      spec.layers.emplace_back(m);
    } else if (section.name == "route") {
      auto layers = r.int_list("layers");
      if (!layers || layers->empty()) throw ParseError(r.line(), "route without layers");
      RouteSpec route;
      for (int v : *layers)
        route.layers.push_back(detail::resolve_index(v, index, r.line_of("layers"), "route"));
      spec.layers.emplace_back(route);
    } else if (section.name == "shortcut") {
      if (!section.find("from")) throw ParseError(r.line(), "shortcut without 'from'");
      ShortcutSpec sc;
      sc.from = detail::resolve_index(r.integer("from", -1), index, r.line_of("from"), "shortcut");
      sc.activation = r.activation("activation");
      spec.layers.emplace_back(sc);
    } else if (section.name == "upsample") {
      spec.layers.emplace_back(UpsampleSpec{r.positive("stride", 2)});
    } else if (section.name == "yolo") {
      YoloSpec y;
      auto anchors = r.real_list("anchors");
      if (!anchors || anchors->empty()) throw ParseError(r.line(), "yolo section without anchors");
      if (anchors->size() % 2 != 0)
        throw ParseError(r.line_of("anchors"), "anchors must come in (w,h) pairs");
      for (std::size_t i = 0; i < anchors->size(); i += 2) {
        if (!((*anchors)[i] > 0.0) || !((*anchors)[i + 1] > 0.0))
          throw ParseError(r.line_of("anchors"), "anchor dimensions must be positive");
        y.anchors.push_back({(*anchors)[i], (*anchors)[i + 1]});
      }
      const int count = static_cast<int>(y.anchors.size());
      if (auto mask = r.int_list("mask")) {
        y.mask = *mask;
      } else {
        for (int i = 0; i < count; ++i) y.mask.push_back(i);
      }
      for (int m : y.mask)
        if (m < 0 || m >= count)
          throw ParseError(r.line_of("mask"), "mask index " + std::to_string(m) +
                                                  " outside the " + std::to_string(count) +
                                                  " anchors");
      y.classes = r.positive("classes", 1);
      int num = r.integer("num", count);
      if (num != count)
        spec.warnings.push_back("line " + std::to_string(r.line_of("num")) + ": num=" +
                                std::to_string(num) + " but " + std::to_string(count) +
                                " anchors given; using the anchors");
      y.ignore_thresh = r.real("ignore_thresh", 0.5);
      spec.layers.emplace_back(y);
    }
    r.finish();
  }
  return spec;
}

inline NetworkSpec parse_network(std::string_view text) { return lower_to_specs(parse_config(text)); }

namespace detail {

inline std::string format_real(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace detail

// Prints one layer section. Route and shortcut references are written
// relative to `index`, the dialect's customary form.
inline std::string print_layer(const LayerSpec& layer, int index) {
  std::ostringstream out;
  out << '[' << layer_type_name(layer) << "]\n";
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ConvolutionalSpec>) {
          if (l.batch_normalize) out << "batch_normalize=1\n";
          out << "filters=" << l.filters << "\nsize=" << l.size << "\nstride=" << l.stride
              << "\npad=" << (l.pad ? 1 : 0) << "\nactivation=" << activation_name(l.activation)
              << '\n';
        } else if constexpr (std::is_same_v<T, MaxpoolSpec>) {
          out << "size=" << l.size << "\nstride=" << l.stride;
          if (l.padding != (l.size - 1) / 2) out << "\npadding=" << l.padding;
          out << '\n';
        } else if constexpr (std::is_same_v<T, RouteSpec>) {
          out << "layers=";
          for (std::size_t i = 0; i < l.layers.size(); ++i)
            out << (i ? "," : "") << (l.layers[i] - index);
          out << '\n';
        } else if constexpr (std::is_same_v<T, ShortcutSpec>) {
          out << "from=" << (l.from - index) << "\nactivation=" << activation_name(l.activation)
              << '\n';
        } else if constexpr (std::is_same_v<T, UpsampleSpec>) {
          out << "stride=" << l.stride << '\n';
        } else if constexpr (std::is_same_v<T, YoloSpec>) {
          out << "mask=";
          for (std::size_t i = 0; i < l.mask.size(); ++i) out << (i ? "," : "") << l.mask[i];
          out << "\nanchors=";
          for (std::size_t i = 0; i < l.anchors.size(); ++i)
            out << (i ? ", " : "") << detail::format_real(l.anchors[i].w) << ','
                << detail::format_real(l.anchors[i].h);
          out << "\nclasses=" << l.classes << "\nnum=" << l.anchors.size()
              << "\nignore_thresh=" << detail::format_real(l.ignore_thresh) << '\n';
        }
      },
      layer);
  return out.str();
}

inline std::string print_config(const NetworkSpec& spec) {
  std::ostringstream out;
  out << "[net]\nwidth=" << spec.net.width << "\nheight=" << spec.net.height
      << "\nchannels=" << spec.net.channels << '\n';
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
    out << '\n' << print_layer(spec.layers[i], static_cast<int>(i));
  return out.str();
}

}  // namespace littleyolo
