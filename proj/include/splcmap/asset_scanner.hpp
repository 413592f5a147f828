#ifndef SPLCMAP_ASSET_SCANNER_HPP
#define SPLCMAP_ASSET_SCANNER_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "splcmap/condition.hpp"
#include "splcmap/error.hpp"
#include "splcmap/feature_model.hpp"
#include "splcmap/text.hpp"

namespace splcmap {

enum class AssetKind { code, documentation, requirement };

inline const char* to_string(AssetKind k) {
  switch (k) {
    case AssetKind::code: return "code";
    case AssetKind::documentation: return "documentation";
    case AssetKind::requirement: return "requirement";
  }
  return "?";
}

inline std::optional<AssetKind> asset_kind_from_string(std::string_view s) {
  if (s == "code") return AssetKind::code;
  if (s == "documentation") return AssetKind::documentation;
  if (s == "requirement") return AssetKind::requirement;
  return std::nullopt;
}

struct Asset {
  std::string path;  // corpus-relative, '/'-separated
  AssetKind kind = AssetKind::code;
  std::size_t size = 0;  // lines

  friend bool operator==(const Asset&, const Asset&) = default;
};

/// 1-based inclusive line range.
struct LineSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t lines() const { return end - start + 1; }

  friend bool operator==(const LineSpan&, const LineSpan&) = default;
  friend auto operator<=>(const LineSpan&, const LineSpan&) = default;
};

struct VariationPoint {
  std::string asset;
  LineSpan span;
  Condition condition;  // effective: conjunction of all enclosing branches
  std::set<std::string> positive_features;
  std::set<std::string> mentioned_features;

  friend bool operator==(const VariationPoint&, const VariationPoint&) = default;
};

struct Segment {
  std::string path;
  LineSpan span;
  std::string text;  // span lines; annotation marker lines are blanked

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct TraceTable {
  std::vector<Asset> assets;
  std::vector<VariationPoint> variation_points;
  std::map<std::string, std::vector<Segment>> feature_segments;
  std::map<std::string, std::set<std::string>> doc_bindings;
  /// Raw text of every scanned asset, keyed by path.
  std::map<std::string, std::string> contents;
  std::size_t asset_count = 0;       // A
  std::size_t asset_kind_count = 0;  // AT

  const Asset* find_asset(std::string_view path) const {
    auto it = std::lower_bound(
        assets.begin(), assets.end(), path,
        [](const Asset& a, std::string_view p) { return a.path < p; });
    return it != assets.end() && it->path == path ? &*it : nullptr;
  }

  friend bool operator==(const TraceTable&, const TraceTable&) = default;
};

struct ScanConfig {
  std::map<std::string, AssetKind> extensions;  // ".js" -> code
  std::vector<std::string> requirement_dirs;
  bool ifdef_dialect = true;
  bool pvscl_dialect = true;
  std::uintmax_t max_file_bytes = 1u << 20;

  static ScanConfig defaults() {
    ScanConfig c;
    for (const char* e : {".c", ".h", ".cc", ".cpp", ".hpp", ".js", ".ts",
                          ".java", ".py", ".css", ".html"})
      c.extensions[e] = AssetKind::code;
    for (const char* e : {".md", ".rst"})
      c.extensions[e] = AssetKind::documentation;
    c.extensions[".txt"] = AssetKind::requirement;
    c.requirement_dirs = {"requirements"};
    return c;
  }
};

namespace detail {

inline std::string normalize_extension(std::string ext) {
  ext = to_lower(ext);
  if (!ext.empty() && ext.front() != '.') ext.insert(ext.begin(), '.');
  return ext;
}

inline std::string normalize_dir(std::string dir) {
  std::replace(dir.begin(), dir.end(), '\\', '/');
  while (!dir.empty() && dir.back() == '/') dir.pop_back();
  while (dir.starts_with("./")) dir.erase(0, 2);
  return dir;
}

}  // namespace detail

/// Reads `{"extensions": {...}, "requirement_dirs": [...], "dialects": [...],
/// "max_file_bytes": N}`. Missing keys keep their defaults.
inline ScanConfig parse_scan_config(std::string_view text) {
  ScanConfig cfg = ScanConfig::defaults();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("scan config: ") + e.what());
  }
  if (!j.is_object()) throw Error("scan config: expected an object");
  try {
    if (j.contains("extensions")) {
      cfg.extensions.clear();
      for (const auto& [ext, kind] : j.at("extensions").items()) {
        auto k = asset_kind_from_string(kind.get<std::string>());
        if (!k) throw Error("scan config: unknown asset kind for '" + ext + "'");
        cfg.extensions[detail::normalize_extension(ext)] = *k;
      }
    }
    if (j.contains("requirement_dirs")) {
      cfg.requirement_dirs.clear();
      for (const auto& d : j.at("requirement_dirs"))
        cfg.requirement_dirs.push_back(
            detail::normalize_dir(d.get<std::string>()));
    }
    if (j.contains("dialects")) {
      cfg.ifdef_dialect = cfg.pvscl_dialect = false;
      for (const auto& d : j.at("dialects")) {
        const auto name = d.get<std::string>();
        if (name == "ifdef") {
          cfg.ifdef_dialect = true;
        } else if (name == "pvscl") {
          cfg.pvscl_dialect = true;
        } else {
          throw Error("scan config: unknown dialect '" + name + "'");
        }
      }
    }
    if (j.contains("max_file_bytes"))
      cfg.max_file_bytes = j.at("max_file_bytes").get<std::uintmax_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("scan config: ") + e.what());
  }
  if (!cfg.ifdef_dialect && !cfg.pvscl_dialect)
    throw Error("scan config: at least one annotation dialect must be enabled");
  return cfg;
}

/// Kind of a corpus-relative path, or nullopt when the file is not an asset.
/// A configured requirement directory takes precedence over the extension.
inline std::optional<AssetKind> classify_asset(std::string_view path,
                                               const ScanConfig& cfg) {
  for (const auto& dir : cfg.requirement_dirs)
    if (!dir.empty() && path.size() > dir.size() && path.starts_with(dir) &&
        path[dir.size()] == '/')
      return AssetKind::requirement;
  const auto slash = path.rfind('/');
  const auto base = slash == std::string_view::npos ? path : path.substr(slash + 1);
  const auto dot = base.rfind('.');
  if (dot == std::string_view::npos || dot == 0) return std::nullopt;
  auto it = cfg.extensions.find(to_lower(base.substr(dot)));
  if (it == cfg.extensions.end()) return std::nullopt;
  return it->second;
}

struct SourceFile {
  std::string path;
  std::string content;
};

struct ScanResult {
  TraceTable table;
  Diagnostics diagnostics;
};

namespace detail {

enum class Dialect { ifdef, pvscl };

enum class MarkerKind { open, open_opaque, alternative, opaque_alternative, close };

struct Marker {
  Dialect dialect;
  MarkerKind kind;
  std::optional<Condition> condition;  // set for `open`
};

inline std::string_view leading_word(std::string_view s) {
  std::size_t n = 0;
  while (n < s.size() && is_word_char(s[n])) ++n;
  return s.substr(0, n);
}

/// Recognizes `#ifdef NAME`, `#ifndef NAME`, `#else`, `#endif`. `#if` and
/// `#elif` are tracked opaquely so their `#endif` keeps nesting balanced.
inline std::optional<Marker> ifdef_marker(std::string_view line) {
  auto t = trim(line);
  if (t.empty() || t.front() != '#') return std::nullopt;
  t = trim(t.substr(1));
  const auto word = leading_word(t);
  const auto rest = trim(t.substr(word.size()));
  if (word == "ifdef" || word == "ifndef") {
    const auto name = leading_word(rest);
    if (!is_identifier(name))
      throw ParseError("#" + std::string(word) + " without a feature name", 0);
    auto cond = Condition::feature(std::string(name));
    if (word == "ifndef") cond = Condition::negate(std::move(cond));
    return Marker{Dialect::ifdef, MarkerKind::open, std::move(cond)};
  }
  if (word == "if") return Marker{Dialect::ifdef, MarkerKind::open_opaque, {}};
  if (word == "elif")
    return Marker{Dialect::ifdef, MarkerKind::opaque_alternative, {}};
  if (word == "else") return Marker{Dialect::ifdef, MarkerKind::alternative, {}};
  if (word == "endif") return Marker{Dialect::ifdef, MarkerKind::close, {}};
  return std::nullopt;
}

/// Recognizes `PVSCL:IFCOND(EXPR)`, `PVSCL:ELSECOND`, `PVSCL:ENDCOND` anywhere
/// in the line.
inline std::optional<Marker> pvscl_marker(std::string_view line) {
  const auto at = line.find("PVSCL:");
  if (at == std::string_view::npos) return std::nullopt;
  const auto t = line.substr(at + 6);
  if (t.starts_with("IFCOND")) {
    auto open = t.find_first_not_of(" \t", 6);
    if (open == std::string_view::npos || t[open] != '(')
      throw ParseError("PVSCL:IFCOND without '('", 0);
    int depth = 0;
    std::size_t close = std::string_view::npos;
    for (std::size_t i = open; i < t.size(); ++i) {
      if (t[i] == '(') ++depth;
      if (t[i] == ')' && --depth == 0) {
        close = i;
        break;
      }
    }
    if (close == std::string_view::npos)
      throw ParseError("PVSCL:IFCOND with unbalanced parentheses", 0);
    return Marker{Dialect::pvscl, MarkerKind::open,
                  parse_condition(t.substr(open + 1, close - open - 1))};
  }
  if (t.starts_with("ELSEIFCOND"))
    return Marker{Dialect::pvscl, MarkerKind::opaque_alternative, {}};
  if (t.starts_with("ELSECOND"))
    return Marker{Dialect::pvscl, MarkerKind::alternative, {}};
  if (t.starts_with("ENDCOND"))
    return Marker{Dialect::pvscl, MarkerKind::close, {}};
  return std::nullopt;
}

struct Block {
  Dialect dialect;
  std::size_t open_line;
  std::optional<Condition> condition;  // condition of the `if` branch
  std::optional<Condition> branch;     // active branch; nullopt = opaque
  std::size_t branch_start;            // first content line of the branch
  bool in_else = false;
};

struct FileScan {
  std::vector<VariationPoint> points;
  std::set<std::size_t> marker_lines;
};

inline FileScan scan_annotations(const std::string& path,
                                 const std::vector<std::string_view>& lines,
                                 const ScanConfig& cfg) {
  FileScan out;
  std::vector<Block> stack;

  auto close_branch = [&](const Block& b, std::size_t marker_line) {
    if (!b.branch || marker_line <= b.branch_start) return;
    std::vector<Condition> parts;
    for (const auto& outer : stack)
      if (&outer != &b && outer.branch) parts.push_back(*outer.branch);
    parts.push_back(*b.branch);
    VariationPoint vp{path, {b.branch_start, marker_line - 1},
                      Condition::all_of(std::move(parts)), {}, {}};
    vp.positive_features = vp.condition.positive_features();
    vp.mentioned_features = vp.condition.mentioned_features();
    out.points.push_back(std::move(vp));
  };

  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::size_t line_no = n + 1;
    std::optional<Marker> m;
    try {
      if (cfg.ifdef_dialect) m = ifdef_marker(lines[n]);
      if (!m && cfg.pvscl_dialect) m = pvscl_marker(lines[n]);
    } catch (const ParseError& e) {
      throw ParseError(e.message(), line_no);
    }
    if (!m) continue;
    out.marker_lines.insert(line_no);

    switch (m->kind) {
      case MarkerKind::open:
      case MarkerKind::open_opaque:
        stack.push_back(Block{m->dialect, line_no, m->condition, m->condition,
                              line_no + 1});
        break;
      case MarkerKind::alternative:
      case MarkerKind::opaque_alternative: {
        if (stack.empty() || stack.back().dialect != m->dialect)
          throw ParseError("else-branch marker without an open block", line_no);
        Block& b = stack.back();
        if (b.in_else) throw ParseError("second else-branch in one block", line_no);
        close_branch(b, line_no);
        if (m->kind == MarkerKind::alternative) {
          b.in_else = true;
          if (b.condition) {
            b.branch = Condition::negate(*b.condition);
          } else {
            b.branch.reset();
          }
        } else {
          // Chained alternatives are not modelled; the rest of the block is
          // opaque.
          b.condition.reset();
          b.branch.reset();
        }
        b.branch_start = line_no + 1;
        break;
      }
      case MarkerKind::close: {
        if (stack.empty() || stack.back().dialect != m->dialect)
          throw ParseError("block end without a matching open marker", line_no);
        close_branch(stack.back(), line_no);
        stack.pop_back();
        break;
      }
    }
  }
  if (!stack.empty())
    throw ParseError("block opened at line " +
                         std::to_string(stack.back().open_line) +
                         " is never closed",
                     lines.size());
  return out;
}

/// `features: A, B` on the first line, behind any common comment leader.
inline std::optional<std::vector<std::string>> front_matter(
    std::string_view first_line) {
  auto t = trim(first_line);
  for (std::string_view lead : {"<!--", "//", "/*", "#", ";", "--"}) {
    if (t.starts_with(lead)) {
      t = trim(t.substr(lead.size()));
      break;
    }
  }
  if (!t.starts_with("features:")) return std::nullopt;
  t = t.substr(9);
  for (std::string_view tail : {"-->", "*/"})
    if (t.ends_with(tail)) t.remove_suffix(tail.size());
  return split_list(t, ',');
}

inline std::string span_text(const std::vector<std::string_view>& lines,
                             LineSpan span,
                             const std::set<std::size_t>& blank) {
  std::string text;
  for (std::size_t l = span.start; l <= span.end; ++l) {
    if (l != span.start) text += '\n';
    if (!blank.contains(l)) text += lines[l - 1];
  }
  return text;
}

}  // namespace detail

/// Scans in-memory files. The result does not depend on the order of
/// `files`. With a model, names absent from it produce warnings.
inline ScanResult scan_files(std::vector<SourceFile> files,
                             const ScanConfig& cfg,
                             const FeatureModel* model = nullptr) {
  ScanResult result;
  TraceTable& table = result.table;
  std::sort(files.begin(), files.end(),
            [](const SourceFile& a, const SourceFile& b) { return a.path < b.path; });

  for (std::size_t i = 1; i < files.size(); ++i)
    if (files[i].path == files[i - 1].path)
      throw Error("duplicate asset path '" + files[i].path + "'");

  for (const auto& file : files) {
    const auto kind = classify_asset(file.path, cfg);
    if (!kind) continue;
    if (file.content.size() > cfg.max_file_bytes) {
      result.diagnostics.push_back({Severity::warning, file.path, 0,
                                    "skipped: larger than max_file_bytes"});
      continue;
    }
    if (file.content.find('\0') != std::string::npos) {
      result.diagnostics.push_back(
          {Severity::warning, file.path, 0, "skipped: binary content"});
      continue;
    }

    const auto lines = split_lines(file.content);
    detail::FileScan scan;
    try {
      scan = detail::scan_annotations(file.path, lines, cfg);
    } catch (const ParseError& e) {
      result.diagnostics.push_back(
          {Severity::error, file.path, e.line(), e.message() + "; file skipped"});
      continue;
    }

    table.assets.push_back({file.path, *kind, lines.size()});
    table.contents.emplace(file.path, file.content);

    for (auto& vp : scan.points) {
      if (model)
        for (const auto& name : vp.mentioned_features)
          if (!model->contains(name))
            result.diagnostics.push_back(
                {Severity::warning, file.path, vp.span.start - 1,
                 "condition names unknown feature '" + name + "'"});
      const std::string text = detail::span_text(lines, vp.span, scan.marker_lines);
      for (const auto& f : vp.positive_features)
        table.feature_segments[f].push_back({file.path, vp.span, text});
      table.variation_points.push_back(std::move(vp));
    }

    if (*kind != AssetKind::code && !lines.empty()) {
      if (auto names = detail::front_matter(lines.front())) {
        auto& bound = table.doc_bindings[file.path];
        for (auto& name : *names) {
          if (!is_identifier(name)) {
            result.diagnostics.push_back({Severity::warning, file.path, 1,
                                          "ignored front-matter entry '" + name + "'"});
            continue;
          }
          if (model && !model->contains(name))
            result.diagnostics.push_back(
                {Severity::warning, file.path, 1,
                 "front matter names unknown feature '" + name + "'"});
          bound.insert(std::move(name));
        }
        if (bound.empty()) {
          table.doc_bindings.erase(file.path);
        } else if (lines.size() >= 2) {
          const LineSpan span{2, lines.size()};
          const std::string text = detail::span_text(lines, span, scan.marker_lines);
          for (const auto& f : bound)
            table.feature_segments[f].push_back({file.path, span, text});
        }
      }
    }
  }

  std::sort(table.variation_points.begin(), table.variation_points.end(),
            [](const VariationPoint& a, const VariationPoint& b) {
              return std::tie(a.asset, a.span) < std::tie(b.asset, b.span);
            });
  for (auto& [feature, segments] : table.feature_segments)
    std::sort(segments.begin(), segments.end(),
              [](const Segment& a, const Segment& b) {
                return std::tie(a.path, a.span) < std::tie(b.path, b.span);
              });
  std::set<AssetKind> kinds;
  for (const auto& a : table.assets) kinds.insert(a.kind);
  table.asset_count = table.assets.size();
  table.asset_kind_count = kinds.size();
  std::sort(result.diagnostics.begin(), result.diagnostics.end());
  return result;
}

/// Walks `root` recursively and scans every file the configuration maps to
/// an asset kind. `reverse_enumeration` presents files to the scanner in
/// reverse order; the result must not change.
inline ScanResult scan_corpus(const std::filesystem::path& root,
                              const ScanConfig& cfg,
                              const FeatureModel* model = nullptr,
                              bool reverse_enumeration = false) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root))
    throw Error("corpus root '" + root.string() + "' is not a directory");
  std::vector<SourceFile> files;
  Diagnostics skipped;
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file()) paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  if (reverse_enumeration) std::reverse(paths.begin(), paths.end());

  for (const auto& p : paths) {
    std::string rel = p.lexically_relative(root).generic_string();
    if (!classify_asset(rel, cfg)) continue;
    if (fs::file_size(p) > cfg.max_file_bytes) {
      skipped.push_back({Severity::warning, rel, 0,
                         "skipped: larger than max_file_bytes"});
      continue;
    }
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read '" + p.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    files.push_back({std::move(rel), buf.str()});
  }
  ScanResult result = scan_files(std::move(files), cfg, model);
  result.diagnostics.insert(result.diagnostics.end(), skipped.begin(),
                            skipped.end());
  std::sort(result.diagnostics.begin(), result.diagnostics.end());
  return result;
}

// ---------------------------------------------------------------------------
// Scattering and tangling
// ---------------------------------------------------------------------------

struct Scattering {
  std::size_t vp_count = 0;
  std::size_t file_count = 0;

  friend bool operator==(const Scattering&, const Scattering&) = default;
};

struct TraceMetrics {
  std::map<std::string, Scattering> scattering;
  std::map<std::string, std::set<std::string>> tangling;

  friend bool operator==(const TraceMetrics&, const TraceMetrics&) = default;
};

inline TraceMetrics trace_metrics(const TraceTable& table) {
  TraceMetrics m;
  std::map<std::string, std::set<std::string>> files;
  for (const auto& vp : table.variation_points) {
    for (const auto& f : vp.mentioned_features) {
      ++m.scattering[f].vp_count;
      files[f].insert(vp.asset);
      auto& tangled = m.tangling[f];
      for (const auto& g : vp.mentioned_features)
        if (g != f) tangled.insert(g);
    }
  }
  for (auto& [f, s] : m.scattering) s.file_count = files[f].size();
  return m;
}

// ---------------------------------------------------------------------------
// JSON views
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json span_json(LineSpan s) {
  return nlohmann::ordered_json::array({s.start, s.end});
}

/// Canonical JSON of a trace table (asset contents and segment text omitted).
inline nlohmann::ordered_json to_json(const TraceTable& t) {
  using json = nlohmann::ordered_json;
  json j;
  j["asset_count"] = t.asset_count;
  j["asset_kind_count"] = t.asset_kind_count;
  json assets = json::array();
  for (const auto& a : t.assets)
    assets.push_back({{"path", a.path}, {"kind", to_string(a.kind)}, {"size", a.size}});
  j["assets"] = std::move(assets);
  json vps = json::array();
  for (const auto& vp : t.variation_points)
    vps.push_back({{"asset", vp.asset},
                   {"span", span_json(vp.span)},
                   {"condition", vp.condition.str()},
                   {"positive_features", vp.positive_features},
                   {"mentioned_features", vp.mentioned_features}});
  j["variation_points"] = std::move(vps);
  json segs = json::object();
  for (const auto& [f, list] : t.feature_segments) {
    json arr = json::array();
    for (const auto& s : list)
      arr.push_back({{"path", s.path}, {"span", span_json(s.span)}});
    segs[f] = std::move(arr);
  }
  j["feature_segments"] = std::move(segs);
  json bindings = json::object();
  for (const auto& [path, names] : t.doc_bindings) bindings[path] = names;
  j["doc_bindings"] = std::move(bindings);
  return j;
}

inline nlohmann::ordered_json to_json(const TraceMetrics& m) {
  using json = nlohmann::ordered_json;
  json scattering = json::object();
  for (const auto& [f, s] : m.scattering)
    scattering[f] = {{"vp_count", s.vp_count}, {"file_count", s.file_count}};
  json tangling = json::object();
  for (const auto& [f, g] : m.tangling) tangling[f] = g;
  return {{"scattering", std::move(scattering)}, {"tangling", std::move(tangling)}};
}

}  // namespace splcmap

#endif
