#ifndef SPLCMAP_CMAP_DOCUMENT_HPP
#define SPLCMAP_CMAP_DOCUMENT_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "splcmap/asset_scanner.hpp"
#include "splcmap/concept_builder.hpp"
#include "splcmap/curation.hpp"
#include "splcmap/error.hpp"
#include "splcmap/feature_model.hpp"
#include "splcmap/relationship_builder.hpp"
#include "splcmap/text.hpp"

namespace splcmap {

inline constexpr int cmap_format_version = 1;

enum class DefinitionSource { curation, extracted };

inline const char* to_string(DefinitionSource s) {
  return s == DefinitionSource::curation ? "curation" : "extracted";
}

struct GlossaryEntry {
  std::string term;
  std::optional<std::string> definition;
  std::optional<DefinitionSource> source;

  friend bool operator==(const GlossaryEntry&, const GlossaryEntry&) = default;
};

/// Feature-asset trace: one traced segment.
struct FeatureTrace {
  std::string feature;
  std::string path;
  AssetKind kind = AssetKind::code;
  LineSpan span;

  friend bool operator==(const FeatureTrace&, const FeatureTrace&) = default;
};

struct CmapDocument {
  int version = cmap_format_version;
  std::string spl_name;
  int levels_built = 0;
  std::vector<Concept> concepts;
  std::vector<Edge> relationships;
  std::vector<Feature> features;
  std::vector<CrossTreeConstraint> constraints;
  std::vector<FeatureTrace> traces;
  TraceMetrics metrics;
  std::vector<GlossaryEntry> glossary;

  const Concept* find_concept(std::string_view id) const {
    for (const auto& c : concepts)
      if (c.id == id) return &c;
    return nullptr;
  }

  friend bool operator==(const CmapDocument&, const CmapDocument&) = default;
};

// ---------------------------------------------------------------------------
// Glossary definitions
// ---------------------------------------------------------------------------

inline constexpr std::size_t max_definition_length = 240;

namespace detail {

inline std::vector<std::string> document_sentences(std::string_view text,
                                                   bool has_front_matter) {
  std::vector<std::string> sentences;
  std::string paragraph;
  auto flush = [&] {
    std::string current;
    for (std::size_t i = 0; i < paragraph.size(); ++i) {
      current += paragraph[i];
      const char c = paragraph[i];
      const bool boundary =
          (c == '.' || c == '!' || c == '?') &&
          (i + 1 == paragraph.size() || is_space(paragraph[i + 1]));
      if (boundary) {
        auto s = trim(current);
        if (!s.empty()) sentences.emplace_back(s);
        current.clear();
      }
    }
    auto s = trim(current);
    if (!s.empty()) sentences.emplace_back(s);
    paragraph.clear();
  };

  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (n == 0 && has_front_matter) continue;
    std::string_view line = trim(lines[n]);
    const bool markup = line.starts_with("#") || line.starts_with("<!--") ||
                        line.find("PVSCL:") != std::string_view::npos;
    if (line.empty() || markup) {
      flush();
      continue;
    }
    for (std::string_view bullet : {"- ", "* ", "> "})
      if (line.starts_with(bullet)) line = trim(line.substr(bullet.size()));
    if (!paragraph.empty()) paragraph += ' ';
    for (char c : line) {
      if (is_space(c)) {
        if (!paragraph.empty() && paragraph.back() != ' ') paragraph += ' ';
      } else {
        paragraph += c;
      }
    }
  }
  flush();
  return sentences;
}

inline std::string truncate_utf8(std::string s, std::size_t max) {
  if (s.size() <= max) return s;
  std::size_t cut = max;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  s.resize(cut);
  return s;
}

}  // namespace detail

namespace detail {

/// "An annotation is ...", "Codebooks are ...": the term opens the sentence,
/// after an optional article, and is followed by a copula.
inline bool defines(std::string_view sentence, std::string_view term) {
  auto words = split_whitespace(to_lower(sentence));
  std::size_t i = 0;
  if (i < words.size() && (words[i] == "a" || words[i] == "an" || words[i] == "the")) ++i;
  if (i + 1 >= words.size()) return false;
  const std::string t = to_lower(term);
  const std::string& w = words[i];
  return (w == t || w == t + "s") && (words[i + 1] == "is" || words[i + 1] == "are");
}

}  // namespace detail

/// A sentence from the documentation assets (path order) that mentions
/// `term` as a whole word, case-insensitively. A sentence that defines the
/// term wins over the first mere mention. Truncated to 240 bytes.
inline std::optional<std::string> extract_definition(const TraceTable& table,
                                                     std::string_view term) {
  std::optional<std::string> mention;
  for (const auto& asset : table.assets) {
    if (asset.kind != AssetKind::documentation) continue;
    auto text = table.contents.find(asset.path);
    if (text == table.contents.end()) continue;
    const bool bound = table.doc_bindings.contains(asset.path);
    for (auto& sentence : detail::document_sentences(text->second, bound)) {
      if (detail::defines(sentence, term))
        return detail::truncate_utf8(std::move(sentence), max_definition_length);
      if (!mention && contains_word(sentence, term)) mention = std::move(sentence);
    }
  }
  if (mention) return detail::truncate_utf8(std::move(*mention), max_definition_length);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

inline void sort_canonically(CmapDocument& doc) {
  std::sort(doc.concepts.begin(), doc.concepts.end(), processed_before);
  std::sort(doc.relationships.begin(), doc.relationships.end(),
            [](const Edge& a, const Edge& b) {
              return std::tie(a.source, a.target) < std::tie(b.source, b.target);
            });
  std::sort(doc.features.begin(), doc.features.end(),
            [](const Feature& a, const Feature& b) {
              return std::tie(a.level, a.name) < std::tie(b.level, b.name);
            });
  std::sort(doc.traces.begin(), doc.traces.end(),
            [](const FeatureTrace& a, const FeatureTrace& b) {
              return std::tie(a.feature, a.path, a.span) <
                     std::tie(b.feature, b.path, b.span);
            });
  std::sort(doc.glossary.begin(), doc.glossary.end(),
            [](const GlossaryEntry& a, const GlossaryEntry& b) { return a.term < b.term; });
}

/// Throws on any reference that does not resolve inside the document.
inline void check_consistency(const CmapDocument& doc) {
  std::set<std::string> ids;
  for (const auto& c : doc.concepts)
    if (!ids.insert(c.id).second)
      throw Error("dangling reference: duplicate concept id '" + c.id + "'");
  std::set<std::string> features;
  for (const auto& f : doc.features) features.insert(f.name);
  for (const auto& e : doc.relationships)
    if (!ids.contains(e.source) || !ids.contains(e.target))
      throw Error("dangling reference: relationship " + e.source + " -> " + e.target);
  for (const auto& c : doc.concepts)
    for (const auto& f : c.features)
      if (!features.contains(f))
        throw Error("dangling reference: concept '" + c.label + "' traces unknown feature '" +
                    f + "'");
  for (const auto& t : doc.traces)
    if (!features.contains(t.feature))
      throw Error("dangling reference: trace of unknown feature '" + t.feature + "'");
  for (const auto& k : doc.constraints)
    if (!features.contains(k.lhs) || !features.contains(k.rhs))
      throw Error("dangling reference: constraint on unknown feature");
}

/// Builds the document from the stages of one run. Concepts keep a curated
/// definition when they have one; otherwise a sentence from the
/// documentation is used when it mentions the label.
inline CmapDocument assemble(const FeatureModel& model, const TraceTable& table,
                             const TraceMetrics& metrics, std::vector<Concept> concepts,
                             std::vector<Edge> edges, int levels_built) {
  CmapDocument doc;
  doc.spl_name = model.spl_name();
  doc.levels_built = levels_built;
  doc.features.assign(model.features().begin(), model.features().end());
  doc.constraints = model.constraints();
  doc.metrics = metrics;

  for (auto& c : concepts) {
    c.carried = false;
    GlossaryEntry entry{c.label, std::nullopt, std::nullopt};
    if (c.definition) {
      entry.definition = c.definition;
      entry.source = DefinitionSource::curation;
    } else if (auto d = extract_definition(table, c.label)) {
      entry.definition = std::move(d);
      entry.source = DefinitionSource::extracted;
    }
    c.definition = entry.definition;
    doc.glossary.push_back(std::move(entry));
  }
  doc.concepts = std::move(concepts);
  doc.relationships = std::move(edges);

  for (const auto& [feature, segments] : table.feature_segments) {
    if (!model.contains(feature)) continue;
    for (const auto& s : segments) {
      const Asset* asset = table.find_asset(s.path);
      if (!asset)
        throw Error("dangling reference: trace to unscanned asset '" + s.path + "'");
      doc.traces.push_back({feature, s.path, asset->kind, s.span});
    }
  }

  sort_canonically(doc);
  check_consistency(doc);
  return doc;
}

// ---------------------------------------------------------------------------
// Known-product overlay
// ---------------------------------------------------------------------------

enum class ConceptStatus { known, fresh };

inline const char* to_string(ConceptStatus s) {
  return s == ConceptStatus::known ? "known" : "new";
}

struct OverlayResult {
  std::map<std::string, ConceptStatus> statuses;  // concept id -> status

  friend bool operator==(const OverlayResult&, const OverlayResult&) = default;
};

/// A concept is known when any of its traced features belongs to the
/// product configuration the reader already worked with.
inline OverlayResult known_overlay(const CmapDocument& doc,
                                   const std::set<std::string>& configuration) {
  std::set<std::string> names;
  for (const auto& f : doc.features) names.insert(f.name);
  std::vector<std::string> unknown;
  for (const auto& f : configuration)
    if (!names.contains(f)) unknown.push_back(f);
  if (!unknown.empty())
    throw Error("configuration names unknown features: " + join(unknown, ", "));
  OverlayResult out;
  for (const auto& c : doc.concepts)
    out.statuses[c.id] = detail::intersects(c.features, configuration)
                             ? ConceptStatus::known
                             : ConceptStatus::fresh;
  return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

using ojson = nlohmann::ordered_json;

template <typename T>
std::vector<std::string> kind_names(const std::set<T>& kinds) {
  std::vector<std::string> out;
  for (auto k : kinds) out.emplace_back(to_string(k));
  return out;
}

inline std::set<AssetKind> kinds_from(const ojson& j) {
  std::set<AssetKind> out;
  for (const auto& s : j) {
    auto k = asset_kind_from_string(s.get<std::string>());
    if (!k) throw Error("unknown asset kind '" + s.get<std::string>() + "'");
    out.insert(*k);
  }
  return out;
}

inline LineSpan span_from(const ojson& j) {
  if (!j.is_array() || j.size() != 2) throw Error("span must be [start, end]");
  return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()};
}

inline ojson optional_json(const std::optional<std::string>& s) {
  return s ? ojson(*s) : ojson(nullptr);
}

inline std::optional<std::string> optional_from(const ojson& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

inline ojson keyword_json(const Keyword& k) {
  ojson assets = ojson::object();
  for (const auto& [path, n] : k.asset_occurrences) assets[path] = n;
  return {{"surface", k.surface},
          {"norm", k.norm},
          {"occurrences", k.occurrences},
          {"score", k.score},
          {"features", k.features},
          {"asset_occurrences", std::move(assets)},
          {"asset_kinds", kind_names(k.asset_kinds)}};
}

inline Keyword keyword_from(const ojson& j) {
  Keyword k;
  k.surface = j.at("surface").get<std::string>();
  k.norm = j.at("norm").get<std::string>();
  k.occurrences = j.at("occurrences").get<std::size_t>();
  k.score = j.at("score").get<double>();
  k.features = j.at("features").get<std::set<std::string>>();
  for (const auto& [path, n] : j.at("asset_occurrences").items())
    k.asset_occurrences[path] = n.get<std::size_t>();
  k.asset_kinds = kinds_from(j.at("asset_kinds"));
  return k;
}

inline ojson concept_json(const Concept& c) {
  ojson members = ojson::array();
  for (const auto& k : c.members) members.push_back(keyword_json(k));
  return {{"id", c.id},
          {"label", c.label},
          {"level", c.level},
          {"relevance", c.relevance},
          {"occurrences", c.occurrences},
          {"features", c.features},
          {"assets", c.assets},
          {"asset_kinds", kind_names(c.asset_kinds)},
          {"aliases", c.aliases},
          {"definition", optional_json(c.definition)},
          {"members", std::move(members)}};
}

inline Concept concept_from(const ojson& j) {
  Concept c;
  c.id = j.at("id").get<std::string>();
  c.label = j.at("label").get<std::string>();
  c.level = j.at("level").get<int>();
  c.relevance = j.at("relevance").get<double>();
  c.occurrences = j.at("occurrences").get<std::size_t>();
  c.features = j.at("features").get<std::set<std::string>>();
  c.assets = j.at("assets").get<std::set<std::string>>();
  c.asset_kinds = kinds_from(j.at("asset_kinds"));
  c.aliases = j.at("aliases").get<std::set<std::string>>();
  c.definition = optional_from(j, "definition");
  for (const auto& m : j.at("members")) c.members.push_back(keyword_from(m));
  return c;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const CmapDocument& doc) {
  using detail::ojson;
  ojson j;
  j["version"] = doc.version;
  j["spl_name"] = doc.spl_name;
  j["levels_built"] = doc.levels_built;

  ojson concepts = ojson::array();
  for (const auto& c : doc.concepts) concepts.push_back(detail::concept_json(c));
  j["concepts"] = std::move(concepts);

  ojson rels = ojson::array();
  for (const auto& e : doc.relationships)
    rels.push_back({{"source", e.source},
                    {"target", e.target},
                    {"label", e.label},
                    {"directed", e.directed},
                    {"provenance", to_string(e.provenance)}});
  j["relationships"] = std::move(rels);

  ojson features = ojson::array();
  for (const auto& f : doc.features)
    features.push_back({{"name", f.name},
                        {"parent", detail::optional_json(f.parent)},
                        {"level", f.level},
                        {"variability", to_string(f.variability)},
                        {"group", detail::optional_json(f.group_id)}});
  j["features"] = std::move(features);

  ojson constraints = ojson::array();
  for (const auto& k : doc.constraints)
    constraints.push_back({{"kind", to_string(k.kind)}, {"lhs", k.lhs}, {"rhs", k.rhs}});
  j["constraints"] = std::move(constraints);

  ojson traces = ojson::array();
  for (const auto& t : doc.traces)
    traces.push_back({{"feature", t.feature},
                      {"path", t.path},
                      {"kind", to_string(t.kind)},
                      {"span", span_json(t.span)}});
  j["traces"] = std::move(traces);

  j["metrics"] = to_json(doc.metrics);

  ojson glossary = ojson::array();
  for (const auto& g : doc.glossary)
    glossary.push_back(
        {{"term", g.term},
         {"definition", detail::optional_json(g.definition)},
         {"source", g.source ? ojson(to_string(*g.source)) : ojson(nullptr)}});
  j["glossary"] = std::move(glossary);
  return j;
}

/// Canonical text of the document (`.cmap.json`).
inline std::string serialize_document(const CmapDocument& doc) {
  return to_json(doc).dump(2) + "\n";
}

inline CmapDocument parse_document(std::string_view text) {
  using detail::ojson;
  CmapDocument doc;
  try {
    const ojson j = ojson::parse(text);
    doc.version = j.at("version").get<int>();
    if (doc.version != cmap_format_version)
      throw Error("unsupported document version " + std::to_string(doc.version));
    doc.spl_name = j.at("spl_name").get<std::string>();
    doc.levels_built = j.at("levels_built").get<int>();
    for (const auto& c : j.at("concepts")) doc.concepts.push_back(detail::concept_from(c));
    for (const auto& e : j.at("relationships")) {
      auto p = provenance_from_string(e.at("provenance").get<std::string>());
      if (!p) throw Error("unknown relationship provenance");
      doc.relationships.push_back({e.at("source").get<std::string>(),
                                   e.at("target").get<std::string>(),
                                   e.at("label").get<std::string>(),
                                   e.at("directed").get<bool>(), *p});
    }
    for (const auto& f : j.at("features")) {
      auto v = variability_from_string(f.at("variability").get<std::string>());
      if (!v) throw Error("unknown variability");
      doc.features.push_back({f.at("name").get<std::string>(),
                              detail::optional_from(f, "parent"), f.at("level").get<int>(),
                              *v, detail::optional_from(f, "group")});
    }
    for (const auto& k : j.at("constraints")) {
      const auto kind = k.at("kind").get<std::string>();
      if (kind != "requires" && kind != "excludes")
        throw Error("unknown constraint kind '" + kind + "'");
      doc.constraints.push_back(
          {kind == "requires" ? ConstraintKind::require : ConstraintKind::exclude,
           k.at("lhs").get<std::string>(), k.at("rhs").get<std::string>()});
    }
    for (const auto& t : j.at("traces")) {
      auto kind = asset_kind_from_string(t.at("kind").get<std::string>());
      if (!kind) throw Error("unknown asset kind");
      doc.traces.push_back({t.at("feature").get<std::string>(),
                            t.at("path").get<std::string>(), *kind,
                            detail::span_from(t.at("span"))});
    }
    const auto& metrics = j.at("metrics");
    for (const auto& [f, s] : metrics.at("scattering").items())
      doc.metrics.scattering[f] = {s.at("vp_count").get<std::size_t>(),
                                   s.at("file_count").get<std::size_t>()};
    for (const auto& [f, g] : metrics.at("tangling").items())
      doc.metrics.tangling[f] = g.get<std::set<std::string>>();
    for (const auto& g : j.at("glossary")) {
      GlossaryEntry entry{g.at("term").get<std::string>(), detail::optional_from(g, "definition"),
                          std::nullopt};
      if (auto src = detail::optional_from(g, "source")) {
        if (*src == "curation") entry.source = DefinitionSource::curation;
        else if (*src == "extracted") entry.source = DefinitionSource::extracted;
        else throw Error("unknown definition source '" + *src + "'");
      }
      doc.glossary.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed document: ") + e.what());
  }
  check_consistency(doc);
  return doc;
}

// ---------------------------------------------------------------------------
// Graph exports
// ---------------------------------------------------------------------------

enum class ExportFormat { dot, graphml };

inline ExportFormat parse_export_format(std::string_view tag) {
  if (tag == "dot") return ExportFormat::dot;
  if (tag == "graphml") return ExportFormat::graphml;
  throw Error("unsupported export format '" + std::string(tag) + "'");
}

inline const char* file_extension(ExportFormat f) {
  return f == ExportFormat::dot ? ".dot" : ".graphml";
}

namespace detail {

inline std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Directed graph; undirected relationships carry `dir=none`.
inline std::string export_dot(const CmapDocument& doc) {
  std::ostringstream out;
  out << "digraph " << detail::dot_quote(doc.spl_name) << " {\n";
  out << "  node [shape=box];\n";
  for (const auto& c : doc.concepts)
    out << "  " << detail::dot_quote(c.id) << " [label=" << detail::dot_quote(c.label)
        << ", level=" << c.level << "];\n";
  for (const auto& e : doc.relationships) {
    out << "  " << detail::dot_quote(e.source) << " -> " << detail::dot_quote(e.target)
        << " [label=" << detail::dot_quote(e.label);
    if (!e.directed) out << ", dir=none";
    out << "];\n";
  }
  out << "}\n";
  return out.str();
}

inline std::string export_graphml(const CmapDocument& doc) {
  using detail::xml_escape;
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
      << "  <key id=\"label\" for=\"all\" attr.name=\"label\" attr.type=\"string\"/>\n"
      << "  <key id=\"level\" for=\"node\" attr.name=\"level\" attr.type=\"int\"/>\n"
      << "  <graph id=\"" << xml_escape(doc.spl_name) << "\" edgedefault=\"directed\">\n";
  for (const auto& c : doc.concepts)
    out << "    <node id=\"" << xml_escape(c.id) << "\">\n"
        << "      <data key=\"label\">" << xml_escape(c.label) << "</data>\n"
        << "      <data key=\"level\">" << c.level << "</data>\n"
        << "    </node>\n";
  std::size_t n = 0;
  for (const auto& e : doc.relationships)
    out << "    <edge id=\"e" << n++ << "\" source=\"" << xml_escape(e.source)
        << "\" target=\"" << xml_escape(e.target) << "\" directed=\""
        << (e.directed ? "true" : "false") << "\">\n"
        << "      <data key=\"label\">" << xml_escape(e.label) << "</data>\n"
        << "    </edge>\n";
  out << "  </graph>\n</graphml>\n";
  return out.str();
}

inline std::string export_document(const CmapDocument& doc, ExportFormat format) {
  return format == ExportFormat::dot ? export_dot(doc) : export_graphml(doc);
}

inline std::string export_document(const CmapDocument& doc, std::string_view format) {
  return export_document(doc, parse_export_format(format));
}

}  // namespace splcmap

#endif
