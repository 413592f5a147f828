#ifndef SPLCMAP_LEXICON_HPP
#define SPLCMAP_LEXICON_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "splcmap/asset_scanner.hpp"
#include "splcmap/error.hpp"
#include "splcmap/text.hpp"

namespace splcmap {

enum class TokenMode { code, prose };

struct LexiconConfig {
  std::set<std::string> stopwords_extra;  // compared lowercase
  std::size_t keywords_per_feature = 50;
  std::size_t min_token_len = 3;
};

inline LexiconConfig parse_lexicon_config(std::string_view text) {
  LexiconConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error("lexicon config: expected an object");
    if (j.contains("stopwords_extra"))
      for (const auto& w : j.at("stopwords_extra"))
        cfg.stopwords_extra.insert(to_lower(w.get<std::string>()));
    if (j.contains("keywords_per_feature"))
      cfg.keywords_per_feature = j.at("keywords_per_feature").get<std::size_t>();
    if (j.contains("min_token_len"))
      cfg.min_token_len = j.at("min_token_len").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("lexicon config: ") + e.what());
  }
  if (cfg.keywords_per_feature == 0)
    throw Error("lexicon config: keywords_per_feature must be at least 1");
  return cfg;
}

inline const std::set<std::string>& english_stopwords() {
  static const std::set<std::string> words{
      "a",     "about", "above", "after",  "all",   "also",  "an",    "and",
      "any",   "are",   "as",    "at",     "be",    "been",  "but",   "by",
      "can",   "could", "did",   "do",     "does",  "each",  "every", "for",   "from",
      "had",   "has",   "have",  "he",     "her",   "his",   "how",   "if",
      "in",    "into",  "is",    "it",     "its",   "may",   "more",  "most",
      "must",  "no",    "not",   "of",     "on",    "one",   "only",  "or",
      "other", "our",   "over",  "same",   "shall", "she",   "should", "so",   "some",
      "such",  "than",  "that",  "the",    "their", "them",  "then",  "there",
      "these", "they",  "this",  "those",  "through", "to",  "under", "up",
      "very",  "was",   "we",    "were",   "what",  "when",  "where", "which",
      "while", "who",   "will",  "with",   "would", "you",   "your"};
  return words;
}

/// Keywords of the languages the corpus is usually written in, plus the
/// annotation vocabulary itself.
inline const std::set<std::string>& programming_keywords() {
  static const std::set<std::string> words{
      "async",   "await",   "bool",     "break",   "case",    "catch",
      "char",    "class",   "const",    "constructor", "continue", "default", "define",
      "delete",  "double",  "elif",     "else",    "endif",   "enum",
      "export",  "extends", "false",    "finally", "float",   "for",
      "function", "ifdef",  "ifndef",   "import",  "include", "instanceof",
      "int",     "let",     "long",     "new",     "null",    "private",
      "protected", "public", "return",  "self",    "static",  "struct",
      "super",   "switch",  "this",     "throw",   "true",    "try",
      "typeof",  "undefined", "unsigned", "var",   "void",    "while",
      "pvscl",   "ifcond",  "elsecond", "endcond", "require", "module"};
  return words;
}

/// Lowercase, drop underscores, strip one plural `s` from words longer than
/// three characters (never from `ss` endings, which keeps this idempotent).
inline std::string normalize_keyword(std::string_view surface) {
  std::string out;
  for (char c : surface)
    if (c != '_') out += c;
  out = to_lower(out);
  if (out.size() > 3 && out.back() == 's' && out[out.size() - 2] != 's')
    out.pop_back();
  return out;
}

namespace detail {

/// Splits an identifier at underscores and case changes:
/// `AnnotationList` -> Annotation, List; `HTTPServer` -> HTTP, Server.
inline std::vector<std::string> identifier_parts(std::string_view word) {
  std::vector<std::string> parts;
  for (const auto& piece : split_list(word, '_')) {
    std::size_t start = 0;
    for (std::size_t i = 1; i < piece.size(); ++i) {
      const char prev = piece[i - 1];
      const char cur = piece[i];
      const bool lower_to_upper = (is_lower(prev) || is_digit(prev)) && is_upper(cur);
      const bool acronym_end = is_upper(prev) && is_upper(cur) &&
                               i + 1 < piece.size() && is_lower(piece[i + 1]);
      if (lower_to_upper || acronym_end) {
        parts.push_back(piece.substr(start, i - start));
        start = i;
      }
    }
    parts.push_back(piece.substr(start));
  }
  return parts;
}

inline bool has_letter(std::string_view s) {
  return std::any_of(s.begin(), s.end(), is_alpha);
}

}  // namespace detail

/// Surface tokens of `text`. Code mode keeps compound identifiers whole and
/// also emits their parts; prose mode emits words only. Short tokens,
/// numbers and stopwords are dropped.
inline std::vector<std::string> tokenize(std::string_view text, TokenMode mode,
                                         const LexiconConfig& cfg = {}) {
  auto keep = [&](std::string_view t) {
    if (t.size() < cfg.min_token_len || !detail::has_letter(t)) return false;
    const std::string low = to_lower(t);
    return !english_stopwords().contains(low) &&
           !programming_keywords().contains(low) &&
           !cfg.stopwords_extra.contains(low);
  };

  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_char(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && is_word_char(text[j])) ++j;
    std::string_view word = text.substr(i, j - i);
    i = j;
    while (!word.empty() && word.front() == '_') word.remove_prefix(1);
    while (!word.empty() && word.back() == '_') word.remove_suffix(1);
    if (word.empty()) continue;
    if (keep(word)) out.emplace_back(word);
    if (mode == TokenMode::code) {
      const auto parts = detail::identifier_parts(word);
      if (parts.size() > 1)
        for (const auto& p : parts)
          if (keep(p)) out.push_back(p);
    }
  }
  return out;
}

inline TokenMode mode_for(AssetKind kind) {
  return kind == AssetKind::code ? TokenMode::code : TokenMode::prose;
}

struct Keyword {
  std::string surface;
  std::string norm;
  std::size_t occurrences = 0;
  std::set<std::string> features;
  std::map<std::string, std::size_t> asset_occurrences;  // path -> count
  std::set<AssetKind> asset_kinds;
  double score = 0.0;

  std::set<std::string> assets() const {
    std::set<std::string> out;
    for (const auto& [path, n] : asset_occurrences) out.insert(path);
    return out;
  }

  /// Folds the statistics of another keyword with the same surface.
  void absorb(const Keyword& other) {
    occurrences += other.occurrences;
    features.insert(other.features.begin(), other.features.end());
    for (const auto& [path, n] : other.asset_occurrences)
      asset_occurrences[path] += n;
    asset_kinds.insert(other.asset_kinds.begin(), other.asset_kinds.end());
    score = std::max(score, other.score);
  }

  friend bool operator==(const Keyword&, const Keyword&) = default;
};

struct KeywordExtraction {
  std::vector<Keyword> keywords;
  Diagnostics diagnostics;
};

/// Number of assets whose text contains each surface in `surfaces`.
inline std::map<std::string, std::size_t> document_frequency(
    const TraceTable& table, const std::set<std::string>& surfaces,
    const LexiconConfig& cfg) {
  std::map<std::string, std::size_t> df;
  for (const auto& asset : table.assets) {
    auto it = table.contents.find(asset.path);
    if (it == table.contents.end()) continue;
    std::set<std::string> present;
    for (auto& t : tokenize(it->second, mode_for(asset.kind), cfg))
      if (surfaces.contains(t)) present.insert(std::move(t));
    for (const auto& s : present) ++df[s];
  }
  return df;
}

/// Keywords of the segments traced to `batch`. Each token instance is
/// counted once even when nested blocks place it in several segments.
/// score = tf * log(1 + A / a(k)); each feature keeps its top
/// `keywords_per_feature` keywords.
inline KeywordExtraction extract_keywords(const TraceTable& table,
                                          std::span<const std::string> batch,
                                          const LexiconConfig& cfg = {}) {
  KeywordExtraction out;
  std::set<std::string> features(batch.begin(), batch.end());

  struct Instance {
    std::string surface;
    AssetKind kind;
    std::set<std::string> features;
  };
  std::map<std::tuple<std::string, std::size_t, std::size_t>, Instance> instances;

  for (const auto& f : features) {
    auto segs = table.feature_segments.find(f);
    if (segs == table.feature_segments.end()) {
      out.diagnostics.push_back({Severity::warning, "", 0,
                                 "feature '" + f + "' has no traced segments"});
      continue;
    }
    for (const auto& seg : segs->second) {
      const Asset* asset = table.find_asset(seg.path);
      if (!asset) throw Error("segment refers to unscanned asset '" + seg.path + "'");
      const auto lines = split_lines(seg.text);
      for (std::size_t k = 0; k < lines.size(); ++k) {
        auto tokens = tokenize(lines[k], mode_for(asset->kind), cfg);
        for (std::size_t t = 0; t < tokens.size(); ++t) {
          auto& inst = instances[{seg.path, seg.span.start + k, t}];
          inst.surface = std::move(tokens[t]);
          inst.kind = asset->kind;
          inst.features.insert(f);
        }
      }
    }
  }

  std::map<std::string, Keyword> by_surface;
  for (const auto& [where, inst] : instances) {
    Keyword& kw = by_surface[inst.surface];
    kw.surface = inst.surface;
    ++kw.occurrences;
    kw.features.insert(inst.features.begin(), inst.features.end());
    ++kw.asset_occurrences[std::get<0>(where)];
    kw.asset_kinds.insert(inst.kind);
  }
  if (by_surface.empty()) return out;

  std::set<std::string> surfaces;
  for (const auto& [s, kw] : by_surface) surfaces.insert(s);
  const auto df = document_frequency(table, surfaces, cfg);
  const double total_assets = static_cast<double>(table.asset_count);

  std::vector<Keyword> ranked;
  for (auto& [s, kw] : by_surface) {
    kw.norm = normalize_keyword(kw.surface);
    auto it = df.find(s);
    const double containing =
        it == df.end() ? static_cast<double>(kw.asset_occurrences.size())
                       : static_cast<double>(it->second);
    kw.score = static_cast<double>(kw.occurrences) *
               std::log(1.0 + total_assets / containing);
    ranked.push_back(std::move(kw));
  }
  auto order = [](const Keyword& a, const Keyword& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.surface < b.surface;
  };
  std::sort(ranked.begin(), ranked.end(), order);

  std::set<std::string> kept;
  for (const auto& f : features) {
    std::size_t taken = 0;
    for (const auto& kw : ranked) {
      if (taken == cfg.keywords_per_feature) break;
      if (!kw.features.contains(f)) continue;
      kept.insert(kw.surface);
      ++taken;
    }
  }
  for (auto& kw : ranked)
    if (kept.contains(kw.surface)) out.keywords.push_back(std::move(kw));
  return out;
}

}  // namespace splcmap

#endif
