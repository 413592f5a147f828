#ifndef SPLCMAP_CONCEPT_BUILDER_HPP
#define SPLCMAP_CONCEPT_BUILDER_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "splcmap/curation.hpp"
#include "splcmap/error.hpp"
#include "splcmap/feature_model.hpp"
#include "splcmap/lexicon.hpp"
#include "splcmap/text.hpp"

namespace splcmap {

struct Concept {
  std::string id;
  std::string label;
  std::vector<Keyword> members;  // sorted by surface, surfaces unique
  std::size_t occurrences = 0;
  std::set<std::string> features;
  std::set<std::string> assets;
  std::set<AssetKind> asset_kinds;
  int level = 0;
  double relevance = 0.0;
  std::optional<std::string> definition;
  /// Labels this concept absorbed through curation merges or renames.
  std::set<std::string> aliases;
  /// Kept by an earlier level; exempt from a later `select`.
  bool carried = false;

  /// Recomputes the trace statistics from the member keywords.
  void refresh() {
    std::sort(members.begin(), members.end(),
              [](const Keyword& a, const Keyword& b) { return a.surface < b.surface; });
    occurrences = 0;
    features.clear();
    assets.clear();
    asset_kinds.clear();
    for (const auto& k : members) {
      occurrences += k.occurrences;
      features.insert(k.features.begin(), k.features.end());
      for (const auto& [path, n] : k.asset_occurrences) assets.insert(path);
      asset_kinds.insert(k.asset_kinds.begin(), k.asset_kinds.end());
    }
  }

  /// Adds keywords, folding those whose surface is already a member.
  void add_members(const std::vector<Keyword>& keywords) {
    for (const auto& k : keywords) {
      auto it = std::find_if(members.begin(), members.end(),
                             [&](const Keyword& m) { return m.surface == k.surface; });
      if (it == members.end()) {
        members.push_back(k);
      } else {
        it->absorb(k);
      }
    }
    refresh();
  }

  bool has_member(std::string_view surface) const {
    return std::any_of(members.begin(), members.end(),
                       [&](const Keyword& m) { return m.surface == surface; });
  }

  friend bool operator==(const Concept&, const Concept&) = default;
};

/// Identifier derived from a label: `c_` + lowercase, non-alphanumerics
/// replaced by `_`.
inline std::string concept_id(std::string_view label) {
  std::string id = "c_";
  for (char c : to_lower(label)) id += is_alnum(c) ? c : '_';
  return id;
}

/// Most frequent member surface; ties go to the lexicographically smallest.
inline std::string majority_label(const std::vector<Keyword>& members) {
  const Keyword* best = nullptr;
  for (const auto& k : members)
    if (!best || k.occurrences > best->occurrences ||
        (k.occurrences == best->occurrences && k.surface < best->surface))
      best = &k;
  return best ? best->surface : std::string{};
}

/// Level of the shallowest traced feature.
inline void assign_level(Concept& c, const FeatureModel& model) {
  int level = std::numeric_limits<int>::max();
  for (const auto& f : c.features)
    if (const auto idx = model.index_of(f))
      level = std::min(level, model.features()[*idx].level);
  c.level = level == std::numeric_limits<int>::max() ? 0 : level;
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

inline constexpr double default_similarity_threshold = 0.6;

namespace detail {

inline constexpr double similarity_epsilon = 1e-12;

inline double cosine(const std::map<std::string, double>& a,
                     const std::map<std::string, double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (const auto& [k, v] : a) {
    na += v * v;
    auto it = b.find(k);
    if (it != b.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : b) nb += v * v;
  if (na == 0 || nb == 0) return 0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace detail

/// Groups keywords into concepts: keywords with equal normal form are merged
/// first, then average-link agglomerative clustering over per-asset term
/// frequency vectors merges while the best cosine similarity is >= `tau`.
/// Ties prefer the pair with more combined occurrences, then the smaller
/// label pair.
inline std::vector<Concept> cluster_keywords(const std::vector<Keyword>& keywords,
                                             double tau = default_similarity_threshold) {
  if (!(tau > 0.0 && tau <= 1.0))
    throw Error("similarity threshold must lie in (0, 1]");

  std::map<std::string, std::vector<Keyword>> by_norm;
  for (const auto& k : keywords) {
    auto& group = by_norm[normalize_keyword(k.surface)];
    auto it = std::find_if(group.begin(), group.end(),
                           [&](const Keyword& g) { return g.surface == k.surface; });
    if (it == group.end()) {
      group.push_back(k);
    } else {
      it->absorb(k);
    }
  }

  struct Cluster {
    std::vector<Keyword> members;
    std::size_t groups = 1;
    std::size_t occurrences = 0;
    std::string label;
    bool active = true;
  };
  std::vector<Cluster> clusters;
  std::vector<std::map<std::string, double>> vectors;
  for (auto& [norm, group] : by_norm) {
    Cluster c;
    std::map<std::string, double> v;
    for (auto& k : group) {
      k.norm = norm;
      c.occurrences += k.occurrences;
      for (const auto& [path, n] : k.asset_occurrences) v[path] += static_cast<double>(n);
    }
    c.members = std::move(group);
    c.label = majority_label(c.members);
    clusters.push_back(std::move(c));
    vectors.push_back(std::move(v));
  }

  const std::size_t n = clusters.size();
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      sim[i][j] = sim[j][i] = detail::cosine(vectors[i], vectors[j]);

  auto pair_label = [&](std::size_t i, std::size_t j) {
    const auto& a = clusters[i].label;
    const auto& b = clusters[j].label;
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  };

  for (;;) {
    std::optional<std::pair<std::size_t, std::size_t>> best;
    for (std::size_t i = 0; i < n; ++i) {
      if (!clusters[i].active) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!clusters[j].active) continue;
        if (!best) {
          best = {i, j};
          continue;
        }
        const auto [bi, bj] = *best;
        const double s = sim[i][j];
        const double bs = sim[bi][bj];
        if (s > bs + detail::similarity_epsilon) {
          best = {i, j};
        } else if (std::abs(s - bs) <= detail::similarity_epsilon) {
          const std::size_t occ = clusters[i].occurrences + clusters[j].occurrences;
          const std::size_t bocc = clusters[bi].occurrences + clusters[bj].occurrences;
          if (occ > bocc || (occ == bocc && pair_label(i, j) < pair_label(bi, bj)))
            best = {i, j};
        }
      }
    }
    if (!best || sim[best->first][best->second] < tau - detail::similarity_epsilon)
      break;

    const auto [a, b] = *best;
    const double wa = static_cast<double>(clusters[a].groups);
    const double wb = static_cast<double>(clusters[b].groups);
    for (std::size_t k = 0; k < n; ++k) {
      if (!clusters[k].active || k == a || k == b) continue;
      sim[a][k] = sim[k][a] = (wa * sim[a][k] + wb * sim[b][k]) / (wa + wb);
    }
    auto& into = clusters[a];
    auto& from = clusters[b];
    into.members.insert(into.members.end(), from.members.begin(), from.members.end());
    into.groups += from.groups;
    into.occurrences += from.occurrences;
    into.label = majority_label(into.members);
    from.active = false;
    from.members.clear();
  }

  std::vector<Concept> concepts;
  for (auto& c : clusters) {
    if (!c.active) continue;
    Concept out;
    out.label = c.label;
    out.id = concept_id(c.label);
    out.members = std::move(c.members);
    out.refresh();
    concepts.push_back(std::move(out));
  }
  std::sort(concepts.begin(), concepts.end(),
            [](const Concept& a, const Concept& b) { return a.label < b.label; });
  return concepts;
}

// ---------------------------------------------------------------------------
// Relevance
// ---------------------------------------------------------------------------

/// C, F, A and AT: concept, feature, core asset and asset-kind totals.
struct CorpusStats {
  std::size_t concepts = 0;
  std::size_t features = 0;
  std::size_t assets = 0;
  std::size_t asset_kinds = 0;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// rv = occurrences/C * f/F * a/A * at/AT.
inline double relevance(const Concept& c, const CorpusStats& stats) {
  if (stats.concepts == 0 || stats.features == 0 || stats.assets == 0 ||
      stats.asset_kinds == 0)
    throw Error("empty corpus statistics");
  if (c.occurrences == 0 || c.features.empty() || c.assets.empty() ||
      c.asset_kinds.empty())
    throw Error("concept '" + c.label + "' carries no trace information");
  // One division of two exact integer products: equal ratios give equal
  // doubles, so ties survive any common scaling of the denominators.
  const double num = static_cast<double>(c.occurrences) *
                     static_cast<double>(c.features.size()) *
                     static_cast<double>(c.assets.size()) *
                     static_cast<double>(c.asset_kinds.size());
  const double den = static_cast<double>(stats.concepts) * static_cast<double>(stats.features) *
                     static_cast<double>(stats.assets) * static_cast<double>(stats.asset_kinds);
  return num / den;
}

/// Relevance descending, then occurrences descending, then label.
inline bool ranks_before(const Concept& a, const Concept& b) {
  if (a.relevance != b.relevance) return a.relevance > b.relevance;
  if (a.occurrences != b.occurrences) return a.occurrences > b.occurrences;
  if (a.label != b.label) return a.label < b.label;
  return a.id < b.id;
}

inline std::vector<Concept> rank_concepts(std::vector<Concept> concepts,
                                          const CorpusStats& stats) {
  for (auto& c : concepts) c.relevance = relevance(c, stats);
  std::sort(concepts.begin(), concepts.end(), ranks_before);
  return concepts;
}

// ---------------------------------------------------------------------------
// Curation
// ---------------------------------------------------------------------------

namespace detail {

inline std::optional<std::size_t> find_label(const std::vector<Concept>& concepts,
                                             std::string_view label) {
  for (std::size_t i = 0; i < concepts.size(); ++i)
    if (concepts[i].label == label) return i;
  for (std::size_t i = 0; i < concepts.size(); ++i)
    if (concepts[i].aliases.contains(std::string(label))) return i;
  return std::nullopt;
}

}  // namespace detail

/// Applies merge, rename, drop and select in that order, then attaches
/// definitions and recomputes relevance. Labels absorbed by a merge or
/// replaced by a rename stay resolvable as aliases, so applying the same
/// curation twice changes nothing. A dropped label that is already absent
/// is ignored.
inline std::vector<Concept> apply_curation(std::vector<Concept> concepts,
                                           const Curation& curation,
                                           const CorpusStats& stats) {
  std::vector<std::string> unknown;

  for (const auto& group : curation.merge) {
    std::vector<std::size_t> idx;
    for (const auto& label : group) {
      if (auto i = detail::find_label(concepts, label)) {
        if (std::find(idx.begin(), idx.end(), *i) == idx.end()) idx.push_back(*i);
      } else {
        unknown.push_back(label);
      }
    }
    if (idx.size() < 2) continue;
    Concept& keep = concepts[idx.front()];
    for (std::size_t k = 1; k < idx.size(); ++k) {
      Concept& gone = concepts[idx[k]];
      keep.add_members(gone.members);
      keep.aliases.insert(gone.label);
      keep.aliases.insert(gone.aliases.begin(), gone.aliases.end());
      keep.carried = keep.carried || gone.carried;
      if (!keep.definition) keep.definition = gone.definition;
      gone.label.clear();
      gone.members.clear();
    }
    if (keep.label != group.front()) {
      keep.aliases.insert(keep.label);
      keep.label = group.front();
    }
    keep.aliases.erase(keep.label);
    std::erase_if(concepts, [](const Concept& c) { return c.members.empty(); });
  }
  if (!unknown.empty())
    throw Error("curation merges unknown concepts: " + join(unknown, ", "));

  for (const auto& [from, to] : curation.rename) {
    auto i = detail::find_label(concepts, from);
    if (!i) {
      unknown.push_back(from);
      continue;
    }
    if (auto clash = detail::find_label(concepts, to); clash && *clash != *i)
      throw Error("curation renames '" + from + "' onto existing concept '" + to + "'");
    Concept& c = concepts[*i];
    if (c.label != to) {
      c.aliases.insert(c.label);
      c.label = to;
    }
    c.aliases.erase(to);
  }
  if (!unknown.empty())
    throw Error("curation renames unknown concepts: " + join(unknown, ", "));

  std::set<std::string> dropped(curation.drop.begin(), curation.drop.end());
  std::erase_if(concepts, [&](const Concept& c) { return dropped.contains(c.label); });

  if (curation.select) {
    std::set<std::size_t> keep;
    std::vector<std::string> dropped_selected;
    for (const auto& label : *curation.select) {
      if (dropped.contains(label)) {
        dropped_selected.push_back(label);
      } else if (auto i = detail::find_label(concepts, label)) {
        keep.insert(*i);
      } else {
        unknown.push_back(label);
      }
    }
    if (!dropped_selected.empty())
      throw Error("curation selects dropped concepts: " + join(dropped_selected, ", "));
    if (!unknown.empty())
      throw Error("curation selects unknown concepts: " + join(unknown, ", "));
    std::vector<Concept> kept;
    for (std::size_t i = 0; i < concepts.size(); ++i)
      if (keep.contains(i) || concepts[i].carried) kept.push_back(std::move(concepts[i]));
    concepts = std::move(kept);
  }

  for (const auto& [label, text] : curation.definitions) {
    if (auto i = detail::find_label(concepts, label)) {
      concepts[*i].definition = text;
    } else {
      unknown.push_back(label);
    }
  }
  if (!unknown.empty())
    throw Error("curation defines unknown concepts: " + join(unknown, ", "));

  return rank_concepts(std::move(concepts), stats);
}

/// The part of `curation` whose concept references resolve against
/// `concepts`. Every label that resolved is added to `resolved`. Used to
/// replay one curation file across levels, where later concepts do not
/// exist yet.
inline Curation resolvable_curation(const Curation& curation,
                                    const std::vector<Concept>& concepts,
                                    std::set<std::string>& resolved) {
  auto exists = [&](const std::string& label) {
    if (!detail::find_label(concepts, label)) return false;
    resolved.insert(label);
    return true;
  };
  Curation out;
  for (const auto& group : curation.merge) {
    std::vector<std::string> present;
    for (const auto& label : group)
      if (exists(label)) present.push_back(label);
    if (present.size() >= 2) out.merge.push_back(std::move(present));
  }
  // Rename targets resolve through the renamed concept.
  std::set<std::string> renamed_to;
  for (const auto& [from, to] : curation.rename)
    if (exists(from)) {
      out.rename.emplace(from, to);
      renamed_to.insert(to);
    }
  for (const auto& label : curation.drop) {
    resolved.insert(label);
    out.drop.push_back(label);
  }
  auto exists_after_rename = [&](const std::string& label) {
    if (renamed_to.contains(label)) {
      resolved.insert(label);
      return true;
    }
    return exists(label);
  };
  if (curation.select) {
    out.select.emplace();
    for (const auto& label : *curation.select)
      if (exists_after_rename(label)) out.select->push_back(label);
  }
  for (const auto& [label, text] : curation.definitions)
    if (exists_after_rename(label)) out.definitions.emplace(label, text);
  return out;
}

}  // namespace splcmap

#endif
