#ifndef SPLCMAP_RELATIONSHIP_BUILDER_HPP
#define SPLCMAP_RELATIONSHIP_BUILDER_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "splcmap/concept_builder.hpp"
#include "splcmap/curation.hpp"
#include "splcmap/error.hpp"
#include "splcmap/feature_model.hpp"

namespace splcmap {

enum class Provenance { subsume, intersection, dependency, curated };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::subsume: return "subsume";
    case Provenance::intersection: return "intersection";
    case Provenance::dependency: return "dependency";
    case Provenance::curated: return "curated";
  }
  return "?";
}

inline std::optional<Provenance> provenance_from_string(std::string_view s) {
  if (s == "subsume") return Provenance::subsume;
  if (s == "intersection") return Provenance::intersection;
  if (s == "dependency") return Provenance::dependency;
  if (s == "curated") return Provenance::curated;
  return std::nullopt;
}

/// A suggested link between two concept ids. For `subsume`, `target` is the
/// absorbed concept and `source` the survivor that holds its members.
struct EdgeProposal {
  std::string source;
  std::string target;
  Provenance provenance = Provenance::intersection;
  std::optional<std::string> label;
  bool directed = false;

  friend bool operator==(const EdgeProposal&, const EdgeProposal&) = default;
};

struct RelationshipProposals {
  std::vector<Concept> survivors;
  std::vector<EdgeProposal> proposals;
};

inline constexpr std::string_view default_edge_label = "related-to";

/// Relevance descending, then label; the order in which concept pairs are
/// considered.
inline bool processed_before(const Concept& a, const Concept& b) {
  if (a.relevance != b.relevance) return a.relevance > b.relevance;
  if (a.label != b.label) return a.label < b.label;
  return a.id < b.id;
}

namespace detail {

inline bool strict_subset(const std::set<std::string>& a,
                          const std::set<std::string>& b) {
  return a.size() < b.size() && std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline bool intersects(const std::set<std::string>& a,
                       const std::set<std::string>& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j) ++i; else ++j;
  }
  return false;
}

}  // namespace detail

/// Applies the feature-set rules to every concept pair:
///  - S_b a strict subset of S_a: C_b is absorbed into C_a;
///  - S_a == S_b: the concept processed later is absorbed;
///  - overlapping sets: undirected intersection proposal;
///  - disjoint sets with some dependent feature pair: dependency proposal.
/// Absorption follows chains to the final survivor. Concepts whose label is
/// in `pinned` are never absorbed. Survivors come back in processing order
/// with merged members; their relevance is left for the caller to refresh.
inline RelationshipProposals propose_relationships(
    std::vector<Concept> concepts, const FeatureModel& model,
    const std::set<std::string>& pinned = {}) {
  for (const auto& c : concepts)
    if (c.features.empty())
      throw Error("concept '" + c.label + "' has no traced features");
  std::sort(concepts.begin(), concepts.end(), processed_before);
  const std::size_t n = concepts.size();

  std::vector<std::optional<std::size_t>> absorber(n);
  for (std::size_t p = 0; p < n; ++p) {
    if (pinned.contains(concepts[p].label)) continue;
    for (std::size_t q = 0; q < n; ++q) {
      if (q == p) continue;
      const auto& sp = concepts[p].features;
      const auto& sq = concepts[q].features;
      if (detail::strict_subset(sp, sq) || (q < p && sp == sq)) {
        absorber[p] = q;
        break;
      }
    }
  }
  auto final_owner = [&](std::size_t p) {
    while (absorber[p]) p = *absorber[p];
    return p;
  };

  RelationshipProposals out;
  for (std::size_t p = 0; p < n; ++p) {
    if (!absorber[p]) continue;
    const std::size_t owner = final_owner(p);
    concepts[owner].add_members(concepts[p].members);
    concepts[owner].aliases.insert(concepts[p].aliases.begin(),
                                   concepts[p].aliases.end());
    out.proposals.push_back(
        {concepts[owner].id, concepts[p].id, Provenance::subsume, std::nullopt, false});
  }

  std::vector<std::size_t> alive;
  for (std::size_t p = 0; p < n; ++p)
    if (!absorber[p]) alive.push_back(p);

  for (std::size_t x = 0; x < alive.size(); ++x) {
    for (std::size_t y = x + 1; y < alive.size(); ++y) {
      const Concept& a = concepts[alive[x]];
      const Concept& b = concepts[alive[y]];
      if (detail::intersects(a.features, b.features)) {
        out.proposals.push_back({a.id, b.id, Provenance::intersection, std::nullopt, false});
        continue;
      }
      bool dependent = false;
      for (const auto& fa : a.features) {
        for (const auto& fb : b.features)
          if (model.contains(fa) && model.contains(fb) &&
              features_dependent(model, fa, fb) == Dependency::dependent) {
            dependent = true;
            break;
          }
        if (dependent) break;
      }
      if (dependent)
        out.proposals.push_back({a.id, b.id, Provenance::dependency, std::nullopt, false});
    }
  }

  for (std::size_t p : alive) out.survivors.push_back(std::move(concepts[p]));
  return out;
}

// ---------------------------------------------------------------------------
// Edge curation
// ---------------------------------------------------------------------------

struct Edge {
  std::string source;
  std::string target;
  std::string label;
  bool directed = false;
  Provenance provenance = Provenance::intersection;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Turns proposals into the final edge list. Subsumption records are not
/// edges. Uncurated proposals become undirected `related-to` links;
/// `remove`, `relabel` and `add` entries refer to concepts by label (or
/// alias). Undirected edges are stored with source < target.
inline std::vector<Edge> apply_edge_curation(const std::vector<EdgeProposal>& proposals,
                                             const EdgeCuration& curation,
                                             const std::vector<Concept>& concepts) {
  std::map<std::string, std::string> id_of;
  for (const auto& c : concepts) {
    for (const auto& a : c.aliases) id_of.emplace(a, c.id);
  }
  for (const auto& c : concepts) id_of[c.label] = c.id;

  std::vector<std::string> unknown;
  auto resolve = [&](const std::string& label) -> std::string {
    auto it = id_of.find(label);
    if (it == id_of.end()) {
      unknown.push_back(label);
      return {};
    }
    return it->second;
  };
  struct ResolvedEdit {
    const EdgeEdit* edit;
    std::string source;
    std::string target;
  };
  auto resolve_all = [&](const std::vector<EdgeEdit>& edits) {
    std::vector<ResolvedEdit> out;
    for (const auto& e : edits) out.push_back({&e, resolve(e.source), resolve(e.target)});
    return out;
  };
  const auto removals = resolve_all(curation.remove);
  const auto relabels = resolve_all(curation.relabel);
  const auto additions = resolve_all(curation.add);
  if (!unknown.empty())
    throw Error("edge curation references unknown concepts: " + join(unknown, ", "));

  std::vector<Edge> edges;
  auto normalize = [](Edge& e) {
    if (!e.directed && e.target < e.source) std::swap(e.source, e.target);
  };
  auto find_pair = [&](const std::string& a, const std::string& b) {
    return std::find_if(edges.begin(), edges.end(), [&](const Edge& e) {
      return (e.source == a && e.target == b) || (e.source == b && e.target == a);
    });
  };

  for (const auto& p : proposals) {
    if (p.provenance == Provenance::subsume) continue;
    if (p.source == p.target) throw Error("proposal links '" + p.source + "' to itself");
    if (find_pair(p.source, p.target) != edges.end())
      throw Error("duplicate proposal between '" + p.source + "' and '" + p.target + "'");
    Edge e{p.source, p.target, p.label.value_or(std::string(default_edge_label)),
           p.directed, p.provenance};
    normalize(e);
    edges.push_back(std::move(e));
  }

  for (const auto& r : removals) {
    auto it = find_pair(r.source, r.target);
    if (it == edges.end())
      throw Error("no edge between '" + r.edit->source + "' and '" + r.edit->target +
                  "' to remove");
    edges.erase(it);
  }
  for (const auto& r : relabels) {
    auto it = find_pair(r.source, r.target);
    if (it == edges.end())
      throw Error("no edge between '" + r.edit->source + "' and '" + r.edit->target +
                  "' to relabel");
    if (!r.edit->label.empty()) it->label = r.edit->label;
    it->directed = r.edit->directed;
    it->source = r.source;
    it->target = r.target;
    normalize(*it);
  }
  for (const auto& r : additions) {
    if (r.source == r.target)
      throw Error("edge curation links '" + r.edit->source + "' to itself");
    if (find_pair(r.source, r.target) != edges.end())
      throw Error("duplicate edge between '" + r.edit->source + "' and '" +
                  r.edit->target + "'");
    Edge e{r.source, r.target,
           r.edit->label.empty() ? std::string(default_edge_label) : r.edit->label,
           r.edit->directed, Provenance::curated};
    normalize(e);
    edges.push_back(std::move(e));
  }

  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.source, a.target) < std::tie(b.source, b.target);
  });
  return edges;
}

}  // namespace splcmap

#endif
