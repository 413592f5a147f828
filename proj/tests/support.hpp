// Generators and brute-force oracles shared by the unit tests and the
// acceptance runner. Nothing here calls into the code under test except to
// construct inputs.
#ifndef SPLCMAP_TESTS_SUPPORT_HPP
#define SPLCMAP_TESTS_SUPPORT_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "splcmap/concept_builder.hpp"
#include "splcmap/feature_model.hpp"
#include "splcmap/relationship_builder.hpp"

namespace splcmap::support {

using Rng = std::mt19937_64;

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

inline std::string fixture_dir() { return SPLCMAP_FIXTURE_DIR; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------
// Feature models
// ---------------------------------------------------------------------------

/// Random feature diagram with `n` features (root included) and up to
/// `max_constraints` cross-tree constraints. Names are F0..F{n-1} in
/// pre-order.
inline FeatureModel random_model(Rng& rng, std::size_t n, std::size_t max_constraints) {
  std::vector<std::size_t> parent(n, 0);
  for (std::size_t i = 1; i < n; ++i) parent[i] = uniform(rng, 0, i - 1);
  std::vector<std::vector<std::size_t>> kids(n);
  for (std::size_t i = 1; i < n; ++i) kids[parent[i]].push_back(i);

  // Variability per child, as runs: singles are mandatory/optional, runs of
  // two or more may become or/alt groups.
  std::vector<Variability> var(n, Variability::mandatory);
  for (std::size_t p = 0; p < n; ++p) {
    auto& ks = kids[p];
    std::size_t i = 0;
    while (i < ks.size()) {
      const std::size_t left = ks.size() - i;
      if (left >= 2 && coin(rng, 0.35)) {
        const std::size_t len = uniform(rng, 2, std::min<std::size_t>(left, 4));
        const auto v = coin(rng) ? Variability::or_member : Variability::alt_member;
        for (std::size_t k = 0; k < len; ++k) var[ks[i + k]] = v;
        i += len;
      } else {
        var[ks[i]] = coin(rng) ? Variability::mandatory : Variability::optional;
        ++i;
      }
    }
  }

  // Features must be listed in pre-order.
  std::vector<Feature> features;
  std::vector<std::size_t> order;
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    order.push_back(v);
    for (auto it = kids[v].rbegin(); it != kids[v].rend(); ++it) stack.push_back(*it);
  }
  std::vector<std::string> name(n);
  for (std::size_t i = 0; i < order.size(); ++i) name[order[i]] = "F" + std::to_string(i);
  std::vector<int> level(n, 0);
  for (std::size_t v : order)
    if (v != 0) level[v] = level[parent[v]] + 1;

  std::map<std::size_t, std::string> group_of;
  for (std::size_t p = 0; p < n; ++p) {
    int counter = 0;
    bool in_run = false;
    Variability prev = Variability::mandatory;
    std::string current;
    for (std::size_t k : kids[p]) {
      const bool grouped =
          var[k] == Variability::or_member || var[k] == Variability::alt_member;
      if (!grouped) {
        in_run = false;
        continue;
      }
      // Consecutive members of the same kind share a group, as in the text format.
      if (!in_run || prev != var[k]) {
        current = name[p] + (var[k] == Variability::or_member ? ".or" : ".alt") +
                  std::to_string(++counter);
      }
      in_run = true;
      prev = var[k];
      group_of[k] = current;
    }
  }

  for (std::size_t v : order) {
    Feature f;
    f.name = name[v];
    if (v != 0) f.parent = name[parent[v]];
    f.level = level[v];
    f.variability = v == 0 ? Variability::mandatory : var[v];
    if (group_of.contains(v)) f.group_id = group_of[v];
    features.push_back(std::move(f));
  }

  std::vector<CrossTreeConstraint> constraints;
  if (n >= 2) {
    const std::size_t k = uniform(rng, 0, max_constraints);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t a = uniform(rng, 0, n - 1);
      std::size_t b = uniform(rng, 0, n - 2);
      if (b >= a) ++b;
      constraints.push_back({coin(rng) ? ConstraintKind::require : ConstraintKind::exclude,
                             features[a].name, features[b].name});
    }
  }
  std::string spl = features.front().name;
  return FeatureModel(std::move(spl), std::move(features), std::move(constraints));
}

/// Counts valid products by testing every one of the 2^n feature subsets
/// against the diagram semantics and the constraints. n <= 24.
inline std::uint64_t brute_force_products(const FeatureModel& m) {
  const std::size_t n = m.size();
  std::vector<std::size_t> parent(n, 0);
  std::vector<std::uint32_t> mandatory_kids(n, 0);
  std::map<std::string, std::pair<std::uint32_t, bool>> groups;  // id -> (mask, is_alt)
  std::vector<std::vector<std::string>> groups_of(n);
  auto idx = [&](const std::string& s) { return *m.index_of(s); };
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = m.features()[i];
    if (!f.parent) continue;
    parent[i] = idx(*f.parent);
    if (f.variability == Variability::mandatory) mandatory_kids[parent[i]] |= 1u << i;
    if (f.group_id) {
      auto& g = groups[*f.group_id];
      g.first |= 1u << i;
      g.second = f.variability == Variability::alt_member;
      auto& list = groups_of[parent[i]];
      if (std::find(list.begin(), list.end(), *f.group_id) == list.end())
        list.push_back(*f.group_id);
    }
  }
  std::vector<std::tuple<bool, std::uint32_t, std::uint32_t>> cons;
  for (const auto& c : m.constraints())
    cons.emplace_back(c.kind == ConstraintKind::require, 1u << idx(c.lhs), 1u << idx(c.rhs));

  std::uint64_t count = 0;
  const std::uint32_t total = 1u << n;
  for (std::uint32_t s = 0; s < total; ++s) {
    if (!(s & 1u)) continue;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(s >> i & 1u)) continue;
      if (i != 0 && !(s >> parent[i] & 1u)) ok = false;
      if ((s & mandatory_kids[i]) != mandatory_kids[i]) ok = false;
      for (const auto& g : groups_of[i]) {
        const auto [mask, alt] = groups.at(g);
        const int picked = std::popcount(s & mask);
        if (alt ? picked != 1 : picked < 1) ok = false;
      }
    }
    for (const auto& [req, l, r] : cons) {
      if (!ok) break;
      if (req && (s & l) && !(s & r)) ok = false;
      if (!req && (s & l) && (s & r)) ok = false;
    }
    if (ok) ++count;
  }
  return count;
}

// ---------------------------------------------------------------------------
// Concepts
// ---------------------------------------------------------------------------

/// A concept whose statistics are set directly, bypassing members.
inline Concept synthetic_concept(std::string label, std::set<std::string> features,
                                 std::size_t occurrences = 1, std::size_t assets = 1,
                                 std::size_t kinds = 1) {
  Concept c;
  c.id = concept_id(label);
  c.label = std::move(label);
  c.features = std::move(features);
  c.occurrences = occurrences;
  for (std::size_t i = 0; i < assets; ++i) c.assets.insert("a" + std::to_string(i));
  const AssetKind all[] = {AssetKind::code, AssetKind::documentation, AssetKind::requirement};
  for (std::size_t i = 0; i < kinds && i < 3; ++i) c.asset_kinds.insert(all[i]);
  return c;
}

/// A concept carrying one member keyword, so member-driven refreshes keep
/// its feature set.
inline Concept member_concept(std::string label, const std::set<std::string>& features,
                              double relevance) {
  Keyword k;
  k.surface = label;
  k.norm = label;
  k.occurrences = 1;
  k.features = features;
  k.asset_occurrences["a.js"] = 1;
  k.asset_kinds = {AssetKind::code};
  Concept c;
  c.id = concept_id(label);
  c.label = std::move(label);
  c.members = {k};
  c.refresh();
  c.relevance = relevance;
  return c;
}

struct RuleOutcome {
  std::set<std::string> survivors;
  std::set<std::string> absorbed;
  std::set<std::tuple<std::string, std::string, Provenance>> edges;  // unordered pair
};

/// Applies the three pairwise rules literally over every ordered pair.
/// Equal sets: the pair member processed later is absorbed.
inline RuleOutcome relationship_oracle(const std::vector<Concept>& input,
                                       const FeatureModel& model) {
  std::vector<Concept> cs = input;
  std::sort(cs.begin(), cs.end(), [](const Concept& a, const Concept& b) {
    if (a.relevance != b.relevance) return a.relevance > b.relevance;
    if (a.label != b.label) return a.label < b.label;
    return a.id < b.id;
  });
  RuleOutcome out;
  const std::size_t n = cs.size();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t a = 0; a < n; ++a) {
      if (a == b) continue;
      const auto& sa = cs[a].features;
      const auto& sb = cs[b].features;
      const bool subset = std::includes(sa.begin(), sa.end(), sb.begin(), sb.end());
      if (subset && (sb.size() < sa.size() || a < b)) out.absorbed.insert(cs[b].id);
    }
  for (const auto& c : cs)
    if (!out.absorbed.contains(c.id)) out.survivors.insert(c.id);

  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      if (out.absorbed.contains(cs[a].id) || out.absorbed.contains(cs[b].id)) continue;
      std::vector<std::string> common;
      std::set_intersection(cs[a].features.begin(), cs[a].features.end(),
                            cs[b].features.begin(), cs[b].features.end(),
                            std::back_inserter(common));
      auto key = [&](Provenance p) {
        return std::make_tuple(std::min(cs[a].id, cs[b].id), std::max(cs[a].id, cs[b].id), p);
      };
      if (!common.empty()) {
        out.edges.insert(key(Provenance::intersection));
        continue;
      }
      bool dependent = false;
      for (const auto& fa : cs[a].features)
        for (const auto& fb : cs[b].features) {
          const auto ia = *model.index_of(fa);
          const auto ib = *model.index_of(fb);
          if (model.is_ancestor(ia, ib) || model.is_ancestor(ib, ia)) dependent = true;
          for (const auto& c : model.constraints())
            if ((c.lhs == fa && c.rhs == fb) || (c.lhs == fb && c.rhs == fa)) dependent = true;
        }
      if (dependent) out.edges.insert(key(Provenance::dependency));
    }
  return out;
}

inline RuleOutcome outcome_of(const RelationshipProposals& r) {
  RuleOutcome out;
  for (const auto& c : r.survivors) out.survivors.insert(c.id);
  for (const auto& p : r.proposals) {
    if (p.provenance == Provenance::subsume) {
      out.absorbed.insert(p.target);
    } else {
      out.edges.insert({std::min(p.source, p.target), std::max(p.source, p.target),
                        p.provenance});
    }
  }
  return out;
}

inline bool operator==(const RuleOutcome& a, const RuleOutcome& b) {
  return a.survivors == b.survivors && a.absorbed == b.absorbed && a.edges == b.edges;
}

/// Random concepts over the first `features` feature names of `model` (root
/// excluded), with distinct labels and relevance values drawn from a small
/// set so ties occur.
inline std::vector<Concept> random_concepts(Rng& rng, const FeatureModel& model,
                                            std::size_t count) {
  std::vector<std::string> names;
  for (const auto& f : model.features())
    if (f.parent) names.push_back(f.name);
  std::vector<Concept> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::set<std::string> fs;
    while (fs.empty())
      for (const auto& n : names)
        if (coin(rng, 0.35)) fs.insert(n);
    out.push_back(member_concept("K" + std::to_string(i), fs,
                                 static_cast<double>(uniform(rng, 1, 4)) / 4.0));
  }
  return out;
}

}  // namespace splcmap::support

#endif
