#ifndef SPLCMAP_FEATURE_MODEL_HPP
#define SPLCMAP_FEATURE_MODEL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "splcmap/error.hpp"
#include "splcmap/text.hpp"

namespace splcmap {

enum class Variability { mandatory, optional, or_member, alt_member };

inline const char* to_string(Variability v) {
  switch (v) {
    case Variability::mandatory: return "mandatory";
    case Variability::optional: return "optional";
    case Variability::or_member: return "or_member";
    case Variability::alt_member: return "alt_member";
  }
  return "?";
}

inline std::optional<Variability> variability_from_string(std::string_view s) {
  if (s == "mandatory") return Variability::mandatory;
  if (s == "optional") return Variability::optional;
  if (s == "or_member") return Variability::or_member;
  if (s == "alt_member") return Variability::alt_member;
  return std::nullopt;
}

struct Feature {
  std::string name;
  std::optional<std::string> parent;
  int level = 0;
  Variability variability = Variability::mandatory;
  std::optional<std::string> group_id;

  bool is_variable() const { return variability != Variability::mandatory; }

  friend bool operator==(const Feature&, const Feature&) = default;
};

enum class ConstraintKind { require, exclude };

inline const char* to_string(ConstraintKind k) {
  return k == ConstraintKind::require ? "requires" : "excludes";
}

struct CrossTreeConstraint {
  ConstraintKind kind = ConstraintKind::require;
  std::string lhs;
  std::string rhs;

  friend bool operator==(const CrossTreeConstraint&,
                         const CrossTreeConstraint&) = default;
};

/// A validated feature diagram. Features are kept in pre-order with the root
/// first; the object is immutable after construction.
class FeatureModel {
 public:
  FeatureModel(std::string spl_name, std::vector<Feature> features,
               std::vector<CrossTreeConstraint> constraints)
      : spl_name_(std::move(spl_name)),
        features_(std::move(features)),
        constraints_(std::move(constraints)) {
    validate();
  }

  const std::string& spl_name() const { return spl_name_; }
  const Feature& root() const { return features_.front(); }
  std::span<const Feature> features() const { return features_; }
  const std::vector<CrossTreeConstraint>& constraints() const {
    return constraints_;
  }
  std::size_t size() const { return features_.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(std::string_view name) const { return index_.contains(name); }

  const Feature& at(std::string_view name) const {
    auto idx = index_of(name);
    if (!idx) throw Error("unknown feature '" + std::string(name) + "'");
    return features_[*idx];
  }

  /// Parent index per feature; the root maps to itself.
  std::size_t parent_index(std::size_t i) const { return parents_[i]; }
  const std::vector<std::size_t>& children(std::size_t i) const {
    return children_[i];
  }

  /// True when `ancestor` lies strictly above `descendant` in the tree.
  bool is_ancestor(std::size_t ancestor, std::size_t descendant) const {
    while (descendant != 0) {
      descendant = parents_[descendant];
      if (descendant == ancestor) return true;
    }
    return false;
  }

  int max_level() const {
    int level = 0;
    for (const auto& f : features_) level = std::max(level, f.level);
    return level;
  }

  friend bool operator==(const FeatureModel& a, const FeatureModel& b) {
    return a.spl_name_ == b.spl_name_ && a.features_ == b.features_ &&
           a.constraints_ == b.constraints_;
  }

 private:
  void validate() {
    if (features_.empty()) throw Error("feature model has no root");
    const Feature& r = features_.front();
    if (r.parent || r.level != 0 || r.group_id)
      throw Error("root feature must have level 0, no parent and no group");
    parents_.assign(features_.size(), 0);
    children_.assign(features_.size(), {});
    std::map<std::string, std::size_t, std::less<>> group_sizes;
    std::map<std::string, std::tuple<std::string, Variability>, std::less<>>
        group_shape;
    for (std::size_t i = 0; i < features_.size(); ++i) {
      const Feature& f = features_[i];
      if (!index_.emplace(f.name, i).second)
        throw Error("duplicate feature name '" + f.name + "'");
      if (i == 0) continue;
      if (!f.parent) throw Error("feature '" + f.name + "' has no parent");
      auto p = index_.find(*f.parent);
      if (p == index_.end())
        throw Error("parent of '" + f.name + "' must precede it");
      if (f.level != features_[p->second].level + 1)
        throw Error("feature '" + f.name + "' has an inconsistent level");
      parents_[i] = p->second;
      children_[p->second].push_back(i);
      const bool grouped = f.variability == Variability::or_member ||
                           f.variability == Variability::alt_member;
      if (grouped != f.group_id.has_value())
        throw Error("feature '" + f.name +
                    "': group membership does not match its variability");
      if (grouped) {
        ++group_sizes[*f.group_id];
        auto shape = std::make_tuple(*f.parent, f.variability);
        auto [it, fresh] = group_shape.emplace(*f.group_id, shape);
        if (!fresh && it->second != shape)
          throw Error("group '" + *f.group_id + "' mixes parents or kinds");
      }
    }
    for (const auto& [group, count] : group_sizes)
      if (count < 2) throw Error("group '" + group + "' has a single member");
    for (const auto& c : constraints_) {
      if (!contains(c.lhs) || !contains(c.rhs))
        throw Error("constraint references unknown feature: " + c.lhs + " " +
                    to_string(c.kind) + " " + c.rhs);
      if (c.lhs == c.rhs)
        throw Error("constraint relates '" + c.lhs + "' to itself");
    }
  }

  std::string spl_name_;
  std::vector<Feature> features_;
  std::vector<CrossTreeConstraint> constraints_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::size_t> parents_;
  std::vector<std::vector<std::size_t>> children_;
};

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

namespace detail {

inline char marker_for(Variability v) {
  switch (v) {
    case Variability::mandatory: return '!';
    case Variability::optional: return '?';
    case Variability::or_member: return '*';
    case Variability::alt_member: return '^';
  }
  return '!';
}

inline std::optional<Variability> variability_for(char marker) {
  switch (marker) {
    case '!': return Variability::mandatory;
    case '?': return Variability::optional;
    case '*': return Variability::or_member;
    case '^': return Variability::alt_member;
    default: return std::nullopt;
  }
}

}  // namespace detail

/// Parses the indentation-based feature-model format:
///
///     WACline
///       !AnnotationServer
///       ?ImportExport
///         ^Csv
///         ^Json
///     ---
///     Json requires AnnotationServer
///
/// Two spaces per level; `!` mandatory, `?` optional, `*` or-group member,
/// `^` alternative-group member. Consecutive siblings carrying the same group
/// marker form one group. `#` lines are comments.
inline FeatureModel parse_feature_model(std::string_view text) {
  std::vector<Feature> features;
  std::vector<CrossTreeConstraint> constraints;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::vector<std::size_t> line_of;
  // Per feature index: last child index and group counters.
  std::vector<std::optional<std::size_t>> last_child;
  std::vector<int> groups_opened;
  std::vector<std::size_t> stack;  // feature index per depth
  bool in_constraints = false;

  const auto lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::size_t line_no = n + 1;
    std::string_view raw = lines[n];
    std::string_view body = trim(raw);
    if (body.empty() || body.front() == '#') continue;

    if (body == "---") {
      if (features.empty()) throw ParseError("constraints before root", line_no);
      in_constraints = true;
      continue;
    }

    if (in_constraints) {
      auto words = split_whitespace(body);
      if (words.size() != 3)
        throw ParseError("constraint must read '<name> requires|excludes <name>'",
                         line_no);
      CrossTreeConstraint c;
      if (words[1] == "requires") {
        c.kind = ConstraintKind::require;
      } else if (words[1] == "excludes") {
        c.kind = ConstraintKind::exclude;
      } else {
        throw ParseError("unknown constraint kind '" + words[1] + "'", line_no);
      }
      c.lhs = words[0];
      c.rhs = words[2];
      for (const auto& name : {c.lhs, c.rhs})
        if (!seen.contains(name))
          throw ParseError("constraint references unknown feature '" + name + "'",
                           line_no);
      if (c.lhs == c.rhs)
        throw ParseError("constraint relates '" + c.lhs + "' to itself", line_no);
      constraints.push_back(std::move(c));
      continue;
    }

    std::size_t indent = 0;
    while (indent < raw.size() && (raw[indent] == ' ' || raw[indent] == '\t')) {
      if (raw[indent] == '\t') throw ParseError("tab in indentation", line_no);
      ++indent;
    }
    if (indent % 2 != 0) throw ParseError("odd indentation", line_no);
    const std::size_t depth = indent / 2;

    if (features.empty()) {
      if (depth != 0) throw ParseError("root must not be indented", line_no);
      std::string name(body);
      if (!is_identifier(name))
        throw ParseError("invalid feature name '" + name + "'", line_no);
      features.push_back(Feature{name, std::nullopt, 0, Variability::mandatory,
                                 std::nullopt});
      seen.emplace(name, 0);
      line_of.push_back(line_no);
      last_child.emplace_back();
      groups_opened.push_back(0);
      stack.assign(1, 0);
      continue;
    }

    if (depth == 0) throw ParseError("a model has exactly one root", line_no);
    if (depth > stack.size())
      throw ParseError("indentation jump (more than one level deeper)", line_no);
    stack.resize(depth);

    auto variability = detail::variability_for(body.front());
    if (!variability) throw ParseError("missing variability marker", line_no);
    std::string name(trim(body.substr(1)));
    if (!is_identifier(name))
      throw ParseError("invalid feature name '" + name + "'", line_no);
    if (seen.contains(name))
      throw ParseError("duplicate feature name '" + name + "'", line_no);

    const std::size_t parent = stack.back();
    Feature f{name, features[parent].name, features[parent].level + 1,
              *variability, std::nullopt};
    if (*variability == Variability::or_member ||
        *variability == Variability::alt_member) {
      const auto prev = last_child[parent];
      if (prev && features[*prev].variability == *variability) {
        f.group_id = features[*prev].group_id;
      } else {
        const char* tag = *variability == Variability::or_member ? "or" : "alt";
        f.group_id = features[parent].name + "." + tag +
                     std::to_string(++groups_opened[parent]);
      }
    }

    const std::size_t idx = features.size();
    features.push_back(std::move(f));
    seen.emplace(name, idx);
    line_of.push_back(line_no);
    last_child.emplace_back();
    groups_opened.push_back(0);
    last_child[parent] = idx;
    stack.push_back(idx);
  }

  if (features.empty()) throw ParseError("empty feature model", 0);

  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < features.size(); ++i)
    if (features[i].group_id) members[*features[i].group_id].push_back(i);
  for (const auto& [group, idx] : members)
    if (idx.size() < 2)
      throw ParseError("group with a single member ('" +
                           features[idx.front()].name + "')",
                       line_of[idx.front()]);

  std::string spl_name = features.front().name;
  return FeatureModel(std::move(spl_name), std::move(features),
                      std::move(constraints));
}

inline std::string serialize_feature_model(const FeatureModel& model) {
  std::string out;
  for (const auto& f : model.features()) {
    if (!f.parent) {
      out += f.name;
    } else {
      out.append(static_cast<std::size_t>(f.level) * 2, ' ');
      out += detail::marker_for(f.variability);
      out += f.name;
    }
    out += '\n';
  }
  if (!model.constraints().empty()) {
    out += "---\n";
    for (const auto& c : model.constraints())
      out += c.lhs + " " + to_string(c.kind) + " " + c.rhs + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Traversal planning
// ---------------------------------------------------------------------------

enum class Phase { mandatory, variable };

inline const char* to_string(Phase p) {
  return p == Phase::mandatory ? "mandatory" : "variable";
}

struct TraversalBatch {
  int level = 0;
  Phase phase = Phase::mandatory;
  std::vector<std::string> features;

  friend bool operator==(const TraversalBatch&, const TraversalBatch&) = default;
};

struct TraversalPlan {
  std::vector<TraversalBatch> batches;

  friend bool operator==(const TraversalPlan&, const TraversalPlan&) = default;
};

/// Level by level, mandatory features first, then optional and group members.
inline TraversalPlan traversal_plan(const FeatureModel& model) {
  std::map<std::pair<int, Phase>, std::vector<std::string>> buckets;
  for (const auto& f : model.features()) {
    if (!f.parent) continue;
    const Phase phase = f.is_variable() ? Phase::variable : Phase::mandatory;
    buckets[{f.level, phase}].push_back(f.name);
  }
  TraversalPlan plan;
  for (auto& [key, names] : buckets) {
    std::sort(names.begin(), names.end());
    plan.batches.push_back({key.first, key.second, std::move(names)});
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Product counting
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t default_product_cap = std::uint64_t{1} << 22;

struct ProductCount {
  bool exceeds_cap = false;
  std::uint64_t value = 0;

  friend bool operator==(const ProductCount&, const ProductCount&) = default;
};

namespace detail {

inline constexpr std::uint64_t saturated = UINT64_MAX;

inline std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  return __builtin_add_overflow(a, b, &r) ? saturated : r;
}

inline std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  return __builtin_mul_overflow(a, b, &r) ? saturated : r;
}

enum class UnitKind { mandatory, optional, or_group, alt_group };

/// One independent decision taken when a parent feature is selected.
struct ChildUnit {
  UnitKind kind;
  std::vector<std::size_t> members;
};

inline std::vector<std::vector<ChildUnit>> child_units(const FeatureModel& m) {
  std::vector<std::vector<ChildUnit>> units(m.size());
  const auto features = m.features();
  for (std::size_t p = 0; p < m.size(); ++p) {
    std::map<std::string, std::size_t> group_slot;
    for (std::size_t c : m.children(p)) {
      const Feature& f = features[c];
      switch (f.variability) {
        case Variability::mandatory:
          units[p].push_back({UnitKind::mandatory, {c}});
          break;
        case Variability::optional:
          units[p].push_back({UnitKind::optional, {c}});
          break;
        case Variability::or_member:
        case Variability::alt_member: {
          auto [it, fresh] = group_slot.emplace(*f.group_id, units[p].size());
          if (fresh)
            units[p].push_back({f.variability == Variability::or_member
                                    ? UnitKind::or_group
                                    : UnitKind::alt_group,
                                {}});
          units[p][it->second].members.push_back(c);
          break;
        }
      }
    }
  }
  return units;
}

/// Configurations admitted by tree semantics alone, saturating at UINT64_MAX.
inline std::uint64_t tree_configurations(
    const std::vector<std::vector<ChildUnit>>& units, std::size_t feature) {
  std::uint64_t total = 1;
  for (const auto& u : units[feature]) {
    std::uint64_t factor = 0;
    switch (u.kind) {
      case UnitKind::mandatory:
        factor = tree_configurations(units, u.members[0]);
        break;
      case UnitKind::optional:
        factor = sat_add(tree_configurations(units, u.members[0]), 1);
        break;
      case UnitKind::alt_group:
        for (std::size_t m : u.members)
          factor = sat_add(factor, tree_configurations(units, m));
        break;
      case UnitKind::or_group: {
        std::uint64_t prod = 1;
        for (std::size_t m : u.members)
          prod = sat_mul(prod, sat_add(tree_configurations(units, m), 1));
        factor = prod == saturated ? saturated : prod - 1;
        break;
      }
    }
    total = sat_mul(total, factor);
  }
  return total;
}

/// Walks every tree-valid configuration and counts those passing the
/// cross-tree constraints.
class ConfigurationWalker {
 public:
  ConfigurationWalker(const FeatureModel& model,
                      std::vector<std::vector<ChildUnit>> units)
      : units_(std::move(units)), selected_(model.size(), 0) {
    for (const auto& c : model.constraints())
      constraints_.push_back({c.kind, *model.index_of(c.lhs),
                              *model.index_of(c.rhs)});
  }

  std::uint64_t run() {
    selected_[0] = 1;
    std::vector<std::size_t> open{0};
    expand(open);
    return count_;
  }

 private:
  struct IndexedConstraint {
    ConstraintKind kind;
    std::size_t lhs;
    std::size_t rhs;
  };

  void expand(std::vector<std::size_t> open) {
    if (open.empty()) {
      if (satisfies_constraints()) ++count_;
      return;
    }
    const std::size_t parent = open.back();
    open.pop_back();
    choose(units_[parent], 0, open);
  }

  void choose(const std::vector<ChildUnit>& units, std::size_t u,
              std::vector<std::size_t>& open) {
    if (u == units.size()) {
      expand(open);
      return;
    }
    const ChildUnit& unit = units[u];
    switch (unit.kind) {
      case UnitKind::mandatory:
        with_selected({unit.members[0]}, units, u, open);
        break;
      case UnitKind::optional:
        choose(units, u + 1, open);
        with_selected({unit.members[0]}, units, u, open);
        break;
      case UnitKind::alt_group:
        for (std::size_t m : unit.members) with_selected({m}, units, u, open);
        break;
      case UnitKind::or_group: {
        const std::size_t k = unit.members.size();
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << k); ++mask) {
          std::vector<std::size_t> pick;
          for (std::size_t b = 0; b < k; ++b)
            if (mask & (std::uint64_t{1} << b)) pick.push_back(unit.members[b]);
          with_selected(pick, units, u, open);
        }
        break;
      }
    }
  }

  void with_selected(const std::vector<std::size_t>& pick,
                     const std::vector<ChildUnit>& units, std::size_t u,
                     std::vector<std::size_t>& open) {
    for (std::size_t f : pick) {
      selected_[f] = 1;
      open.push_back(f);
    }
    choose(units, u + 1, open);
    for (std::size_t f : pick) {
      selected_[f] = 0;
      open.pop_back();
    }
  }

  bool satisfies_constraints() const {
    for (const auto& c : constraints_) {
      const bool l = selected_[c.lhs] != 0;
      const bool r = selected_[c.rhs] != 0;
      if (c.kind == ConstraintKind::require && l && !r) return false;
      if (c.kind == ConstraintKind::exclude && l && r) return false;
    }
    return true;
  }

  std::vector<std::vector<ChildUnit>> units_;
  std::vector<char> selected_;
  std::vector<IndexedConstraint> constraints_;
  std::uint64_t count_ = 0;
};

}  // namespace detail

/// Number of valid products. Tree-valid configurations are enumerated and
/// filtered by the cross-tree constraints; when more than `cap` candidates
/// would have to be visited the result is flagged `exceeds_cap`. Models
/// without constraints are counted in closed form.
inline ProductCount count_products(const FeatureModel& model,
                                   std::uint64_t cap = default_product_cap) {
  auto units = detail::child_units(model);
  const std::uint64_t candidates = detail::tree_configurations(units, 0);
  if (candidates == detail::saturated) return {true, 0};
  if (model.constraints().empty()) return {false, candidates};
  if (candidates > cap) return {true, 0};
  return {false, detail::ConfigurationWalker(model, std::move(units)).run()};
}

// ---------------------------------------------------------------------------
// Dependency queries
// ---------------------------------------------------------------------------

enum class Dependency { dependent, disconnected };

/// Dependent when one feature is an ancestor of the other or a cross-tree
/// constraint links them in either direction.
inline Dependency features_dependent(const FeatureModel& model,
                                     std::string_view a, std::string_view b) {
  const auto ia = model.index_of(a);
  const auto ib = model.index_of(b);
  if (!ia) throw Error("unknown feature '" + std::string(a) + "'");
  if (!ib) throw Error("unknown feature '" + std::string(b) + "'");
  if (*ia == *ib || model.is_ancestor(*ia, *ib) || model.is_ancestor(*ib, *ia))
    return Dependency::dependent;
  for (const auto& c : model.constraints())
    if ((c.lhs == a && c.rhs == b) || (c.lhs == b && c.rhs == a))
      return Dependency::dependent;
  return Dependency::disconnected;
}

}  // namespace splcmap

#endif
