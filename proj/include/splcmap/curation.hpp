#ifndef SPLCMAP_CURATION_HPP
#define SPLCMAP_CURATION_HPP

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "splcmap/error.hpp"

namespace splcmap {

struct EdgeEdit {
  std::string source;  // concept label
  std::string target;
  std::string label;
  bool directed = false;

  friend bool operator==(const EdgeEdit&, const EdgeEdit&) = default;
};

struct EdgeCuration {
  std::vector<EdgeEdit> add;
  std::vector<EdgeEdit> remove;
  std::vector<EdgeEdit> relabel;

  bool empty() const { return add.empty() && remove.empty() && relabel.empty(); }

  friend bool operator==(const EdgeCuration&, const EdgeCuration&) = default;
};

/// The domain engineer's recorded decisions, replayed on every run.
struct Curation {
  std::vector<std::vector<std::string>> merge;
  std::map<std::string, std::string> rename;
  std::vector<std::string> drop;
  std::optional<std::vector<std::string>> select;
  std::map<std::string, std::string> definitions;
  EdgeCuration edges;

  bool empty() const {
    return merge.empty() && rename.empty() && drop.empty() && !select &&
           definitions.empty() && edges.empty();
  }

  friend bool operator==(const Curation&, const Curation&) = default;
};

namespace detail {

inline EdgeEdit parse_edge_edit(const nlohmann::json& j) {
  EdgeEdit e;
  if (j.is_array()) {
    if (j.size() < 2 || j.size() > 4)
      throw Error("curation: edge entries are [source, target, label, directed]");
    e.source = j.at(0).get<std::string>();
    e.target = j.at(1).get<std::string>();
    if (j.size() > 2) e.label = j.at(2).get<std::string>();
    if (j.size() > 3) e.directed = j.at(3).get<bool>();
    return e;
  }
  e.source = j.at("source").get<std::string>();
  e.target = j.at("target").get<std::string>();
  e.label = j.value("label", std::string{});
  e.directed = j.value("directed", false);
  return e;
}

}  // namespace detail

/// Reads a curation document:
///
///     {"merge": [["Annotation", "Web Annotation"]],
///      "rename": {"Annot": "Annotation"},
///      "drop": ["Browser"],
///      "select": ["Annotation", "User"],
///      "definitions": {"Annotation": "A note anchored to a target."},
///      "edges": {"add": [...], "remove": [...], "relabel": [...]}}
///
/// Edge entries are objects with source/target/label/directed or the
/// equivalent four-element arrays.
inline Curation parse_curation(std::string_view text) {
  Curation c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error("curation: expected an object");
    for (const auto& [key, value] : j.items()) {
      if (key == "merge") {
        for (const auto& group : value) {
          auto labels = group.get<std::vector<std::string>>();
          if (labels.size() < 2)
            throw Error("curation: a merge group needs at least two labels");
          c.merge.push_back(std::move(labels));
        }
      } else if (key == "rename") {
        c.rename = value.get<std::map<std::string, std::string>>();
      } else if (key == "drop") {
        c.drop = value.get<std::vector<std::string>>();
      } else if (key == "select") {
        c.select = value.get<std::vector<std::string>>();
      } else if (key == "definitions") {
        c.definitions = value.get<std::map<std::string, std::string>>();
      } else if (key == "edges") {
        for (const auto& [op, list] : value.items()) {
          std::vector<EdgeEdit>* target = nullptr;
          if (op == "add") target = &c.edges.add;
          else if (op == "remove") target = &c.edges.remove;
          else if (op == "relabel") target = &c.edges.relabel;
          else throw Error("curation: unknown edges operation '" + op + "'");
          for (const auto& e : list) target->push_back(detail::parse_edge_edit(e));
        }
      } else {
        throw Error("curation: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("curation: ") + e.what());
  }
  return c;
}

}  // namespace splcmap

#endif
