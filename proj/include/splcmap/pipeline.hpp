#ifndef SPLCMAP_PIPELINE_HPP
#define SPLCMAP_PIPELINE_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "splcmap/asset_scanner.hpp"
#include "splcmap/cmap_document.hpp"
#include "splcmap/concept_builder.hpp"
#include "splcmap/curation.hpp"
#include "splcmap/error.hpp"
#include "splcmap/feature_model.hpp"
#include "splcmap/lexicon.hpp"
#include "splcmap/relationship_builder.hpp"

namespace splcmap {

/// Whether C, F, A and AT count the whole run or only the current batch.
enum class StatsScope { global, batch };

struct BuildSettings {
  std::optional<int> levels;  // nullopt: every level
  double tau = default_similarity_threshold;
  LexiconConfig lexicon;
  StatsScope stats_scope = StatsScope::global;
};

struct BatchReport {
  TraversalBatch batch;
  CorpusStats stats;
  std::vector<Concept> candidates;  // ranked, before curation
  std::set<std::string> kept;       // candidate ids present after the batch
  std::vector<EdgeProposal> proposals;
};

struct BuildResult {
  CmapDocument document;
  std::vector<BatchReport> batches;
  Diagnostics diagnostics;
};

/// Error raised by a named pipeline stage.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

template <typename F>
auto run_stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

namespace detail {

inline std::set<std::string> curation_labels(const Curation& c) {
  std::set<std::string> out;
  for (const auto& g : c.merge) out.insert(g.begin(), g.end());
  for (const auto& [from, to] : c.rename) out.insert(from);
  if (c.select) out.insert(c.select->begin(), c.select->end());
  for (const auto& [label, text] : c.definitions) out.insert(label);
  return out;
}

inline Concept* find_owner(std::vector<Concept>& concepts, const Concept& probe) {
  for (auto& c : concepts)
    if (c.id == probe.id || c.label == probe.label || c.aliases.contains(probe.label))
      return &c;
  return nullptr;
}

inline CorpusStats batch_stats(const TraceTable& table, const TraversalBatch& batch,
                               std::size_t concepts) {
  std::set<std::string> paths;
  std::set<AssetKind> kinds;
  for (const auto& f : batch.features) {
    auto it = table.feature_segments.find(f);
    if (it == table.feature_segments.end()) continue;
    for (const auto& s : it->second)
      if (paths.insert(s.path).second) kinds.insert(table.find_asset(s.path)->kind);
  }
  return {concepts, batch.features.size(), paths.size(), kinds.size()};
}

}  // namespace detail

/// The construction process over an already parsed model and scanned corpus:
/// per traversal batch, extract keywords, cluster, rank, replay curation and
/// apply the relationship rules; then curate edges and assemble.
inline BuildResult build_cmap(const FeatureModel& model, const TraceTable& table,
                              const Curation& curation, const BuildSettings& settings) {
  if (settings.levels && *settings.levels < 1) throw Error("nothing to process");
  const TraversalPlan plan = traversal_plan(model);
  std::vector<TraversalBatch> batches;
  for (const auto& b : plan.batches)
    if (!settings.levels || b.level <= *settings.levels) batches.push_back(b);
  if (batches.empty()) throw Error("nothing to process");

  BuildResult result;
  std::vector<Concept> accumulated;
  std::set<std::string> resolved;
  std::set<std::string> pinned;
  if (curation.select) pinned.insert(curation.select->begin(), curation.select->end());
  CorpusStats stats;
  bool have_stats = false;
  int levels_built = 0;

  for (const auto& batch : batches) {
    BatchReport report{batch, {}, {}, {}, {}};
    levels_built = std::max(levels_built, batch.level);
    const std::string where = "level " + std::to_string(batch.level) + " " +
                              to_string(batch.phase) + " batch";

    auto extraction = run_stage("extract (" + where + ")", [&] {
      return extract_keywords(table, batch.features, settings.lexicon);
    });
    result.diagnostics.insert(result.diagnostics.end(), extraction.diagnostics.begin(),
                              extraction.diagnostics.end());
    if (extraction.keywords.empty()) {
      result.batches.push_back(std::move(report));
      continue;
    }

    auto fresh = run_stage("cluster (" + where + ")", [&] {
      return cluster_keywords(extraction.keywords, settings.tau);
    });

    // Keywords already explained by an earlier concept (same normal form)
    // enrich that concept.
    std::vector<Concept> newcomers;
    for (auto& c : fresh) {
      std::vector<Keyword> remaining;
      for (auto& k : c.members) {
        auto owner = std::find_if(accumulated.begin(), accumulated.end(), [&](const Concept& a) {
          return std::any_of(a.members.begin(), a.members.end(),
                             [&](const Keyword& m) { return m.norm == k.norm; });
        });
        if (owner != accumulated.end()) {
          owner->add_members({k});
        } else {
          remaining.push_back(std::move(k));
        }
      }
      if (remaining.empty()) continue;
      c.members = std::move(remaining);
      c.refresh();
      c.label = majority_label(c.members);
      c.id = concept_id(c.label);
      if (Concept* owner = detail::find_owner(accumulated, c)) {
        owner->add_members(c.members);
      } else if (Concept* twin = detail::find_owner(newcomers, c)) {
        twin->add_members(c.members);
      } else {
        newcomers.push_back(std::move(c));
      }
    }

    std::vector<Concept> combined = accumulated;
    for (auto& c : combined) c.carried = true;
    combined.insert(combined.end(), newcomers.begin(), newcomers.end());
    for (auto& c : combined) assign_level(c, model);

    stats = settings.stats_scope == StatsScope::global
                ? CorpusStats{combined.size(), model.size() - 1, table.asset_count,
                              table.asset_kind_count}
                : detail::batch_stats(table, batch, newcomers.size());
    have_stats = true;
    report.stats = stats;

    auto ranked = run_stage("rank (" + where + ")",
                            [&] { return rank_concepts(std::move(combined), stats); });
    for (const auto& c : ranked)
      if (!c.carried) report.candidates.push_back(c);

    auto curated = run_stage("curate (" + where + ")", [&] {
      return apply_curation(ranked, resolvable_curation(curation, ranked, resolved), stats);
    });

    auto rel = run_stage("relate (" + where + ")", [&] {
      return propose_relationships(std::move(curated), model, pinned);
    });
    for (auto& c : rel.survivors) assign_level(c, model);
    accumulated = rank_concepts(std::move(rel.survivors), stats);
    report.proposals = std::move(rel.proposals);
    for (const auto& c : report.candidates)
      if (std::any_of(accumulated.begin(), accumulated.end(),
                      [&](const Concept& a) { return a.id == c.id; }))
        report.kept.insert(c.id);
    result.batches.push_back(std::move(report));
  }

  std::vector<std::string> unresolved;
  for (const auto& label : detail::curation_labels(curation))
    if (!resolved.contains(label)) unresolved.push_back(label);
  if (!unresolved.empty())
    throw StageError("curate", "curation references unknown concepts: " + join(unresolved, ", "));

  std::vector<Edge> edges;
  if (!accumulated.empty()) {
    auto rel = propose_relationships(accumulated, model, pinned);
    edges = run_stage("curate edges", [&] {
      return apply_edge_curation(rel.proposals, curation.edges, rel.survivors);
    });
    for (auto& c : rel.survivors) assign_level(c, model);
    accumulated = have_stats ? rank_concepts(std::move(rel.survivors), stats)
                             : std::move(rel.survivors);
  } else if (!curation.edges.empty()) {
    run_stage("curate edges",
              [&] { return apply_edge_curation({}, curation.edges, accumulated); });
  }

  const TraceMetrics metrics = trace_metrics(table);
  result.document = run_stage("assemble", [&] {
    return assemble(model, table, metrics, std::move(accumulated), std::move(edges),
                    levels_built);
  });
  std::sort(result.diagnostics.begin(), result.diagnostics.end());
  return result;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace detail {

struct Palette {
  bool on = false;
  std::string bold() const { return on ? "\x1b[1m" : ""; }
  std::string dim() const { return on ? "\x1b[2m" : ""; }
  std::string reset() const { return on ? "\x1b[0m" : ""; }
};

inline std::string format_rv(double rv) {
  std::ostringstream s;
  s << std::setprecision(6) << rv;
  return s.str();
}

}  // namespace detail

/// True unless SPLCMAP_NO_COLOR is set.
inline bool color_enabled() { return std::getenv("SPLCMAP_NO_COLOR") == nullptr; }

/// The engineer's selection worksheet: per batch, the ranked candidate
/// concepts with their relevance, member keywords and traces.
inline std::string render_report(const BuildResult& r, bool color = false) {
  const detail::Palette p{color};
  const CmapDocument& doc = r.document;
  std::map<std::string, std::string> label_of;
  for (const auto& b : r.batches)
    for (const auto& c : b.candidates) label_of[c.id] = c.label;
  for (const auto& c : doc.concepts) label_of[c.id] = c.label;

  std::ostringstream out;
  out << p.bold() << "SPL Cmap construction report: " << doc.spl_name << p.reset() << "\n";
  out << "levels built: " << doc.levels_built << "\n";
  for (const auto& b : r.batches) {
    out << "\n" << p.bold() << "== level " << b.batch.level << ", "
        << to_string(b.batch.phase) << " features: " << join(b.batch.features, ", ")
        << p.reset() << "\n";
    if (b.candidates.empty()) {
      out << "no keywords extracted\n";
      continue;
    }
    out << "statistics: C=" << b.stats.concepts << " F=" << b.stats.features
        << " A=" << b.stats.assets << " AT=" << b.stats.asset_kinds << "\n";
    std::size_t rank = 0;
    for (const auto& c : b.candidates) {
      std::vector<std::string> members;
      for (const auto& k : c.members) members.push_back(k.surface);
      out << std::setw(4) << ++rank << ". " << c.label << "  rv=" << detail::format_rv(c.relevance)
          << "  occurrences=" << c.occurrences
          << (b.kept.contains(c.id) ? "  [kept]" : "  [not kept]") << "\n";
      out << p.dim() << "      members: " << join(members, ", ") << "\n"
          << "      features: " << join(c.features, ", ") << "\n"
          << "      assets: " << join(c.assets, ", ") << p.reset() << "\n";
    }
    if (!b.proposals.empty()) {
      out << "relationship proposals:\n";
      for (const auto& e : b.proposals) {
        const auto& s = label_of.count(e.source) ? label_of[e.source] : e.source;
        const auto& t = label_of.count(e.target) ? label_of[e.target] : e.target;
        if (e.provenance == Provenance::subsume) {
          out << "  subsume: " << t << " into " << s << "\n";
        } else {
          out << "  " << to_string(e.provenance) << ": " << s << " -- " << t << "\n";
        }
      }
    }
  }
  out << "\n" << p.bold() << "== final concept map" << p.reset() << "\n";
  for (const auto& c : doc.concepts)
    out << "  " << c.label << " (level " << c.level << ", rv=" << detail::format_rv(c.relevance)
        << ")\n";
  for (const auto& e : doc.relationships)
    out << "  " << label_of[e.source] << (e.directed ? " -> " : " -- ") << label_of[e.target]
        << " [" << e.label << "]\n";
  if (!r.diagnostics.empty()) {
    out << "\n" << p.bold() << "== diagnostics" << p.reset() << "\n";
    for (const auto& d : r.diagnostics) out << d.str() << "\n";
  }
  return out.str();
}

/// Feature counts, product count and the scattering/tangling table.
inline std::string render_stats(const FeatureModel& model, const TraceTable* table,
                                std::uint64_t cap = default_product_cap, bool color = false) {
  const detail::Palette p{color};
  std::map<Variability, std::size_t> by_kind;
  for (const auto& f : model.features())
    if (f.parent) ++by_kind[f.variability];
  std::ostringstream out;
  out << p.bold() << model.spl_name() << p.reset() << "\n";
  out << "features: " << model.size() - 1 << " (mandatory " << by_kind[Variability::mandatory]
      << ", optional " << by_kind[Variability::optional] << ", or " << by_kind[Variability::or_member]
      << ", alternative " << by_kind[Variability::alt_member] << ")\n";
  out << "levels: " << model.max_level() << "\n";
  out << "constraints: " << model.constraints().size() << "\n";
  const auto count = count_products(model, cap);
  out << "products: "
      << (count.exceeds_cap ? "exceeds cap (" + std::to_string(cap) + " candidates)"
                            : std::to_string(count.value))
      << "\n";
  if (table) {
    const auto m = trace_metrics(*table);
    out << "assets: " << table->asset_count << " (" << table->asset_kind_count
        << " kinds), variation points: " << table->variation_points.size() << "\n";
    out << "\n" << p.bold() << std::left << std::setw(24) << "feature" << std::setw(6) << "vps"
        << std::setw(7) << "files" << "tangled with" << p.reset() << "\n";
    for (const auto& [f, s] : m.scattering)
      out << std::setw(24) << f << std::setw(6) << s.vp_count << std::setw(7) << s.file_count
          << join(m.tangling.at(f), ", ") << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// File-level run
// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::filesystem::path model;
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> curation;
  std::optional<std::filesystem::path> scan_config;
  std::optional<std::filesystem::path> lexicon_config;
  std::filesystem::path out;
  std::optional<int> levels;
  double tau = default_similarity_threshold;
  std::optional<std::size_t> keywords_per_feature;
  StatsScope stats_scope = StatsScope::global;
  bool reverse_file_order = false;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read '" + p.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Exclusive claim on an output directory for the lifetime of the object.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir) : path_(dir / ".splcmap.lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw Error("output directory is locked by another run: " + path_.string());
    std::fclose(f);
  }
  ~OutputLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct PipelineOutputs {
  std::filesystem::path document;
  std::filesystem::path dot;
  std::filesystem::path graphml;
  std::filesystem::path report;
};

inline PipelineOutputs output_paths(const std::filesystem::path& out, const std::string& spl) {
  return {out / (spl + ".cmap.json"), out / (spl + ".dot"), out / (spl + ".graphml"),
          out / "report.txt"};
}

inline BuildResult run(const PipelineConfig& cfg) {
  if (cfg.levels && *cfg.levels < 1) throw StageError("config", "nothing to process");
  if (!(cfg.tau > 0.0 && cfg.tau <= 1.0))
    throw StageError("config", "--tau must lie in (0, 1]");

  const FeatureModel model =
      run_stage("parse model", [&] { return parse_feature_model(read_file(cfg.model)); });

  BuildSettings settings;
  settings.levels = cfg.levels;
  settings.tau = cfg.tau;
  settings.stats_scope = cfg.stats_scope;
  run_stage("config", [&] {
    if (cfg.lexicon_config) settings.lexicon = parse_lexicon_config(read_file(*cfg.lexicon_config));
    if (cfg.keywords_per_feature) {
      if (*cfg.keywords_per_feature == 0) throw Error("--keywords-per-feature must be >= 1");
      settings.lexicon.keywords_per_feature = *cfg.keywords_per_feature;
    }
  });
  const ScanConfig scan_cfg = run_stage("config", [&] {
    return cfg.scan_config ? parse_scan_config(read_file(*cfg.scan_config))
                           : ScanConfig::defaults();
  });
  const Curation curation = run_stage("parse curation", [&] {
    return cfg.curation ? parse_curation(read_file(*cfg.curation)) : Curation{};
  });

  ScanResult scan = run_stage(
      "scan", [&] { return scan_corpus(cfg.corpus, scan_cfg, &model, cfg.reverse_file_order); });

  BuildResult result = build_cmap(model, scan.table, curation, settings);
  result.diagnostics.insert(result.diagnostics.begin(), scan.diagnostics.begin(),
                            scan.diagnostics.end());
  std::sort(result.diagnostics.begin(), result.diagnostics.end());

  // Everything is rendered before the first byte is written.
  const auto paths = output_paths(cfg.out, result.document.spl_name);
  const std::vector<std::pair<std::filesystem::path, std::string>> files{
      {paths.document, serialize_document(result.document)},
      {paths.dot, export_dot(result.document)},
      {paths.graphml, export_graphml(result.document)},
      {paths.report, render_report(result)}};

  run_stage("write", [&] {
    std::filesystem::create_directories(cfg.out);
    OutputLock lock(cfg.out);
    for (const auto& [path, text] : files) {
      auto tmp = path;
      tmp += ".tmp";
      {
        std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
        if (!o) throw Error("cannot write '" + tmp.string() + "'");
        o << text;
      }
      std::filesystem::rename(tmp, path);
    }
  });
  return result;
}

}  // namespace splcmap

#endif
