// Command-line front end: build, stats, export, serve.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "splcmap/pipeline.hpp"
#include "splcmap/server.hpp"

namespace fs = std::filesystem;
using namespace splcmap;

namespace {

bool tty_colors(int fd) { return color_enabled() && ::isatty(fd); }

std::optional<int> parse_levels(const std::string& s) {
  if (s == "all") return std::nullopt;
  std::size_t used = 0;
  int n = 0;
  try {
    n = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw Error("--levels expects a number or 'all', got '" + s + "'");
  return n;
}

StatsScope parse_scope(const std::string& s) {
  if (s == "global") return StatsScope::global;
  if (s == "batch") return StatsScope::batch;
  throw Error("--stats-scope expects 'global' or 'batch'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept maps for software product lines"};
  app.require_subcommand(1);

  PipelineConfig build;
  std::string model, corpus, curation, scan_cfg, lexicon_cfg, out;
  std::string levels = "all";
  std::string scope = "global";
  std::size_t per_feature = 0;
  auto* b = app.add_subcommand("build", "Build the concept map of a product line");
  b->add_option("--model", model, "Feature model file")->required();
  b->add_option("--corpus", corpus, "Corpus root directory")->required();
  b->add_option("--curation", curation, "Curation decisions (JSON)");
  b->add_option("--out", out, "Output directory")->required();
  b->add_option("--levels", levels, "Number of feature-model levels, or 'all'");
  b->add_option("--tau", build.tau, "Clustering similarity threshold");
  b->add_option("--keywords-per-feature", per_feature, "Top keywords kept per feature");
  b->add_option("--scan-config", scan_cfg, "Asset classification settings (JSON)");
  b->add_option("--lexicon-config", lexicon_cfg, "Tokenizer settings (JSON)");
  b->add_option("--stats-scope", scope, "Relevance statistics: global or batch");
  b->add_flag("--reverse-file-order", build.reverse_file_order)->group("");

  std::string stats_model, stats_corpus, stats_scan;
  std::uint64_t cap = default_product_cap;
  auto* s = app.add_subcommand("stats", "Feature model and trace statistics");
  s->add_option("--model", stats_model, "Feature model file")->required();
  s->add_option("--corpus", stats_corpus, "Corpus root directory");
  s->add_option("--scan-config", stats_scan, "Asset classification settings (JSON)");
  s->add_option("--product-cap", cap, "Largest product space to enumerate");

  std::string cmap_in, format = "dot", export_out;
  auto* e = app.add_subcommand("export", "Export a concept map to DOT or GraphML");
  e->add_option("--cmap", cmap_in, "Concept map document")->required();
  e->add_option("--format", format, "dot or graphml");
  e->add_option("--out", export_out, "Output file (default: stdout)");

  std::string serve_cmap, serve_corpus, viewer, host = "127.0.0.1";
  int port = 8080;
  auto* v = app.add_subcommand("serve", "Serve a concept map to the viewer");
  v->add_option("--cmap", serve_cmap, "Concept map document")->required();
  v->add_option("--corpus", serve_corpus, "Corpus root directory")->required();
  v->add_option("--viewer", viewer, "Directory with the viewer bundle");
  v->add_option("--host", host, "Address to bind");
  v->add_option("--port", port, "Port to listen on");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*b) {
      build.model = model;
      build.corpus = corpus;
      build.out = out;
      if (!curation.empty()) build.curation = curation;
      if (!scan_cfg.empty()) build.scan_config = scan_cfg;
      if (!lexicon_cfg.empty()) build.lexicon_config = lexicon_cfg;
      if (per_feature) build.keywords_per_feature = per_feature;
      build.levels = parse_levels(levels);
      build.stats_scope = parse_scope(scope);
      const auto result = run(build);
      std::cout << render_report(result, tty_colors(STDOUT_FILENO));
      const auto paths = output_paths(build.out, result.document.spl_name);
      std::cout << "\nwrote " << paths.document.string() << "\n";
    } else if (*s) {
      const auto fm = parse_feature_model(read_file(stats_model));
      std::optional<ScanResult> scan;
      if (!stats_corpus.empty()) {
        const auto cfg = stats_scan.empty() ? ScanConfig::defaults()
                                            : parse_scan_config(read_file(stats_scan));
        scan = scan_corpus(stats_corpus, cfg, &fm);
      }
      std::cout << render_stats(fm, scan ? &scan->table : nullptr, cap,
                                tty_colors(STDOUT_FILENO));
      if (scan)
        for (const auto& d : scan->diagnostics) std::cerr << d.str() << "\n";
    } else if (*e) {
      const auto doc = parse_document(read_file(cmap_in));
      const auto text = export_document(doc, format);
      if (export_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream o(export_out, std::ios::binary);
        if (!o) throw Error("cannot write '" + export_out + "'");
        o << text;
      }
    } else if (*v) {
      CmapService service(read_file(serve_cmap), serve_corpus);
      std::optional<fs::path> dir;
      if (!viewer.empty()) dir = fs::path(viewer);
      std::cerr << "serving " << service.document().spl_name << " on http://" << host << ":"
                << port << "\n";
      serve(service, dir, host, port);
    }
  } catch (const std::exception& ex) {
    std::cerr << "splcmap: error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
