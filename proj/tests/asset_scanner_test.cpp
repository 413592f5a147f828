#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>

#include "splcmap/asset_scanner.hpp"
#include "support.hpp"

using namespace splcmap;
using splcmap::support::Rng;

namespace {

ScanResult scan_one(const std::string& path, const std::string& text) {
  return scan_files({{path, text}}, ScanConfig::defaults());
}

const std::string kFixture = support::fixture_dir() + "/wacmini";

}  // namespace

// --- conditions -------------------------------------------------------------

TEST(Condition, PrecedenceAndCanonicalText) {
  EXPECT_EQ(parse_condition("A OR B AND C").str(), "A OR B AND C");
  EXPECT_EQ(parse_condition("(A OR B) AND C").str(), "(A OR B) AND C");
  EXPECT_EQ(parse_condition("NOT (A AND B)").str(), "NOT (A AND B)");
  EXPECT_EQ(parse_condition("A AND (B AND C)"), parse_condition("(A AND B) AND C"));
  const auto c = parse_condition("A OR B AND C");
  auto eval = [&](bool a, bool b, bool cc) {
    return c.evaluate([&](const std::string& n) { return n == "A" ? a : n == "B" ? b : cc; });
  };
  EXPECT_TRUE(eval(true, false, false));
  EXPECT_FALSE(eval(false, true, false));
  EXPECT_TRUE(eval(false, true, true));
}

TEST(Condition, PositiveAndMentionedNames) {
  const auto c = parse_condition("A AND NOT (B OR NOT C)");
  EXPECT_EQ(c.positive_features(), (std::set<std::string>{"A", "C"}));
  EXPECT_EQ(c.mentioned_features(), (std::set<std::string>{"A", "B", "C"}));
}

TEST(Condition, Malformed) {
  EXPECT_THROW(parse_condition(""), ParseError);
  EXPECT_THROW(parse_condition("A AND"), ParseError);
  EXPECT_THROW(parse_condition("(A"), ParseError);
  EXPECT_THROW(parse_condition("A B"), ParseError);
  EXPECT_THROW(parse_condition("1A"), ParseError);
}

TEST(Condition, TextRoundTrip) {
  for (const char* text : {"A", "NOT A", "A AND B", "A OR B", "NOT (A OR B) AND C",
                           "(A OR B) AND (C OR NOT D)", "A OR B AND NOT C OR D"}) {
    const auto c = parse_condition(text);
    EXPECT_EQ(parse_condition(c.str()), c) << text;
  }
}

// --- classification -----------------------------------------------------------

TEST(Classify, RequirementDirectoryWinsOverExtension) {
  const auto cfg = ScanConfig::defaults();
  EXPECT_EQ(classify_asset("requirements/login.md", cfg), AssetKind::requirement);
  EXPECT_EQ(classify_asset("docs/notes.txt", cfg), AssetKind::requirement);
  EXPECT_EQ(classify_asset("docs/guide.md", cfg), AssetKind::documentation);
  EXPECT_EQ(classify_asset("src/a.JS", cfg), AssetKind::code);
  EXPECT_EQ(classify_asset("image.png", cfg), std::nullopt);
  EXPECT_EQ(classify_asset(".gitignore", cfg), std::nullopt);
}

TEST(ScanConfigFile, ParsesKeysAndRejectsNonsense) {
  const auto cfg = parse_scan_config(
      R"({"extensions": {"vue": "code", ".adoc": "documentation"},
          "requirement_dirs": ["./reqs/"], "dialects": ["pvscl"], "max_file_bytes": 10})");
  EXPECT_EQ(cfg.extensions.size(), 2u);
  EXPECT_EQ(classify_asset("x.vue", cfg), AssetKind::code);
  EXPECT_EQ(classify_asset("reqs/r.adoc", cfg), AssetKind::requirement);
  EXPECT_FALSE(cfg.ifdef_dialect);
  EXPECT_EQ(cfg.max_file_bytes, 10u);
  EXPECT_THROW(parse_scan_config(R"({"dialects": []})"), Error);
  EXPECT_THROW(parse_scan_config(R"({"dialects": ["m4"]})"), Error);
  EXPECT_THROW(parse_scan_config(R"({"extensions": {"x": "binary"}})"), Error);
  EXPECT_THROW(parse_scan_config("[1,"), Error);
}

// --- annotations --------------------------------------------------------------

TEST(Scanner, SingleIfdefBlock) {
  const auto r = scan_one("a.c", "int x;\n#ifdef Commenting\nl1\nl2\nl3\n#endif\n");
  ASSERT_EQ(r.table.variation_points.size(), 1u);
  const auto& vp = r.table.variation_points[0];
  EXPECT_EQ(vp.condition.str(), "Commenting");
  EXPECT_EQ(vp.span, (LineSpan{3, 5}));
  EXPECT_EQ(vp.positive_features, std::set<std::string>{"Commenting"});
  ASSERT_EQ(r.table.feature_segments.at("Commenting").size(), 1u);
  EXPECT_EQ(r.table.feature_segments.at("Commenting")[0].text, "l1\nl2\nl3");
}

TEST(Scanner, NestedPvsclBlockTracesToBoth) {
  const auto r = scan_one("a.js",
                          "// PVSCL:IFCOND(Replying)\n"
                          "outer\n"
                          "// PVSCL:IFCOND(Commenting)\n"
                          "inner\n"
                          "// PVSCL:ENDCOND\n"
                          "// PVSCL:ENDCOND\n");
  ASSERT_EQ(r.table.variation_points.size(), 2u);
  const auto& inner = r.table.variation_points[1];
  EXPECT_EQ(inner.span, (LineSpan{4, 4}));
  EXPECT_EQ(inner.condition.str(), "Replying AND Commenting");
  EXPECT_EQ(inner.positive_features, (std::set<std::string>{"Commenting", "Replying"}));
  // The outer segment keeps line alignment with marker lines blanked.
  EXPECT_EQ(r.table.feature_segments.at("Replying")[0].text, "outer\n\ninner\n");
}

TEST(Scanner, NegatedBlockHasNoPositiveTrace) {
  const auto r = scan_one("a.c", "#ifndef Autocomplete\nx\n#endif\n");
  ASSERT_EQ(r.table.variation_points.size(), 1u);
  const auto& vp = r.table.variation_points[0];
  EXPECT_EQ(vp.condition.str(), "NOT Autocomplete");
  EXPECT_TRUE(vp.positive_features.empty());
  EXPECT_EQ(vp.mentioned_features, std::set<std::string>{"Autocomplete"});
  EXPECT_TRUE(r.table.feature_segments.empty());
}

TEST(Scanner, ElseBranchIsTheNegation) {
  const auto r = scan_one("a.c", "#ifdef A\nx\n#else\ny\n#endif\n");
  ASSERT_EQ(r.table.variation_points.size(), 2u);
  EXPECT_EQ(r.table.variation_points[1].condition.str(), "NOT A");
  EXPECT_EQ(r.table.variation_points[1].span, (LineSpan{4, 4}));
}

TEST(Scanner, OpaqueIfKeepsNestingBalanced) {
  const auto r = scan_one("a.c", "#if X > 1\n#ifdef A\nx\n#endif\n#elif Y\nz\n#endif\n");
  ASSERT_EQ(r.table.variation_points.size(), 1u);
  EXPECT_EQ(r.table.variation_points[0].condition.str(), "A");
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(Scanner, UnbalancedFileIsSkippedWithLocation) {
  const auto r = scan_files({{"bad.c", "#ifdef A\nx\n"},
                             {"stray.js", "x\n// PVSCL:ENDCOND\n"},
                             {"good.c", "#ifdef B\ny\n#endif\n"}},
                            ScanConfig::defaults());
  ASSERT_EQ(r.diagnostics.size(), 2u);
  EXPECT_EQ(r.diagnostics[0].path, "bad.c");
  EXPECT_EQ(r.diagnostics[0].severity, Severity::error);
  EXPECT_EQ(r.diagnostics[0].line, 2u);
  EXPECT_EQ(r.diagnostics[1].path, "stray.js");
  EXPECT_EQ(r.diagnostics[1].line, 2u);
  EXPECT_EQ(r.diagnostics[1].str(),
            "error: stray.js:2: block end without a matching open marker; file skipped");
  ASSERT_EQ(r.table.assets.size(), 1u);
  EXPECT_EQ(r.table.assets[0].path, "good.c");
}

TEST(Scanner, MixedDialectsMustNotInterleave) {
  const auto r = scan_one("a.c", "#ifdef A\n// PVSCL:ENDCOND\n#endif\n");
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].line, 2u);
}

TEST(Scanner, UnknownFeatureWarnsButKeepsTrace) {
  const auto model = parse_feature_model("R\n  ?A\n");
  const auto r = scan_files({{"a.c", "#ifdef Ghost\nx\n#endif\n"}}, ScanConfig::defaults(), &model);
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].severity, Severity::warning);
  EXPECT_TRUE(r.table.feature_segments.contains("Ghost"));
}

TEST(Scanner, FrontMatterBindsWholeDocument) {
  const auto r = scan_files({{"docs/x.md", "<!-- features: A, B -->\nline two\nline three\n"},
                             {"src/x.js", "// features: A\ncode\n"}},
                            ScanConfig::defaults());
  EXPECT_EQ(r.table.doc_bindings.at("docs/x.md"), (std::set<std::string>{"A", "B"}));
  EXPECT_FALSE(r.table.doc_bindings.contains("src/x.js"));  // code is traced by annotations
  EXPECT_EQ(r.table.feature_segments.at("B")[0].span, (LineSpan{2, 3}));
}

TEST(Scanner, SkipsBinaryAndOversizedFiles) {
  auto cfg = ScanConfig::defaults();
  cfg.max_file_bytes = 8;
  const auto r = scan_files({{"big.c", "0123456789"}, {"bin.c", std::string("a\0b", 3)},
                             {"ok.c", "x\n"}},
                            cfg);
  EXPECT_EQ(r.diagnostics.size(), 2u);
  ASSERT_EQ(r.table.assets.size(), 1u);
  EXPECT_EQ(r.table.asset_count, 1u);
}

TEST(Scanner, DuplicatePathsAreAnError) {
  EXPECT_THROW(scan_files({{"a.c", "x"}, {"b.c", "y"}, {"a.c", "z"}}, ScanConfig::defaults()),
               Error);
}

TEST(Scanner, NoTanglingMeansSegmentLinesEqualVariableLines) {
  const auto r = scan_files({{"a.c", "x\n#ifdef A\n1\n2\n#endif\n#ifdef B\n3\n#endif\n"},
                             {"b.js", "// PVSCL:IFCOND(C)\n4\n5\n6\n// PVSCL:ENDCOND\n"}},
                            ScanConfig::defaults());
  const auto m = trace_metrics(r.table);
  for (const auto& [f, t] : m.tangling) EXPECT_TRUE(t.empty());
  std::size_t segment_lines = 0;
  for (const auto& [f, segs] : r.table.feature_segments)
    for (const auto& s : segs) segment_lines += s.span.lines();
  EXPECT_EQ(segment_lines, 6u);
}

// --- metrics ------------------------------------------------------------------

TEST(Metrics, ScatteringAndTangling) {
  const auto r = scan_files({{"a.c", "#ifdef F\nx\n#endif\n#ifdef F\ny\n#endif\n"},
                             {"b.js", "// PVSCL:IFCOND(F AND G)\nz\n// PVSCL:ENDCOND\n"}},
                            ScanConfig::defaults());
  const auto m = trace_metrics(r.table);
  EXPECT_EQ(m.scattering.at("F").vp_count, 3u);
  EXPECT_EQ(m.scattering.at("F").file_count, 2u);
  EXPECT_EQ(m.tangling.at("F"), std::set<std::string>{"G"});
  EXPECT_EQ(m.tangling.at("G"), std::set<std::string>{"F"});
}

TEST(Metrics, TanglingIsSymmetricAndIrreflexiveOnFixture) {
  const auto model = parse_feature_model(support::slurp(kFixture + "/model.fm"));
  const auto r = scan_corpus(kFixture + "/corpus", ScanConfig::defaults(), &model);
  const auto m = trace_metrics(r.table);
  for (const auto& [f, others] : m.tangling) {
    EXPECT_FALSE(others.contains(f));
    for (const auto& g : others) EXPECT_TRUE(m.tangling.at(g).contains(f)) << f << " " << g;
  }
  // Operation: annotation.js (two VPs, one nested) and codebook.js.
  EXPECT_EQ(m.scattering.at("Operation").vp_count, 3u);
  EXPECT_EQ(m.scattering.at("Operation").file_count, 2u);
  EXPECT_EQ(m.tangling.at("Operation"), (std::set<std::string>{"Codebook", "Commenting"}));
}

// --- fixture golden and order independence -------------------------------------

TEST(ScannerFixture, MatchesGolden) {
  const auto model = parse_feature_model(support::slurp(kFixture + "/model.fm"));
  const auto r = scan_corpus(kFixture + "/corpus", ScanConfig::defaults(), &model);
  EXPECT_TRUE(r.diagnostics.empty());
  EXPECT_EQ(to_json(r.table).dump(2) + "\n", support::slurp(kFixture + "/golden/trace_table.json"));
}

TEST(ScannerFixture, ReverseEnumerationGivesSameTable) {
  const auto model = parse_feature_model(support::slurp(kFixture + "/model.fm"));
  const auto a = scan_corpus(kFixture + "/corpus", ScanConfig::defaults(), &model, false);
  const auto b = scan_corpus(kFixture + "/corpus", ScanConfig::defaults(), &model, true);
  EXPECT_EQ(a.table, b.table);
}

namespace {

struct GeneratedFile {
  std::string text;
  // Per content line: the literal stack (name, negated) at that line.
  std::vector<std::vector<std::pair<std::string, bool>>> context;
};

// Random well-nested blocks in both dialects, with optional else branches.
// Every line records the stack of branch literals it sits under.
GeneratedFile random_annotated_file(Rng& rng) {
  GeneratedFile g;
  std::vector<std::string> lines;
  std::vector<std::pair<std::string, bool>> stack;
  std::function<void(int)> block = [&](int depth) {
    const std::string name = "F" + std::to_string(support::uniform(rng, 0, 4));
    const bool pvscl = support::coin(rng);
    const bool neg = !pvscl && support::coin(rng, 0.3);
    lines.push_back(pvscl ? "// PVSCL:IFCOND(" + name + ")"
                          : std::string(neg ? "#ifndef " : "#ifdef ") + name);
    g.context.emplace_back();
    auto body = [&] {
      const std::size_t parts = support::uniform(rng, 0, 3);
      for (std::size_t i = 0; i < parts; ++i) {
        if (depth < 3 && support::coin(rng, 0.3)) {
          block(depth + 1);
        } else {
          lines.push_back("code " + std::to_string(lines.size()));
          g.context.push_back(stack);
        }
      }
    };
    stack.emplace_back(name, neg);
    body();
    stack.pop_back();
    if (support::coin(rng, 0.4)) {
      lines.push_back(pvscl ? "// PVSCL:ELSECOND" : "#else");
      g.context.emplace_back();
      stack.emplace_back(name, !neg);
      body();
      stack.pop_back();
    }
    lines.push_back(pvscl ? "// PVSCL:ENDCOND" : "#endif");
    g.context.emplace_back();
  };
  const std::size_t top = support::uniform(rng, 1, 4);
  for (std::size_t i = 0; i < top; ++i) {
    if (support::coin(rng)) {
      lines.push_back("plain");
      g.context.emplace_back();
    }
    block(0);
  }
  for (const auto& l : lines) g.text += l + "\n";
  return g;
}

}  // namespace

TEST(ScannerProperties, ConjunctionIsLosslessAgainstRawNesting) {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = random_annotated_file(rng);
    const auto r = scan_one("gen.c", g.text);
    ASSERT_TRUE(r.diagnostics.empty()) << g.text;
    // Every content line inside some block belongs to the innermost VP whose
    // span covers it; that VP's condition must equal the literal stack.
    for (std::size_t i = 0; i < g.context.size(); ++i) {
      const auto& lits = g.context[i];
      if (lits.empty()) continue;
      const std::size_t line = i + 1;
      const VariationPoint* inner = nullptr;
      for (const auto& vp : r.table.variation_points)
        if (vp.span.start <= line && line <= vp.span.end &&
            (!inner || inner->span.lines() > vp.span.lines()))
          inner = &vp;
      ASSERT_NE(inner, nullptr) << g.text << " line " << line;
      std::set<std::string> names;
      for (const auto& [n, neg] : lits) names.insert(n);
      std::vector<std::string> order(names.begin(), names.end());
      for (std::uint32_t bits = 0; bits < (1u << order.size()); ++bits) {
        auto selected = [&](const std::string& n) {
          const auto k = std::find(order.begin(), order.end(), n) - order.begin();
          return (bits >> k & 1u) != 0;
        };
        bool expected = true;
        for (const auto& [n, neg] : lits) expected = expected && (selected(n) != neg);
        ASSERT_EQ(inner->condition.evaluate(selected), expected)
            << g.text << " line " << line << " cond " << inner->condition.str();
      }
      EXPECT_EQ(inner->mentioned_features, names);
    }
  }
}

TEST(ScannerProperties, FileOrderDoesNotMatter) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SourceFile> files;
    const std::size_t n = support::uniform(rng, 1, 6);
    for (std::size_t i = 0; i < n; ++i)
      files.push_back({"src/f" + std::to_string(i) + (support::coin(rng) ? ".c" : ".js"),
                       random_annotated_file(rng).text});
    const auto a = scan_files(files, ScanConfig::defaults());
    std::shuffle(files.begin(), files.end(), rng);
    const auto b = scan_files(files, ScanConfig::defaults());
    ASSERT_EQ(a.table, b.table);
    ASSERT_EQ(to_json(a.table).dump(), to_json(b.table).dump());
  }
}
