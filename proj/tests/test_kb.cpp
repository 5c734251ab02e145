#include "clens/error.hpp"
#include "clens/kb.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace clens;
using clens::testing::MicroKb;

namespace {

HierarchyIndex load_text(const std::string& text) {
  std::istringstream in(text);
  return HierarchyIndex::load(in);
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected clens::Error");
  return Errc::Io;
}

}  // namespace

TEST_CASE("normalize_label") {
  CHECK(normalize_label("WN_Table") == "table");
  CHECK(normalize_label("table") == "table");
  CHECK(normalize_label("Table Lamp") == "table_lamp");
  CHECK(normalize_label("  Table \t  Lamp ") == "table_lamp");
  CHECK(normalize_label("wn_chair") == "wn_chair");  // prefix match is case-sensitive
  CHECK(code_of([] { normalize_label(""); }) == Errc::InvalidLabel);
  CHECK(code_of([] { normalize_label("WN_"); }) == Errc::InvalidLabel);
  CHECK(code_of([] { normalize_label("   "); }) == Errc::InvalidLabel);
}

TEST_CASE("conjunction mode names round-trip") {
  for (auto m : {ConjunctionMode::SeparateFillers, ConjunctionMode::SingleFiller})
    CHECK(parse_conjunction_mode(to_string(m)) == m);
  CHECK(code_of([] { parse_conjunction_mode("both"); }) == Errc::Config);
}

TEST_CASE("hierarchy loading") {
  SUBCASE("transitivity") {
    auto h = load_text("a\tb\nb\tc\n");
    CHECK(h.is_subclass_of(h.id("a"), h.id("c")));
    CHECK_FALSE(h.is_subclass_of(h.id("c"), h.id("a")));
    CHECK(h.is_subclass_of(h.id("b"), h.id("b")));
  }
  SUBCASE("self-loop dropped") {
    auto h = load_text("a\ta\n");
    CHECK(h.size() == 1);
    CHECK(h.edge_count() == 0);
  }
  SUBCASE("duplicate edges collapse") {
    auto h = load_text("a\tb\na\tb\nA\tb\n");
    CHECK(h.size() == 2);
    CHECK(h.edge_count() == 1);
  }
  SUBCASE("cycle makes members mutually subsumed") {
    auto h = load_text("a\tb\nb\ta\nb\tc\n");
    CHECK(h.is_subclass_of(h.id("a"), h.id("b")));
    CHECK(h.is_subclass_of(h.id("b"), h.id("a")));
    CHECK(h.is_subclass_of(h.id("a"), h.id("c")));
    CHECK(h.component(h.id("a")) == h.component(h.id("b")));
    CHECK(h.component_count() == 2);
  }
  SUBCASE("comments, blank lines and CRLF") {
    auto h = load_text("# header\n\r\nWN_Table\tFurniture\r\n  # indented comment\n");
    CHECK(h.size() == 2);
    CHECK(h.is_subclass_of(h.id("WN_Table"), h.id("Furniture")));
  }
  SUBCASE("labels are interned by normalized form") {
    auto h = load_text("WN_Table\tFurniture\nTable\tObject\n");
    CHECK(h.id("WN_Table") == h.id("Table"));
    CHECK(h.is_subclass_of(h.id("WN_Table"), h.id("Object")));
    CHECK(h.label(h.id("Table")) == "WN_Table");  // first spelling kept
    CHECK(h.normalized(h.id("Table")) == "table");
  }
  SUBCASE("malformed records carry the line number") {
    for (const char* text : {"a\tb\nonly_one_column\n", "a\tb\nx\ty\tz\n", "a\tb\n\tb\n"}) {
      try {
        load_text(text);
        FAIL("expected parse error");
      } catch (const Error& e) {
        CHECK(e.code() == Errc::Parse);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
      }
    }
  }
  SUBCASE("unknown and unregistered lookups") {
    auto h = load_text("a\tb\n");
    CHECK_FALSE(h.find("zzz").has_value());
    CHECK(code_of([&] { h.id("zzz"); }) == Errc::UnknownClass);
    CHECK(code_of([&] { h.is_subclass_of(0, 99); }) == Errc::Domain);
    CHECK(code_of([&] { h.is_subclass_of(99, 0); }) == Errc::Domain);
  }
  SUBCASE("missing file") {
    CHECK(code_of([] { HierarchyIndex::load_file("/nonexistent/h.tsv"); }) == Errc::Io);
  }
}

TEST_CASE("ancestors_within") {
  auto h = load_text("a\tb\nb\tc\nc\td\na\te\n");
  auto names = [&](std::vector<ClassId> ids) {
    std::vector<std::string> out;
    for (auto c : ids) out.push_back(h.normalized(c));
    std::sort(out.begin(), out.end());
    return out;
  };
  CHECK(names(h.ancestors_within(h.id("a"), 0)) == std::vector<std::string>{"a"});
  CHECK(names(h.ancestors_within(h.id("a"), 1)) == std::vector<std::string>{"a", "b", "e"});
  CHECK(names(h.ancestors_within(h.id("a"), 2)) == std::vector<std::string>{"a", "b", "c", "e"});
}

TEST_CASE("is_subclass_of matches Floyd-Warshall on random graphs") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + testing::below(rng, 49);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    const std::size_t m = testing::below(rng, 2 * n);
    for (std::size_t e = 0; e < m; ++e) edges.emplace_back(testing::below(rng, n), testing::below(rng, n));
    const auto reach = testing::floyd_warshall(n, edges);

    std::vector<std::pair<std::string, std::string>> named;
    for (auto [c, p] : edges) named.emplace_back(MicroKb::label(c), MicroKb::label(p));
    std::vector<std::string> all;
    for (std::size_t i = 0; i < n; ++i) all.push_back(MicroKb::label(i));
    const auto h = HierarchyIndex::from_edges(named, all);
    REQUIRE(h.size() == n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        CHECK_MESSAGE(h.is_subclass_of(h.id(MicroKb::label(i)), h.id(MicroKb::label(j))) == reach[i][j],
                      "trial " << trial << " pair " << i << "," << j);
  }
}

TEST_CASE("class expressions") {
  auto h = load_text("WN_Window\tOpening\nFloor\tSurface\n");
  SUBCASE("canonical form sorts and dedups conjuncts") {
    auto e = ClassExpression::existential({h.id("Window"), h.id("Floor"), h.id("WN_Window")}, h);
    CHECK(e.size() == 2);
    CHECK(e.canonical(h) == "∃imageContains.(floor ⊓ window)");
  }
  SUBCASE("empty conjunction rejected") {
    CHECK(code_of([&] { ClassExpression::existential({}, h); }) == Errc::Domain);
  }
  SUBCASE("parse accepts canonical, reference-listing and ASCII spellings") {
    const auto want = ClassExpression::existential({h.id("Window"), h.id("Floor")}, h);
    CHECK(parse_expression("∃imageContains.(floor ⊓ window)", h) == want);
    CHECK(parse_expression("∃ :imageContains.((:WN_Window) ⊓ (:Floor))", h) == want);
    CHECK(parse_expression("exists imageContains.(Floor and Window)", h) == want);
    CHECK(parse_expression("∃ :imageContains.(:WN_Window)", h) ==
          ClassExpression::existential({h.id("Window")}, h));
  }
  SUBCASE("parse errors") {
    CHECK(code_of([&] { parse_expression("Window", h); }) == Errc::Parse);
    CHECK(code_of([&] { parse_expression("∃imageContains.(nope)", h); }) == Errc::UnknownClass);
  }
}

TEST_CASE("annotation loading") {
  auto h = load_text("WN_Table\tFurniture\nBed\tFurniture\n");
  SUBCASE("image contains both classes") {
    std::istringstream in("img1\tWN_Table\nimg1\tBed\n");
    auto ab = AnnotationStore::load(in, h);
    REQUIRE(ab.size() == 1);
    auto objs = ab.objects(ab.index("img1"));
    CHECK(objs.size() == 2);
    CHECK(std::count(objs.begin(), objs.end(), h.id("table")) == 1);
    CHECK(std::count(objs.begin(), objs.end(), h.id("bed")) == 1);
  }
  SUBCASE("empty input gives an empty store") {
    std::istringstream in("");
    CHECK(AnnotationStore::load(in, h).size() == 0);
  }
  SUBCASE("strict mode names the unknown label") {
    std::istringstream in("img1\tSofa\n");
    try {
      AnnotationStore::load(in, h);
      FAIL("expected unknown-class error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UnknownClass);
      CHECK(std::string(e.what()).find("Sofa") != std::string::npos);
    }
  }
  SUBCASE("lenient mode registers unknown labels") {
    std::istringstream in("img1\tSofa\nimg2\tBed\n");
    auto ab = AnnotationStore::load(in, h, {.lenient = true});
    CHECK(ab.size() == 2);
    REQUIRE(h.find("sofa").has_value());
    CHECK(h.parents(*h.find("sofa")).empty());
  }
  SUBCASE("image with an empty label is registered with no objects") {
    std::istringstream in("img1\t\nimg2\tBed\n");
    auto ab = AnnotationStore::load(in, h);
    CHECK(ab.size() == 2);
    CHECK(ab.objects(ab.index("img1")).empty());
  }
  SUBCASE("unknown image") {
    std::istringstream in("img1\tBed\n");
    auto ab = AnnotationStore::load(in, h);
    CHECK(code_of([&] { ab.index("img9"); }) == Errc::Domain);
    auto e = ClassExpression::existential({h.id("bed")}, h);
    CHECK(code_of([&] { entails("img9", e, ab, h); }) == Errc::Domain);
  }
}

TEST_CASE("entailment examples") {
  auto h = load_text("WN_Table\tFurniture\nBed\tFurniture\n");
  std::istringstream in("img1\tWN_Table\nimg1\tBed\nimg2\tTable\n");
  auto ab = AnnotationStore::load(in, h);
  const auto table = ClassExpression::existential({h.id("Table")}, h);
  const auto both = ClassExpression::existential({h.id("Table"), h.id("Bed")}, h);
  const auto furniture = ClassExpression::existential({h.id("Furniture")}, h);

  CHECK(entails("img2", table, ab, h));
  CHECK(entails("img1", both, ab, h, ConjunctionMode::SeparateFillers));
  CHECK_FALSE(entails("img1", both, ab, h, ConjunctionMode::SingleFiller));
  CHECK_FALSE(entails("img2", both, ab, h));
  CHECK(entails("img2", furniture, ab, h, ConjunctionMode::SingleFiller));
  const auto furn_table = ClassExpression::existential({h.id("Furniture"), h.id("Table")}, h);
  CHECK(entails("img2", furn_table, ab, h, ConjunctionMode::SingleFiller));
}

TEST_CASE("entailment agrees with the brute-force evaluator and its properties hold") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 150; ++trial) {
    const auto mk = testing::random_micro_kb(rng, 12, 10, /*cycles=*/true);
    const auto kb = mk.build();
    const auto& h = kb.hierarchy;
    auto id = [&](std::size_t c) { return h.id(MicroKb::label(c)); };
    for (std::size_t img = 0; img < mk.objects.size(); ++img) {
      const auto ii = kb.annotations.index(MicroKb::image(img));
      for (std::size_t a = 0; a < mk.classes; ++a) {
        const auto ea = ClassExpression::existential({id(a)}, h);
        const bool sa = kb.annotations.entails(ii, ea, h, ConjunctionMode::SeparateFillers);
        CHECK(sa == mk.entails(img, {a}, ConjunctionMode::SeparateFillers));
        // monotonicity along subsumption
        for (std::size_t d = 0; d < mk.classes; ++d) {
          if (!mk.reach[a][d] || !sa) continue;
          CHECK(kb.annotations.entails(ii, ClassExpression::existential({id(d)}, h), h,
                                       ConjunctionMode::SeparateFillers));
        }
        for (std::size_t b = a + 1; b < mk.classes; ++b) {
          const auto eab = ClassExpression::existential({id(a), id(b)}, h);
          for (auto mode : {ConjunctionMode::SeparateFillers, ConjunctionMode::SingleFiller}) {
            const bool got = kb.annotations.entails(ii, eab, h, mode);
            CHECK(got == mk.entails(img, {a, b}, mode));
            // adding a conjunct never creates entailment
            if (got) CHECK(kb.annotations.entails(ii, ea, h, mode));
          }
          if (kb.annotations.entails(ii, eab, h, ConjunctionMode::SingleFiller))
            CHECK(kb.annotations.entails(ii, eab, h, ConjunctionMode::SeparateFillers));
        }
      }
    }
  }
}
