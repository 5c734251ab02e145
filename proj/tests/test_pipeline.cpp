#include "clens/error.hpp"
#include "clens/fixture.hpp"
#include "clens/induction.hpp"
#include "clens/pipeline.hpp"
#include "clens/verify.hpp"
#include "tree.hpp"

#include <doctest.h>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <sstream>

using namespace clens;
namespace fs = std::filesystem;
using clens::testing::read_tree;
using clens::testing::scratch_dir;
using clens::testing::slurp;

namespace {

PipelineConfig micro_config(const std::string& name, std::uint64_t seed = 1) {
  const auto dir = scratch_dir(name);
  auto spec = FixtureSpec::micro();
  spec.seed = seed;
  write_fixture(make_fixture(spec), dir);
  return PipelineConfig::load_file(dir / "config.json");
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

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults") {
    const auto c = PipelineConfig::from_json_text("{}", "/base");
    CHECK(c.induction.k == 50);
    CHECK(c.induction.beam_width == 32);
    CHECK(c.induction.ascent_depth == 1);
    CHECK(c.induction.max_conjuncts == 2);
    CHECK(c.induction.mode == ConjunctionMode::SeparateFillers);
    CHECK(c.cases.size() == 3);
    CHECK(c.verification.ratio == 0.8);
    CHECK(c.verification.fire_threshold == 0.0);
    CHECK(c.output_dir == "out");
  }
  SUBCASE("values and relative path resolution") {
    const auto c = PipelineConfig::from_json_text(
        R"({"hierarchy": "h.tsv", "activations": "/abs/a.csv", "cases": ["III", "I"],
            "induction": {"k": 10, "conjunction_mode": "single-filler"},
            "split": {"ratio": 0.75, "seed": 9}, "fire_threshold": 0.5})",
        "/base/dir");
    CHECK(c.resolve(c.hierarchy) == fs::path("/base/dir/h.tsv"));
    CHECK(c.resolve(c.activations) == fs::path("/abs/a.csv"));
    CHECK(c.cases == std::vector<CaseId>{CaseId::III, CaseId::I});
    CHECK(c.induction.k == 10);
    CHECK(c.induction.mode == ConjunctionMode::SingleFiller);
    CHECK(c.verification.ratio == 0.75);
    CHECK(c.verification.seed == 9);
    CHECK(c.verification.fire_threshold == 0.5);
  }
  SUBCASE("invalid configs") {
    CHECK(code_of([] { PipelineConfig::from_json_text(R"({"hierachy": "typo"})", "."); }) == Errc::Config);
    CHECK(code_of([] { PipelineConfig::from_json_text(R"({"induction": {"beam": 3}})", "."); }) == Errc::Config);
    CHECK(code_of([] { PipelineConfig::from_json_text(R"({"induction": {"k": 0}})", "."); }) == Errc::Config);
    CHECK(code_of([] { PipelineConfig::from_json_text(R"({"cases": []})", "."); }) == Errc::Config);
    CHECK(code_of([] { PipelineConfig::from_json_text(R"({"cases": ["IV"]})", "."); }) == Errc::Config);
    CHECK(code_of([] { PipelineConfig::from_json_text(R"({"split": {"ratio": 1.0}})", "."); }) == Errc::Config);
    CHECK(code_of([] { PipelineConfig::from_json_text(R"({"fire_threshold": "high"})", "."); }) == Errc::Config);
    CHECK(code_of([] { PipelineConfig::from_json_text("[", "."); }) == Errc::Config);
    CHECK(code_of([] { PipelineConfig::load_file("/nonexistent/config.json"); }) == Errc::Io);
  }
  SUBCASE("label fingerprint follows label settings only") {
    auto a = PipelineConfig::from_json_text(R"({"activations": "a.csv"})", ".");
    auto b = a;
    b.jobs = 8;
    b.neuron = 3;
    b.cases = {CaseId::I};
    b.verification.seed = 43;
    b.verification.fire_threshold = 0.5;
    CHECK(a.label_fingerprint() == b.label_fingerprint());
    CHECK(a.label_fingerprint().size() == 16);
    CHECK(a.run_dir() == b.run_dir());
    CHECK(a.run_dir().filename().string() == "run-" + a.label_fingerprint());
    b.induction.beam_width += 1;
    CHECK(a.label_fingerprint() != b.label_fingerprint());
  }
  SUBCASE("verify fingerprint follows verification settings") {
    auto a = PipelineConfig::from_json_text(R"({"activations": "a.csv"})", ".");
    auto b = a;
    b.jobs = 8;
    b.induction.k = 5;
    CHECK(a.verify_fingerprint() == b.verify_fingerprint());
    CHECK(a.report_dir().parent_path() == a.run_dir());
    CHECK(a.report_dir().filename().string() == "verify-" + a.verify_fingerprint());
    auto c = a;
    c.verification.seed = 43;
    CHECK(a.verify_fingerprint() != c.verify_fingerprint());
    c = a;
    c.cases = {CaseId::I};
    CHECK(a.verify_fingerprint() != c.verify_fingerprint());
    c = a;
    c.neuron = 3;
    CHECK(a.verify_fingerprint() != c.verify_fingerprint());
  }
  SUBCASE("to_json_text round-trips") {
    const auto a = PipelineConfig::from_json_text(R"({"hierarchy": "h.tsv", "cases": ["II"], "jobs": 3})", "/b");
    const auto b = PipelineConfig::from_json_text(a.to_json_text(), "/b");
    CHECK(a.label_fingerprint() == b.label_fingerprint());
    CHECK(a.verify_fingerprint() == b.verify_fingerprint());
    CHECK(b.jobs == 3);
  }
}

TEST_CASE("select") {
  const auto dir = scratch_dir("select");
  SUBCASE("all-zero matrix selects nothing") {
    write_file(dir / "a.csv", "image_id,0,1\na,0,0\nb,0,0\n");
    const auto cfg = PipelineConfig::from_json_text(R"({"activations": "a.csv"})", dir);
    CHECK(cmd_select(cfg).empty());
    CHECK(slurp(cfg.run_dir() / "candidates.json") == "[]\n");
  }
  SUBCASE("empty matrix is an error") {
    write_file(dir / "a.csv", "image_id,0,1\n");
    const auto cfg = PipelineConfig::from_json_text(R"({"activations": "a.csv"})", dir);
    CHECK(code_of([&] { cmd_select(cfg); }) == Errc::Domain);
  }
  SUBCASE("missing activations path") {
    const auto cfg = PipelineConfig::from_json_text("{}", dir);
    CHECK(code_of([&] { cmd_select(cfg); }) == Errc::Config);
    const auto cfg2 = PipelineConfig::from_json_text(R"({"activations": "nope.csv"})", dir);
    CHECK(code_of([&] { cmd_select(cfg2); }) == Errc::Io);
  }
}

TEST_CASE("label") {
  auto cfg = micro_config("label");
  SUBCASE("needs candidates or an explicit neuron") {
    CHECK(code_of([&] { cmd_label(cfg); }) == Errc::Io);
  }
  SUBCASE("single case gives exactly one output set") {
    cfg.neuron = 1;
    cfg.cases = {CaseId::II};
    const auto stats = cmd_label(cfg);
    CHECK(stats.analyses == 1);
    const auto tree = read_tree(cfg.run_dir());
    CHECK(tree.size() == 3);
    CHECK(tree.count("neuron_1/case_II/solutions.json"));
    CHECK(tree.count("neuron_1/case_II/concepts.json"));
    const auto split = nlohmann::json::parse(tree.at("neuron_1/case_II/split.json"));
    CHECK(split["neuron"] == 1);
    CHECK(split["case"] == "II");
  }
  SUBCASE("unknown neuron") {
    cfg.neuron = 999;
    CHECK(code_of([&] { cmd_label(cfg); }) == Errc::Domain);
  }
  SUBCASE("degenerate neuron is skipped, not fatal") {
    // neuron 0 of the micro fixture is unplanted and may fire; force an all-zero column
    const auto path = cfg.resolve(cfg.activations);
    std::ifstream in(path);
    auto m = ActivationMatrix::load(in);
    auto v = m.values();
    v.col(0).setZero();
    std::ofstream out(path);
    ActivationMatrix(m.image_ids(), m.neuron_ids(), v).write_csv(out);
    out.close();
    cfg.neuron = m.neuron_ids()[0];
    const auto stats = cmd_label(cfg);
    CHECK(stats.analyses == 0);
    CHECK(stats.skipped.size() == 3);
    CHECK(fs::exists(cfg.run_dir() / ("neuron_" + std::to_string(*cfg.neuron)) / "case_I" / "skipped.json"));
  }
}

TEST_CASE("verify") {
  auto cfg = micro_config("verify");
  SUBCASE("missing manifest is named") {
    cfg.manifest = "does-not-exist.json";
    try {
      cmd_verify(cfg);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::Io);
      CHECK(std::string(e.what()).find("does-not-exist.json") != std::string::npos);
    }
  }
  SUBCASE("missing concept lists are named") {
    cfg.neuron = 1;
    try {
      cmd_verify(cfg);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::Io);
      CHECK(std::string(e.what()).find("concepts.json") != std::string::npos);
    }
  }
  SUBCASE("threshold override is echoed in the report") {
    cfg.verification.fire_threshold = 2.25;
    cmd_run(cfg);
    const auto md = slurp(cfg.report_dir() / "report.md");
    CHECK(md.find("activation > 2.25") != std::string::npos);
    const auto j = nlohmann::json::parse(slurp(cfg.report_dir() / "report.json"));
    CHECK(j["fire_threshold"] == 2.25);
  }
}

TEST_CASE("run on the micro fixture") {
  auto cfg = micro_config("run");
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = cmd_run(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 10.0);
  CHECK(s.candidates == 4);
  CHECK(s.label.analyses == 12);
  CHECK(s.verify.verified == 12);

  const auto summary = nlohmann::json::parse(slurp(cfg.report_dir() / "summary.json"));
  CHECK(summary["analyses"] == 12);
  CHECK(summary["candidates"] == 4);
  CHECK_FALSE(summary.contains("seconds"));
  CHECK(nlohmann::json::parse(summary_json(s)).contains("seconds"));

  const auto first = read_tree(cfg.run_dir());
  cfg.jobs = 3;  // worker count must not change any byte
  cmd_run(cfg);
  CHECK(read_tree(cfg.run_dir()) == first);

  SUBCASE("cases={I} runs a third of the analyses") {
    auto one = cfg;
    one.cases = {CaseId::I};
    const auto s1 = cmd_run(one);
    CHECK(s1.label.analyses * 3 == s.label.analyses);
    CHECK(one.run_dir() == cfg.run_dir());
    CHECK(one.report_dir() != cfg.report_dir());
    CHECK(fs::exists(cfg.report_dir() / "report.json"));
  }
}

TEST_CASE("inputs in the exporter's formats") {
  // activation CSV with comment header and 6-significant-digit values, and a
  // manifest with sorted relative paths per concept directory
  const auto dir = scratch_dir("exporter-formats");
  write_file(dir / "h.tsv", "WN_Table\tFurniture\nLamp\tFurniture\n");
  write_file(dir / "a.tsv", "img1\tWN_Table\nimg2\tWN_Table\nimg3\tLamp\n");
  write_file(dir / "act.csv",
             "# exported from dense_1 (post-activation)\nimage_id,0,1\n"
             "img1,1.23457,0\nimg2,0.617284,2.5\nimg3,0,0.000123457\n");
  write_file(dir / "manifest.json", R"({"lamp": ["lamp/a.jpg", "lamp/b.jpg"],
                                        "table": ["table/a.jpg", "table/b.jpg", "table/c.jpg"]})");
  write_file(dir / "verify.csv",
             "# exported from dense_1 (post-activation)\nimage_id,0,1\n"
             "lamp/a.jpg,0,1\nlamp/b.jpg,0,1\ntable/a.jpg,3,0\ntable/b.jpg,2,0\ntable/c.jpg,0,0\n");
  write_file(dir / "config.json",
             R"({"hierarchy": "h.tsv", "annotations": "a.tsv", "activations": "act.csv",
                 "manifest": "manifest.json", "verification_activations": "verify.csv", "cases": ["I"]})");
  auto cfg = PipelineConfig::load_file(dir / "config.json");
  cfg.neuron = 0;
  const auto s = cmd_run(cfg);
  CHECK(s.label.analyses == 1);
  CHECK(s.verify.verified == 1);
  const auto rc = [&] {
    std::ifstream in(cfg.run_dir() / "neuron_0" / "case_I" / "concepts.json");
    return read_concepts_json(in);
  }();
  CHECK(std::find(rc.concepts.begin(), rc.concepts.end(), "table") != rc.concepts.end());
  std::ifstream min(dir / "manifest.json");
  const auto manifest = VerificationManifest::load(min);
  ReducedConceptList own;
  for (const auto& [name, images] : manifest.images) own.concepts.push_back(name);
  const auto pool = assemble_pool(own, manifest);
  CHECK(pool.missing_concepts.empty());
  CHECK(pool.images.size() == 5);
  const auto report = nlohmann::json::parse(slurp(cfg.report_dir() / "report.json"));
  CHECK(report["neurons"][0]["cases"][0]["missing_concepts"] == nlohmann::json{"furniture"});
}
