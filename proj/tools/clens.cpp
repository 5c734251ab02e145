// clens: label hidden neurons with concepts from a class hierarchy and verify
// the labels on held-out images.

#include "clens/error.hpp"
#include "clens/fixture.hpp"
#include "clens/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Overrides {
  std::string config;
  std::optional<int> neuron;
  std::vector<std::string> cases;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<double> fire_threshold;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--neuron", o.neuron, "process only this neuron");
  cmd->add_option("--case", o.cases, "case(s) to run: I, II, III")->take_all();
  cmd->add_option("--seed", o.seed, "seed for the train/eval split");
  cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--fire-threshold", o.fire_threshold, "activation above which a neuron counts as firing");
}

clens::PipelineConfig resolve_config(const Overrides& o) {
  auto cfg = clens::PipelineConfig::load_file(o.config);
  if (o.neuron) cfg.neuron = *o.neuron;
  if (!o.cases.empty()) {
    cfg.cases.clear();
    for (const auto& c : o.cases) cfg.cases.push_back(clens::parse_case(c));
  }
  if (o.seed) cfg.verification.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.fire_threshold) cfg.verification.fire_threshold = *o.fire_threshold;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept induction labels for hidden neurons, with activation-percentage verification"};
  app.require_subcommand(1);

  Overrides o;
  auto* select = app.add_subcommand("select", "write the candidate neuron list");
  auto* label = app.add_subcommand("label", "induce class expressions and concept lists per neuron and case");
  auto* verify = app.add_subcommand("verify", "measure activation percentages on the verification images");
  auto* run = app.add_subcommand("run", "select, label and verify in sequence");
  for (auto* cmd : {select, label, verify, run}) add_common(cmd, o);

  auto* fixture = app.add_subcommand("fixture", "generate a synthetic planted-concept dataset");
  std::string fx_out;
  std::string fx_preset = "micro";
  std::uint64_t fx_seed = 1;
  std::optional<std::size_t> fx_images;
  std::optional<std::size_t> fx_classes;
  fixture->add_option("--out", fx_out, "output directory")->required();
  fixture->add_option("--preset", fx_preset, "micro or reference (1370 images x 64 neurons)")
      ->check(CLI::IsMember({"micro", "reference"}));
  fixture->add_option("--seed", fx_seed, "generator seed");
  fixture->add_option("--images", fx_images, "number of probe images");
  fixture->add_option("--classes", fx_classes, "hierarchy size");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fixture->parsed()) {
      auto spec = fx_preset == "reference" ? clens::FixtureSpec::reference() : clens::FixtureSpec::micro();
      spec.seed = fx_seed;
      if (fx_images) spec.images = *fx_images;
      if (fx_classes) spec.classes = *fx_classes;
      const auto fx = clens::make_fixture(spec);
      clens::write_fixture(fx, fx_out);
      std::cout << "wrote " << fx_preset << " fixture to " << fx_out << " (" << fx.activations.rows()
                << " images, " << fx.activations.cols() << " neurons, " << fx.planted.size()
                << " planted concepts)\n";
      return 0;
    }

    const auto cfg = resolve_config(o);
    if (select->parsed()) {
      const auto neurons = clens::cmd_select(cfg);
      std::cout << nlohmann::json(neurons).dump() << '\n';
    } else if (label->parsed()) {
      const auto stats = clens::cmd_label(cfg);
      std::cout << "analyses: " << stats.analyses << ", skipped: " << stats.skipped.size() << '\n';
    } else if (verify->parsed()) {
      const auto stats = clens::cmd_verify(cfg);
      std::cout << "verified: " << stats.verified << ", empty pools: " << stats.empty_pools.size() << '\n';
    } else if (run->parsed()) {
      std::cout << clens::summary_json(clens::cmd_run(cfg));
    }
    const bool reported = verify->parsed() || run->parsed();
    std::cerr << "outputs: " << (reported ? cfg.report_dir() : cfg.run_dir()).string() << '\n';
  } catch (const clens::Error& e) {
    std::cerr << "error (" << clens::to_string(e.code()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
