#include "clens/pipeline.hpp"

#include "clens/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace clens {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// config

namespace {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::Config, std::string("config: '") + key + "' has the wrong type");
  }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw Error(Errc::Config, std::string("config: unknown key '") + key + "' in " + where);
    }
  }
}

// Settings that change candidates.json and the per-neuron label outputs.
// Labels are stored per (neuron, case), so the case set is not among them.
ordered_json label_settings(const PipelineConfig& c) {
  ordered_json j;
  j["hierarchy"] = c.hierarchy;
  j["annotations"] = c.annotations;
  j["activations"] = c.activations;
  j["induction"] = {{"k", c.induction.k},
                    {"beam_width", c.induction.beam_width},
                    {"ascent_depth", c.induction.ascent_depth},
                    {"max_conjuncts", c.induction.max_conjuncts},
                    {"conjunction_mode", to_string(c.induction.mode)}};
  j["lenient_annotations"] = c.lenient_annotations;
  return j;
}

// Settings that change the verification report and run summary.
ordered_json verify_settings(const PipelineConfig& c) {
  ordered_json j;
  j["manifest"] = c.manifest;
  j["verification_activations"] = c.verification_activations;
  auto cases = ordered_json::array();
  for (CaseId cs : c.cases) cases.push_back(to_string(cs));
  j["cases"] = std::move(cases);
  j["split"] = {{"ratio", c.verification.ratio}, {"seed", c.verification.seed}};
  j["fire_threshold"] = c.verification.fire_threshold;
  return j;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text, const fs::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Config, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::Config, "config: expected a JSON object");
  reject_unknown(j,
                 {"hierarchy", "annotations", "activations", "manifest", "verification_activations", "output_dir",
                  "induction", "cases", "split", "fire_threshold", "lenient_annotations", "jobs"},
                 "top level");

  PipelineConfig c;
  c.base_dir = base_dir;
  c.hierarchy = get_or<std::string>(j, "hierarchy", "");
  c.annotations = get_or<std::string>(j, "annotations", "");
  c.activations = get_or<std::string>(j, "activations", "");
  c.manifest = get_or<std::string>(j, "manifest", "");
  c.verification_activations = get_or<std::string>(j, "verification_activations", "");
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir);

  if (j.contains("induction")) {
    const auto& ind = j.at("induction");
    reject_unknown(ind, {"k", "beam_width", "ascent_depth", "max_conjuncts", "conjunction_mode"}, "induction");
    c.induction.k = get_or<std::size_t>(ind, "k", c.induction.k);
    c.induction.beam_width = get_or<std::size_t>(ind, "beam_width", c.induction.beam_width);
    c.induction.ascent_depth = get_or<unsigned>(ind, "ascent_depth", c.induction.ascent_depth);
    c.induction.max_conjuncts = get_or<std::size_t>(ind, "max_conjuncts", c.induction.max_conjuncts);
    c.induction.mode = parse_conjunction_mode(get_or<std::string>(ind, "conjunction_mode", to_string(c.induction.mode)));
  }
  if (j.contains("cases")) {
    c.cases.clear();
    for (const auto& cs : get_or<std::vector<std::string>>(j, "cases", {})) c.cases.push_back(parse_case(cs));
  }
  if (j.contains("split")) {
    const auto& sp = j.at("split");
    reject_unknown(sp, {"ratio", "seed"}, "split");
    c.verification.ratio = get_or<double>(sp, "ratio", c.verification.ratio);
    c.verification.seed = get_or<std::uint64_t>(sp, "seed", c.verification.seed);
  }
  c.verification.fire_threshold = get_or<double>(j, "fire_threshold", c.verification.fire_threshold);
  c.lenient_annotations = get_or<bool>(j, "lenient_annotations", c.lenient_annotations);
  c.jobs = get_or<std::size_t>(j, "jobs", c.jobs);
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

std::string PipelineConfig::to_json_text() const {
  ordered_json j = label_settings(*this);
  const ordered_json v = verify_settings(*this);
  for (const auto& [key, value] : v.items()) j[key] = value;
  j["output_dir"] = output_dir;
  j["jobs"] = jobs;
  return j.dump(2) + "\n";
}

void PipelineConfig::validate() const {
  if (induction.k == 0) throw Error(Errc::Config, "config: k must be at least 1");
  if (induction.max_conjuncts == 0) throw Error(Errc::Config, "config: max_conjuncts must be at least 1");
  if (cases.empty()) throw Error(Errc::Config, "config: no cases selected");
  if (!(verification.ratio > 0.0 && verification.ratio < 1.0)) {
    throw Error(Errc::Config, "config: split ratio must lie in (0, 1)");
  }
}

fs::path PipelineConfig::resolve(const std::string& p) const {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

std::string PipelineConfig::label_fingerprint() const { return fnv1a_hex(label_settings(*this).dump()); }

std::string PipelineConfig::verify_fingerprint() const {
  auto j = verify_settings(*this);
  if (neuron) j["neuron"] = *neuron;  // a single-neuron report must not replace the full one
  return fnv1a_hex(j.dump());
}

fs::path PipelineConfig::run_dir() const { return resolve(output_dir) / ("run-" + label_fingerprint()); }

fs::path PipelineConfig::report_dir() const { return run_dir() / ("verify-" + verify_fingerprint()); }

// ---------------------------------------------------------------------------
// stages

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write '" + path.string() + "'");
  out << text;
}

std::string need_path(const PipelineConfig& cfg, const std::string& value, const char* key) {
  if (value.empty()) throw Error(Errc::Config, std::string("config: '") + key + "' is not set");
  return cfg.resolve(value).string();
}

fs::path case_dir(const PipelineConfig& cfg, NeuronId n, CaseId c) {
  return cfg.run_dir() / ("neuron_" + std::to_string(n)) / (std::string("case_") + to_string(c));
}

std::vector<NeuronId> target_neurons(const PipelineConfig& cfg, const ActivationMatrix* m) {
  if (cfg.neuron) {
    if (m) (void)m->column(*cfg.neuron);
    return {*cfg.neuron};
  }
  const fs::path path = cfg.run_dir() / "candidates.json";
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "'" + path.string() + "' not found; run `select` first or pass --neuron");
  try {
    return nlohmann::json::parse(in).get<std::vector<NeuronId>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, path.string() + ": " + e.what());
  }
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

std::string case_label(NeuronId n, CaseId c) {
  return "neuron " + std::to_string(n) + " case " + to_string(c);
}

}  // namespace

std::vector<NeuronId> cmd_select(const PipelineConfig& cfg) {
  cfg.validate();
  const auto m = ActivationMatrix::load_file(need_path(cfg, cfg.activations, "activations"));
  const auto neurons = select_candidate_neurons(m);
  write_text(cfg.run_dir() / "candidates.json", nlohmann::json(neurons).dump() + "\n");
  return neurons;
}

LabelStats cmd_label(const PipelineConfig& cfg) {
  cfg.validate();
  const auto m = ActivationMatrix::load_file(need_path(cfg, cfg.activations, "activations"));
  const auto neurons = target_neurons(cfg, &m);
  const auto kb = KnowledgeBase::load_files(need_path(cfg, cfg.hierarchy, "hierarchy"),
                                            need_path(cfg, cfg.annotations, "annotations"),
                                            AnnotationOptions{cfg.lenient_annotations});

  struct Outcome {
    std::size_t analyses = 0;
    std::vector<CaseId> skipped;
    std::vector<std::string> warnings;
  };
  std::vector<Outcome> outcomes(neurons.size());

  parallel_for(neurons.size(), cfg.jobs, [&](std::size_t i) {
    const NeuronId n = neurons[i];
    for (CaseId c : cfg.cases) {
      const fs::path dir = case_dir(cfg, n, c);
      fs::create_directories(dir);
      ExampleSplit split;
      try {
        split = partition(m, n, c);
      } catch (const Error& e) {
        if (e.code() != Errc::DegenerateNeuron) throw;
        outcomes[i].skipped.push_back(c);
        outcomes[i].warnings.push_back("skipping " + case_label(n, c) + ": " + e.what());
        ordered_json j{{"neuron", n}, {"case", to_string(c)}, {"reason", e.what()}};
        write_text(dir / "skipped.json", j.dump(2) + "\n");
        continue;
      }
      const SolutionList sl = induce(split, kb, cfg.induction);
      const ReducedConceptList rc = reduce_concepts(sl, kb.hierarchy);

      ordered_json sj{{"neuron", n},
                      {"case", to_string(c)},
                      {"threshold", split.threshold},
                      {"positives", split.positives.size()},
                      {"negatives", split.negatives.size()}};
      write_text(dir / "split.json", sj.dump(2) + "\n");
      std::ostringstream sol;
      write_solutions_json(sol, sl);
      write_text(dir / "solutions.json", sol.str());
      std::ostringstream con;
      write_concepts_json(con, rc, cfg.induction.mode);
      write_text(dir / "concepts.json", con.str());
      ++outcomes[i].analyses;
    }
  });

  LabelStats stats;
  for (std::size_t i = 0; i < neurons.size(); ++i) {
    for (const auto& w : outcomes[i].warnings) std::cerr << "warning: " << w << '\n';
    stats.analyses += outcomes[i].analyses;
    for (CaseId c : outcomes[i].skipped) stats.skipped.emplace_back(neurons[i], c);
  }
  return stats;
}

VerifyStats cmd_verify(const PipelineConfig& cfg) {
  cfg.validate();
  const auto manifest = VerificationManifest::load_file(need_path(cfg, cfg.manifest, "manifest"));
  const auto vm = ActivationMatrix::load_file(need_path(cfg, cfg.verification_activations, "verification_activations"));
  const auto neurons = target_neurons(cfg, nullptr);
  if (neurons.empty()) throw Error(Errc::Domain, "no neurons to verify");

  struct Outcome {
    NeuronVerification result;
    std::vector<CaseId> empty_pools;
    std::vector<std::string> warnings;
  };
  std::vector<Outcome> outcomes(neurons.size());

  parallel_for(neurons.size(), cfg.jobs, [&](std::size_t i) {
    const NeuronId n = neurons[i];
    auto& out = outcomes[i];
    out.result.neuron = n;
    for (CaseId c : cfg.cases) {
      const fs::path dir = case_dir(cfg, n, c);
      if (fs::exists(dir / "skipped.json")) continue;
      std::ifstream in(dir / "concepts.json");
      if (!in) {
        throw Error(Errc::Io, "'" + (dir / "concepts.json").string() + "' not found; run `label` first");
      }
      const ReducedConceptList rc = read_concepts_json(in);
      try {
        out.result.cases.push_back(verify_case(n, c, rc, manifest, vm, cfg.verification));
      } catch (const Error& e) {
        if (e.code() != Errc::EmptyPool && e.code() != Errc::Split) throw;
        out.empty_pools.push_back(c);
        out.warnings.push_back("no verification for " + case_label(n, c) + ": " + e.what());
      }
    }
  });

  VerifyStats stats;
  std::vector<NeuronVerification> results;
  for (std::size_t i = 0; i < neurons.size(); ++i) {
    for (const auto& w : outcomes[i].warnings) std::cerr << "warning: " << w << '\n';
    stats.verified += outcomes[i].result.cases.size();
    for (CaseId c : outcomes[i].empty_pools) stats.empty_pools.emplace_back(neurons[i], c);
    results.push_back(std::move(outcomes[i].result));
  }
  const auto report = build_report(std::move(results), cfg.verification, cfg.induction.mode);
  std::ostringstream js;
  write_report_json(js, report);
  write_text(cfg.report_dir() / "report.json", js.str());
  std::ostringstream md;
  write_report_markdown(md, report);
  write_text(cfg.report_dir() / "report.md", md.str());
  return stats;
}

namespace {

ordered_json pairs_json(const std::vector<std::pair<NeuronId, CaseId>>& v) {
  auto arr = ordered_json::array();
  for (const auto& [n, c] : v) arr.push_back({{"neuron", n}, {"case", to_string(c)}});
  return arr;
}

ordered_json counts_json(const RunSummary& s) {
  ordered_json j;
  j["label_fingerprint"] = s.label_fingerprint;
  j["verify_fingerprint"] = s.verify_fingerprint;
  j["candidates"] = s.candidates;
  j["analyses"] = s.label.analyses;
  j["skipped"] = pairs_json(s.label.skipped);
  j["verified"] = s.verify.verified;
  j["empty_pools"] = pairs_json(s.verify.empty_pools);
  return j;
}

template <class Fn>
auto timed_stage(const char* name, double& seconds, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto result = fn();
    seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  } catch (const Error& e) {
    throw Error(e.code(), std::string(name) + " stage failed: " + e.what());
  }
}

}  // namespace

RunSummary cmd_run(const PipelineConfig& cfg) {
  RunSummary s;
  s.label_fingerprint = cfg.label_fingerprint();
  s.verify_fingerprint = cfg.verify_fingerprint();
  const auto candidates = timed_stage("select", s.select_seconds, [&] { return cmd_select(cfg); });
  s.candidates = cfg.neuron ? 1 : candidates.size();
  s.label = timed_stage("label", s.label_seconds, [&] { return cmd_label(cfg); });
  s.verify = timed_stage("verify", s.verify_seconds, [&] { return cmd_verify(cfg); });
  write_text(cfg.report_dir() / "summary.json", counts_json(s).dump(2) + "\n");
  return s;
}

std::string summary_json(const RunSummary& s) {
  ordered_json j = counts_json(s);
  j["seconds"] = {{"select", s.select_seconds}, {"label", s.label_seconds}, {"verify", s.verify_seconds}};
  return j.dump(2) + "\n";
}

}  // namespace clens
