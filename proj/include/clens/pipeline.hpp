#pragma once
// End-to-end orchestration: select candidate neurons, label them by concept
// induction, verify the labels. Labels live under a run directory named after
// the label settings; reports go one level down, named after the verify settings.

#include "clens/induction.hpp"
#include "clens/partition.hpp"
#include "clens/verify.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace clens {

struct PipelineConfig {
  // Paths as written in the config file; resolved() makes them absolute
  // against the config file's directory.
  std::string hierarchy;
  std::string annotations;
  std::string activations;
  std::string manifest;
  std::string verification_activations;
  std::string output_dir = "out";
  std::filesystem::path base_dir = ".";

  InductionConfig induction;
  std::vector<CaseId> cases{CaseId::I, CaseId::II, CaseId::III};
  VerificationSettings verification;
  bool lenient_annotations = false;

  // Per-invocation settings, not part of the fingerprint.
  std::size_t jobs = 1;
  std::optional<NeuronId> neuron;

  static PipelineConfig from_json_text(const std::string& text, const std::filesystem::path& base_dir);
  static PipelineConfig load_file(const std::filesystem::path& path);
  std::string to_json_text() const;

  /// Throws Errc::Config for k == 0, an empty case set or a ratio outside (0, 1).
  void validate() const;

  std::filesystem::path resolve(const std::string& p) const;
  /// 16 hex digits of FNV-1a over the settings that affect labels.
  std::string label_fingerprint() const;
  /// Same over the verification settings, the case set and any neuron override.
  std::string verify_fingerprint() const;
  /// output_dir/run-<label fp>: candidates.json, neuron_N/case_C/.
  std::filesystem::path run_dir() const;
  /// run_dir()/verify-<verify fp>: report.json, report.md, summary.json.
  std::filesystem::path report_dir() const;
};

struct LabelStats {
  std::size_t analyses = 0;
  std::vector<std::pair<NeuronId, CaseId>> skipped;  // degenerate neurons
};

struct VerifyStats {
  std::size_t verified = 0;
  std::vector<std::pair<NeuronId, CaseId>> empty_pools;
};

struct RunSummary {
  std::string label_fingerprint;
  std::string verify_fingerprint;
  std::size_t candidates = 0;
  LabelStats label;
  VerifyStats verify;
  double select_seconds = 0;
  double label_seconds = 0;
  double verify_seconds = 0;
};

/// Writes <run>/candidates.json. Throws Errc::Domain for an empty matrix.
std::vector<NeuronId> cmd_select(const PipelineConfig& cfg);

/// For each neuron (cfg.neuron, else candidates.json) and case writes
/// <run>/neuron_<n>/case_<c>/{split,solutions,concepts}.json, or skipped.json
/// for a degenerate neuron.
LabelStats cmd_label(const PipelineConfig& cfg);

/// Writes <run>/report.json and <run>/report.md.
VerifyStats cmd_verify(const PipelineConfig& cfg);

/// select -> label -> verify, then <run>/summary.json (counts only, so the
/// run tree stays byte-identical across reruns). Timings are returned.
RunSummary cmd_run(const PipelineConfig& cfg);

/// Machine-readable summary including timings.
std::string summary_json(const RunSummary& s);

}  // namespace clens
