#pragma once
// Verification of hypothesized concept labels: per-neuron pools of
// concept-labeled images, a seeded train/eval split, and activation
// percentages measured on a second activation matrix.

#include "clens/induction.hpp"
#include "clens/partition.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace clens {

/// concept label (normalized) -> verification image ids, order preserved.
struct VerificationManifest {
  std::map<std::string, std::vector<std::string>> images;

  /// JSON object `{concept: [image ids]}`. Keys are normalized; duplicate ids
  /// within a concept and keys colliding after normalization are parse errors.
  static VerificationManifest load(std::istream& in);
  static VerificationManifest load_file(const std::string& path);
};

struct Pool {
  std::vector<std::string> images;
  std::vector<std::string> missing_concepts;
};

/// Union of the concepts' image lists, first occurrence wins. Concepts absent
/// from the manifest are reported, not fatal. Throws Errc::EmptyPool.
Pool assemble_pool(const ReducedConceptList& concepts, const VerificationManifest& manifest);

/// Seeded Fisher-Yates shuffle, then the first round(ratio * n) images form
/// the train part. Throws Errc::Split for fewer than two images or a ratio
/// outside (0, 1).
std::pair<std::vector<std::string>, std::vector<std::string>> split_pool(std::span<const std::string> pool,
                                                                         double ratio, std::uint64_t seed);

struct ActivationCount {
  std::size_t fired = 0;
  std::size_t total = 0;

  double percent() const noexcept {
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(fired) / static_cast<double>(total);
  }
};

/// Share of `images` whose activation for `neuron` exceeds fire_threshold.
/// Throws Errc::Domain for an empty list or an unknown image/neuron.
ActivationCount activation_percentage(const ActivationMatrix& m, NeuronId neuron,
                                      std::span<const std::string> images, double fire_threshold = 0.0);

struct CaseVerification {
  CaseId case_id = CaseId::I;
  std::vector<std::string> concepts;
  std::vector<std::string> missing_concepts;
  std::size_t pool_size = 0;
  std::size_t train_size = 0;
  std::size_t eval_size = 0;
  ActivationCount train;
  ActivationCount eval;
};

struct NeuronVerification {
  NeuronId neuron = 0;
  std::vector<CaseVerification> cases;  // ordered I, II, III; absent cases skipped
};

struct VerificationSettings {
  double ratio = 0.8;
  std::uint64_t seed = 42;
  double fire_threshold = 0.0;
};

CaseVerification verify_case(NeuronId neuron, CaseId case_id, const ReducedConceptList& concepts,
                             const VerificationManifest& manifest, const ActivationMatrix& verification,
                             const VerificationSettings& settings);

enum class SplitPart { Train, Eval };

/// high: above 90% in every reported case; low: below 1% in every case.
struct Buckets {
  std::size_t high = 0;
  std::size_t low = 0;
  std::size_t mid = 0;
  std::vector<NeuronId> high_neurons;
  std::vector<NeuronId> low_neurons;
};

Buckets bucket(std::span<const NeuronVerification> neurons, SplitPart part);

struct VerificationReport {
  ConjunctionMode mode = ConjunctionMode::SeparateFillers;
  VerificationSettings settings;
  std::vector<NeuronVerification> neurons;  // ascending neuron id
  Buckets train_buckets;
  Buckets eval_buckets;
};

/// Throws Errc::Domain when no neuron was processed.
VerificationReport build_report(std::vector<NeuronVerification> neurons, const VerificationSettings& settings,
                                ConjunctionMode mode);

void write_report_json(std::ostream& out, const VerificationReport& report);
/// Train and eval tables (rows = neurons, columns = cases) with two-decimal
/// percentages, bucket summaries and the concept lists used.
void write_report_markdown(std::ostream& out, const VerificationReport& report);

}  // namespace clens
