#pragma once
// Coverage-scored concept induction over existential class expressions, and
// reduction of the ranked solutions to a concept label set.

#include "clens/kb.hpp"
#include "clens/partition.hpp"

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace clens {

/// Exact fraction num/den in [0, 1], kept in lowest terms.
class Coverage {
public:
  Coverage(std::uint64_t num, std::uint64_t den);

  std::uint64_t num() const noexcept { return num_; }
  std::uint64_t den() const noexcept { return den_; }
  double value() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend bool operator==(const Coverage&, const Coverage&) = default;
  friend std::strong_ordering operator<=>(const Coverage& a, const Coverage& b) noexcept {
    using wide = unsigned __int128;
    return static_cast<wide>(a.num_) * b.den_ <=> static_cast<wide>(b.num_) * a.den_;
  }

private:
  std::uint64_t num_;
  std::uint64_t den_;
};

struct ScoredSolution {
  ClassExpression expression;
  std::string canonical;
  Coverage coverage{0, 1};
  std::size_t pos_covered = 0;
  std::size_t neg_excluded = 0;
};

/// Ranking used everywhere: coverage descending, then fewer conjuncts, then
/// canonical string ascending.
bool ranks_before(const ScoredSolution& a, const ScoredSolution& b);

struct SolutionList {
  NeuronId neuron = 0;
  CaseId case_id = CaseId::I;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t k = 50;
  std::vector<ScoredSolution> solutions;
};

struct ReducedConceptList {
  std::vector<std::string> concepts;  // normalized, ascending, unique
  std::map<std::string, std::vector<std::size_t>> provenance;  // label -> 0-based solution ranks
};

struct InductionConfig {
  std::size_t k = 50;
  std::size_t beam_width = 32;
  unsigned ascent_depth = 1;
  std::size_t max_conjuncts = 2;
  ConjunctionMode mode = ConjunctionMode::SeparateFillers;
};

/// (|P ∩ entailed| + |N \ entailed|) / (|P| + |N|).
/// Throws Errc::Domain for an empty split or an image missing from the ABox.
Coverage coverage(const ClassExpression& e, const ExampleSplit& split, const KnowledgeBase& kb,
                  ConjunctionMode mode = ConjunctionMode::SeparateFillers);

/// Classes annotating some positive image, plus their superclasses up to
/// `ascent_depth` edges away. Ascending ids.
std::vector<ClassId> generate_atomic_candidates(const ExampleSplit& split, const KnowledgeBase& kb,
                                                unsigned ascent_depth = 1);

/// All singletons over `atomics` (in the given order), then every
/// 2..max_conjuncts combination of the beam_width best-scoring atomics.
std::vector<ClassExpression> generate_expressions(const std::vector<ClassId>& atomics, const ExampleSplit& split,
                                                  const KnowledgeBase& kb, std::size_t beam_width = 32,
                                                  std::size_t max_conjuncts = 2,
                                                  ConjunctionMode mode = ConjunctionMode::SeparateFillers);

/// Top-k scored expressions for a split; deterministic for fixed inputs.
SolutionList induce(const ExampleSplit& split, const KnowledgeBase& kb, const InductionConfig& config = {});

ReducedConceptList reduce_concepts(const SolutionList& sl, const HierarchyIndex& h);

inline constexpr std::uint64_t kOracleExpressionLimit = 1'000'000;

/// Exhaustive enumeration of every expression with at most max_conjuncts
/// conjuncts over `classes` (all classes when empty), scored by direct
/// subsumption queries instead of the precomputed closures. Throws
/// Errc::InstanceTooLarge above kOracleExpressionLimit expressions.
SolutionList oracle_induce(const ExampleSplit& split, const KnowledgeBase& kb, std::size_t max_conjuncts,
                           ConjunctionMode mode, std::size_t k = 50, std::vector<ClassId> classes = {});

void write_solutions_json(std::ostream& out, const SolutionList& sl);
void write_concepts_json(std::ostream& out, const ReducedConceptList& rc, ConjunctionMode mode);
ReducedConceptList read_concepts_json(std::istream& in);

}  // namespace clens
