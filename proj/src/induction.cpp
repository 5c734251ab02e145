#include "clens/induction.hpp"

#include "clens/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace clens {

Coverage::Coverage(std::uint64_t num, std::uint64_t den) {
  if (den == 0 || num > den) throw Error(Errc::Domain, "coverage must be a fraction in [0, 1]");
  const std::uint64_t g = std::gcd(num, den);
  num_ = num / g;
  den_ = den / g;
}

bool ranks_before(const ScoredSolution& a, const ScoredSolution& b) {
  if (a.coverage != b.coverage) return a.coverage > b.coverage;
  if (a.expression.size() != b.expression.size()) return a.expression.size() < b.expression.size();
  return a.canonical < b.canonical;
}

namespace {

struct Examples {
  std::vector<ImageIndex> pos;
  std::vector<ImageIndex> neg;

  std::size_t total() const { return pos.size() + neg.size(); }
};

Examples resolve(const ExampleSplit& split, const AnnotationStore& ab) {
  Examples ex;
  ex.pos.reserve(split.positives.size());
  ex.neg.reserve(split.negatives.size());
  for (const auto& id : split.positives) ex.pos.push_back(ab.index(id));
  for (const auto& id : split.negatives) ex.neg.push_back(ab.index(id));
  return ex;
}

ScoredSolution make_solution(ClassExpression e, const HierarchyIndex& h, std::size_t pos_hit,
                             std::size_t neg_hit, const Examples& ex) {
  ScoredSolution s{std::move(e), {}, Coverage(0, 1), pos_hit, ex.neg.size() - neg_hit};
  s.canonical = s.expression.canonical(h);
  s.coverage = Coverage(s.pos_covered + s.neg_excluded, ex.total());
  return s;
}

ScoredSolution score_generic(ClassExpression e, const Examples& ex, const KnowledgeBase& kb, ConjunctionMode mode) {
  const auto& ab = kb.annotations;
  const auto& h = kb.hierarchy;
  const auto pos_hit = static_cast<std::size_t>(
      std::count_if(ex.pos.begin(), ex.pos.end(), [&](ImageIndex i) { return ab.entails(i, e, h, mode); }));
  const auto neg_hit = static_cast<std::size_t>(
      std::count_if(ex.neg.begin(), ex.neg.end(), [&](ImageIndex i) { return ab.entails(i, e, h, mode); }));
  return make_solution(std::move(e), h, pos_hit, neg_hit, ex);
}

// Single-conjunct expressions scored in one pass over the example closures.
// Also yields, per atomic, its extension over P then N as a bitset.
struct AtomicScores {
  std::vector<ScoredSolution> solutions;  // parallel to the atomics
  std::vector<std::vector<std::uint64_t>> extension;
};

AtomicScores score_atomics(const std::vector<ClassId>& atomics, const Examples& ex, const KnowledgeBase& kb) {
  const auto& h = kb.hierarchy;
  const auto& ab = kb.annotations;
  std::unordered_map<ComponentId, std::vector<std::size_t>> by_comp;
  for (std::size_t a = 0; a < atomics.size(); ++a) by_comp[h.component(atomics[a])].push_back(a);

  const std::size_t words = (ex.total() + 63) / 64;
  AtomicScores out;
  out.extension.assign(atomics.size(), std::vector<std::uint64_t>(words, 0));
  std::vector<std::size_t> pos_hit(atomics.size(), 0);
  std::vector<std::size_t> neg_hit(atomics.size(), 0);

  auto sweep = [&](const std::vector<ImageIndex>& images, std::size_t offset, std::vector<std::size_t>& hits) {
    for (std::size_t k = 0; k < images.size(); ++k) {
      const std::size_t bit = offset + k;
      for (ComponentId comp : ab.closure(images[k])) {
        auto it = by_comp.find(comp);
        if (it == by_comp.end()) continue;
        for (std::size_t a : it->second) {
          ++hits[a];
          out.extension[a][bit / 64] |= std::uint64_t{1} << (bit % 64);
        }
      }
    }
  };
  sweep(ex.pos, 0, pos_hit);
  sweep(ex.neg, ex.pos.size(), neg_hit);

  out.solutions.reserve(atomics.size());
  for (std::size_t a = 0; a < atomics.size(); ++a) {
    out.solutions.push_back(
        make_solution(ClassExpression::existential({atomics[a]}, h), h, pos_hit[a], neg_hit[a], ex));
  }
  return out;
}

// Calls fn(indices) for every size-r combination of 0..n-1, lexicographic.
template <class Fn>
void for_each_combination(std::size_t n, std::size_t r, Fn&& fn) {
  if (r == 0 || r > n) return;
  std::vector<std::size_t> idx(r);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  while (true) {
    fn(static_cast<const std::vector<std::size_t>&>(idx));
    std::size_t i = r;
    while (i > 0 && idx[i - 1] == n - r + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < r; ++j) idx[j] = idx[j - 1] + 1;
  }
}

// Singletons plus beam combinations, scored.
std::vector<ScoredSolution> expand(const std::vector<ClassId>& atomics, const Examples& ex, const KnowledgeBase& kb,
                                   std::size_t beam_width, std::size_t max_conjuncts, ConjunctionMode mode) {
  AtomicScores atoms = score_atomics(atomics, ex, kb);

  std::vector<std::size_t> beam(atomics.size());
  std::iota(beam.begin(), beam.end(), std::size_t{0});
  std::sort(beam.begin(), beam.end(), [&](std::size_t a, std::size_t b) {
    return ranks_before(atoms.solutions[a], atoms.solutions[b]);
  });
  beam.resize(std::min(beam_width, beam.size()));

  std::vector<ScoredSolution> out = atoms.solutions;
  const std::size_t npos = ex.pos.size();
  const std::size_t words = atoms.extension.empty() ? 0 : atoms.extension.front().size();
  std::vector<std::uint64_t> acc(words);

  for (std::size_t r = 2; r <= max_conjuncts; ++r) {
    for_each_combination(beam.size(), r, [&](const std::vector<std::size_t>& pick) {
      std::vector<ClassId> conj;
      conj.reserve(r);
      for (std::size_t i : pick) conj.push_back(atomics[beam[i]]);
      auto e = ClassExpression::existential(std::move(conj), kb.hierarchy);

      if (mode == ConjunctionMode::SingleFiller) {
        out.push_back(score_generic(std::move(e), ex, kb, mode));
        return;
      }
      acc = atoms.extension[beam[pick[0]]];
      for (std::size_t j = 1; j < pick.size(); ++j) {
        const auto& ext = atoms.extension[beam[pick[j]]];
        for (std::size_t w = 0; w < words; ++w) acc[w] &= ext[w];
      }
      std::size_t pos_hit = 0;
      std::size_t all_hit = 0;
      for (std::size_t w = 0; w < words; ++w) all_hit += static_cast<std::size_t>(std::popcount(acc[w]));
      for (std::size_t bit = 0; bit < npos; bit += 64) {
        std::uint64_t word = acc[bit / 64];
        const std::size_t left = npos - bit;
        if (left < 64) word &= (std::uint64_t{1} << left) - 1;
        pos_hit += static_cast<std::size_t>(std::popcount(word));
      }
      out.push_back(make_solution(std::move(e), kb.hierarchy, pos_hit, all_hit - pos_hit, ex));
    });
  }
  return out;
}

void rank_and_truncate(std::vector<ScoredSolution>& v, std::size_t k) {
  if (v.size() > k) {
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), ranks_before);
    v.resize(k);
  } else {
    std::sort(v.begin(), v.end(), ranks_before);
  }
}

}  // namespace

Coverage coverage(const ClassExpression& e, const ExampleSplit& split, const KnowledgeBase& kb,
                  ConjunctionMode mode) {
  if (split.positives.empty() && split.negatives.empty()) throw Error(Errc::Domain, "coverage of an empty split");
  const Examples ex = resolve(split, kb.annotations);
  return score_generic(e, ex, kb, mode).coverage;
}

std::vector<ClassId> generate_atomic_candidates(const ExampleSplit& split, const KnowledgeBase& kb,
                                                unsigned ascent_depth) {
  std::unordered_set<ClassId> direct;
  for (const auto& id : split.positives) {
    for (ClassId c : kb.annotations.objects(kb.annotations.index(id))) direct.insert(c);
  }
  std::unordered_set<ClassId> out;
  for (ClassId c : direct) {
    for (ClassId a : kb.hierarchy.ancestors_within(c, ascent_depth)) out.insert(a);
  }
  std::vector<ClassId> sorted(out.begin(), out.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted;
}

std::vector<ClassExpression> generate_expressions(const std::vector<ClassId>& atomics, const ExampleSplit& split,
                                                  const KnowledgeBase& kb, std::size_t beam_width,
                                                  std::size_t max_conjuncts, ConjunctionMode mode) {
  if (atomics.empty()) return {};
  const Examples ex = resolve(split, kb.annotations);
  if (ex.total() == 0) throw Error(Errc::Domain, "expression generation needs a nonempty split");
  auto scored = expand(atomics, ex, kb, beam_width, max_conjuncts, mode);
  std::vector<ClassExpression> out;
  out.reserve(scored.size());
  for (auto& s : scored) out.push_back(std::move(s.expression));
  return out;
}

SolutionList induce(const ExampleSplit& split, const KnowledgeBase& kb, const InductionConfig& config) {
  if (split.positives.empty()) throw Error(Errc::Domain, "induction needs at least one positive example");
  if (config.k == 0) throw Error(Errc::Config, "k must be at least 1");

  const Examples ex = resolve(split, kb.annotations);
  const auto atomics = generate_atomic_candidates(split, kb, config.ascent_depth);

  SolutionList sl;
  sl.neuron = split.neuron;
  sl.case_id = split.case_id;
  sl.positives = ex.pos.size();
  sl.negatives = ex.neg.size();
  sl.k = config.k;
  sl.solutions = expand(atomics, ex, kb, config.beam_width, config.max_conjuncts, config.mode);
  rank_and_truncate(sl.solutions, config.k);
  return sl;
}

ReducedConceptList reduce_concepts(const SolutionList& sl, const HierarchyIndex& h) {
  ReducedConceptList rc;
  for (std::size_t i = 0; i < sl.solutions.size(); ++i) {
    for (ClassId c : sl.solutions[i].expression.conjuncts()) {
      auto& ranks = rc.provenance[normalize_label(h.label(c))];
      if (ranks.empty() || ranks.back() != i) ranks.push_back(i);
    }
  }
  for (const auto& [label, ranks] : rc.provenance) rc.concepts.push_back(label);
  return rc;
}

SolutionList oracle_induce(const ExampleSplit& split, const KnowledgeBase& kb, std::size_t max_conjuncts,
                           ConjunctionMode mode, std::size_t k, std::vector<ClassId> classes) {
  const auto& h = kb.hierarchy;
  const auto& ab = kb.annotations;
  if (classes.empty()) {
    classes.resize(h.size());
    std::iota(classes.begin(), classes.end(), ClassId{0});
  } else {
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  }

  // sum of C(n, r) for r = 1..max_conjuncts, stopping at the guard
  const std::uint64_t n = classes.size();
  std::uint64_t total = 0;
  std::uint64_t binom = 1;
  for (std::uint64_t r = 1; r <= max_conjuncts && r <= n; ++r) {
    const unsigned __int128 next = static_cast<unsigned __int128>(binom) * (n - r + 1) / r;
    if (next > kOracleExpressionLimit) {
      throw Error(Errc::InstanceTooLarge, "exhaustive enumeration exceeds " +
                                              std::to_string(kOracleExpressionLimit) + " expressions");
    }
    binom = static_cast<std::uint64_t>(next);
    total += binom;
    if (total > kOracleExpressionLimit) {
      throw Error(Errc::InstanceTooLarge, "exhaustive enumeration exceeds " +
                                              std::to_string(kOracleExpressionLimit) + " expressions");
    }
  }

  const Examples ex = resolve(split, ab);
  if (ex.total() == 0) throw Error(Errc::Domain, "oracle needs a nonempty split");

  auto holds = [&](ImageIndex img, std::span<const ClassId> conj) {
    const auto objs = ab.objects(img);
    auto sub = [&](ClassId d, ClassId c) { return h.is_subclass_of(d, c); };
    if (mode == ConjunctionMode::SeparateFillers) {
      return std::all_of(conj.begin(), conj.end(), [&](ClassId c) {
        return std::any_of(objs.begin(), objs.end(), [&](ClassId d) { return sub(d, c); });
      });
    }
    return std::any_of(objs.begin(), objs.end(), [&](ClassId d) {
      return std::all_of(conj.begin(), conj.end(), [&](ClassId c) { return sub(d, c); });
    });
  };

  SolutionList sl;
  sl.neuron = split.neuron;
  sl.case_id = split.case_id;
  sl.positives = ex.pos.size();
  sl.negatives = ex.neg.size();
  sl.k = k;
  for (std::size_t r = 1; r <= max_conjuncts; ++r) {
    for_each_combination(classes.size(), r, [&](const std::vector<std::size_t>& pick) {
      std::vector<ClassId> conj;
      for (std::size_t i : pick) conj.push_back(classes[i]);
      std::size_t pos_hit = 0;
      std::size_t neg_hit = 0;
      for (ImageIndex img : ex.pos) pos_hit += holds(img, conj) ? 1 : 0;
      for (ImageIndex img : ex.neg) neg_hit += holds(img, conj) ? 1 : 0;
      sl.solutions.push_back(make_solution(ClassExpression::existential(std::move(conj), h), h, pos_hit, neg_hit, ex));
    });
  }
  rank_and_truncate(sl.solutions, k);
  return sl;
}

void write_solutions_json(std::ostream& out, const SolutionList& sl) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : sl.solutions) {
    nlohmann::ordered_json j;
    j["expression"] = s.canonical;
    j["coverage"] = {{"num", s.coverage.num()}, {"den", s.coverage.den()}};
    j["pos_covered"] = s.pos_covered;
    j["neg_excluded"] = s.neg_excluded;
    arr.push_back(std::move(j));
  }
  out << arr.dump(2) << '\n';
}

void write_concepts_json(std::ostream& out, const ReducedConceptList& rc, ConjunctionMode mode) {
  nlohmann::ordered_json j;
  j["concepts"] = rc.concepts;
  j["provenance"] = nlohmann::ordered_json::object();
  for (const auto& [label, ranks] : rc.provenance) j["provenance"][label] = ranks;
  j["conjunction_mode"] = to_string(mode);
  out << j.dump(2) << '\n';
}

ReducedConceptList read_concepts_json(std::istream& in) {
  ReducedConceptList rc;
  try {
    const auto j = nlohmann::json::parse(in);
    rc.concepts = j.at("concepts").get<std::vector<std::string>>();
    if (j.contains("provenance")) {
      for (const auto& [label, ranks] : j.at("provenance").items()) {
        rc.provenance[label] = ranks.get<std::vector<std::size_t>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, std::string("concepts.json: ") + e.what());
  }
  return rc;
}

}  // namespace clens
