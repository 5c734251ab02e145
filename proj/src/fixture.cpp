#include "clens/fixture.hpp"

#include "clens/error.hpp"
#include "clens/kb.hpp"
#include "clens/pipeline.hpp"
#include "random.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>

namespace clens {

namespace fs = std::filesystem;
using detail::draw_below;

FixtureSpec FixtureSpec::reference() {
  FixtureSpec s;
  s.neurons.resize(64);
  std::iota(s.neurons.begin(), s.neurons.end(), 0);
  s.planted_neurons = {4,  5,  6,  7,  9,  11, 12, 13, 15, 16, 22, 23, 27, 29, 34,
                       35, 36, 37, 39, 45, 52, 54, 55, 56, 58, 59, 60, 62, 63};
  return s;
}

FixtureSpec FixtureSpec::micro() {
  FixtureSpec s;
  s.images = 40;
  s.neurons = {0, 1, 2, 3, 4, 5, 6, 7};
  s.planted_neurons = {1, 3, 4, 6};
  s.classes = 40;
  s.max_distractors = 4;
  s.verification_per_concept = 5;
  s.peak_twelve_neuron = 4;
  return s;
}

std::string synthetic_label(std::size_t i) {
  return (i % 2 == 0 ? "WN_Concept_" : "Concept_") + std::to_string(i);
}

void write_synthetic_hierarchy(std::ostream& out, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  out << "# synthetic random recursive tree, " << classes << " classes, seed " << seed << '\n';
  for (std::size_t i = 1; i < classes; ++i) {
    const std::size_t parent = draw_below(rng, i);
    out << synthetic_label(i) << '\t' << synthetic_label(parent) << '\n';
  }
}

namespace {

// exact multiples of 1/64, so CSV round trips are lossless
double sixty_fourths(std::uint64_t k) { return static_cast<double>(k) / 64.0; }

std::vector<std::size_t> sample_subset(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + draw_below(rng, n - i)]);
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct Attempt {
  Fixture fx;
  bool unique = true;
};

Attempt generate(const FixtureSpec& spec, std::uint64_t seed) {
  if (spec.images < 4) throw Error(Errc::Config, "fixture needs at least 4 images");
  if (spec.classes < 4) throw Error(Errc::Config, "fixture needs at least 4 classes");
  std::mt19937_64 rng(seed);
  Attempt out;
  Fixture& fx = out.fx;

  // hierarchy: random recursive tree rooted at class 0
  const std::size_t nc = spec.classes;
  std::vector<std::size_t> parent(nc, 0);
  std::vector<std::vector<std::size_t>> children(nc);
  for (std::size_t i = 1; i < nc; ++i) {
    parent[i] = draw_below(rng, i);
    children[parent[i]].push_back(i);
    fx.hierarchy.emplace_back(synthetic_label(i), synthetic_label(parent[i]));
  }

  // planted concepts: leaves with a sibling reserved as a negative witness
  std::vector<std::size_t> order(nc);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = nc - 1; i > 0; --i) std::swap(order[i], order[draw_below(rng, i + 1)]);
  std::set<std::size_t> taken;
  std::map<NeuronId, std::pair<std::size_t, std::size_t>> plant;  // neuron -> (concept, sibling)
  std::size_t cursor = 0;
  for (NeuronId n : spec.planted_neurons) {
    bool found = false;
    for (; cursor < nc && !found; ++cursor) {
      const std::size_t x = order[cursor];
      if (x == 0 || !children[x].empty() || taken.count(x)) continue;
      for (std::size_t s : children[parent[x]]) {
        if (s != x && !taken.count(s)) {
          taken.insert(x);
          taken.insert(s);
          plant[n] = {x, s};
          found = true;
          break;
        }
      }
    }
    if (!found) throw Error(Errc::Config, "fixture hierarchy too small for the planted neurons");
  }
  std::set<std::size_t> planted_classes;
  for (const auto& [n, xs] : plant) planted_classes.insert(xs.first);
  std::vector<std::size_t> distractor_pool;
  for (std::size_t c = 0; c < nc; ++c) {
    if (!planted_classes.count(c)) distractor_pool.push_back(c);
  }

  const std::size_t ni = spec.images;
  std::vector<std::string> image_ids(ni);
  for (std::size_t i = 0; i < ni; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "img%04zu", i + 1);
    image_ids[i] = buf;
  }
  std::vector<std::vector<std::size_t>> objects(ni);

  const std::size_t nn = spec.neurons.size();
  ActivationMatrix::Values act = ActivationMatrix::Values::Zero(static_cast<Eigen::Index>(ni),
                                                                static_cast<Eigen::Index>(nn));
  std::vector<std::uint64_t> peak(nn, 0);
  for (std::size_t col = 0; col < nn; ++col) {
    const NeuronId n = spec.neurons[col];
    const std::uint64_t m_peak = n == spec.peak_twelve_neuron ? 12 : 2 + draw_below(rng, 19);
    peak[col] = m_peak;
    auto it = plant.find(n);
    if (it == plant.end()) {
      // background neuron: fires on fewer than half of the images
      const std::size_t m = draw_below(rng, ni * 45 / 100 + 1);
      for (std::size_t i : sample_subset(rng, ni, m)) {
        act(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) =
            sixty_fourths(1 + draw_below(rng, 64 * m_peak));
      }
      continue;
    }
    const auto [x, sibling] = it->second;
    const std::size_t m = ni / 2 + 1 + draw_below(rng, std::max<std::size_t>(1, ni * 35 / 100 - 1));
    const auto hits = sample_subset(rng, ni, std::min(m, ni - 1));
    std::vector<char> hit(ni, 0);
    for (std::size_t i : hits) {
      hit[i] = 1;
      objects[i].push_back(x);
      act(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col)) =
          sixty_fourths(32 * m_peak + draw_below(rng, 32 * m_peak + 1));
    }
    act(static_cast<Eigen::Index>(hits[draw_below(rng, hits.size())]), static_cast<Eigen::Index>(col)) =
        static_cast<double>(m_peak);
    std::vector<std::size_t> misses;
    for (std::size_t i = 0; i < ni; ++i) {
      if (!hit[i]) misses.push_back(i);
    }
    objects[misses[draw_below(rng, misses.size())]].push_back(sibling);
    fx.planted[n] = synthetic_label(x);
  }

  for (std::size_t i = 0; i < ni; ++i) {
    const std::size_t d = draw_below(rng, spec.max_distractors + 1);
    for (std::size_t k = 0; k < d; ++k) objects[i].push_back(distractor_pool[draw_below(rng, distractor_pool.size())]);
    if (objects[i].empty()) fx.annotations.emplace_back(image_ids[i], "");
    for (std::size_t c : objects[i]) fx.annotations.emplace_back(image_ids[i], synthetic_label(c));
  }
  fx.activations = ActivationMatrix(image_ids, spec.neurons, std::move(act));

  // No class other than the planted one may share its extension.
  {
    const std::size_t words = (ni + 63) / 64;
    std::vector<std::vector<std::uint64_t>> ext(nc, std::vector<std::uint64_t>(words, 0));
    for (std::size_t i = 0; i < ni; ++i) {
      for (std::size_t c : objects[i]) {
        for (std::size_t a = c;; a = parent[a]) {
          ext[a][i / 64] |= std::uint64_t{1} << (i % 64);
          if (a == 0) break;
        }
      }
    }
    for (const auto& [n, xs] : plant) {
      for (std::size_t c = 0; c < nc; ++c) {
        if (c != xs.first && ext[c] == ext[xs.first]) out.unique = false;
      }
    }
  }

  // verification manifest and activations
  std::map<std::size_t, std::vector<NeuronId>> affinity;  // class -> neurons it should drive
  for (const auto& [n, xs] : plant) {
    for (std::size_t a = xs.first;; a = parent[a]) {
      affinity[a].push_back(n);
      if (a == 0) break;
    }
  }
  std::vector<std::string> vimages;
  std::vector<std::size_t> home;
  std::string previous;
  for (std::size_t c = 0; c < nc; ++c) {
    const bool keep = planted_classes.count(c) || detail::draw_unit(rng) < spec.manifest_coverage;
    if (!keep) continue;
    const std::string name = normalize_label(synthetic_label(c));
    auto& list = fx.manifest[name];
    for (std::size_t k = 0; k < spec.verification_per_concept; ++k) {
      list.push_back("v_" + name + "_" + std::to_string(k));
      vimages.push_back(list.back());
      home.push_back(c);
    }
    // occasional cross-concept duplicate
    if (!previous.empty() && detail::draw_unit(rng) < 0.2) list.push_back(fx.manifest[previous].front());
    previous = name;
  }

  const double rates[] = {0.0, 0.004, 0.3, 0.55, 0.97};
  std::vector<double> base(nn);
  for (auto& b : base) b = rates[draw_below(rng, std::size(rates))];
  ActivationMatrix::Values vact = ActivationMatrix::Values::Zero(static_cast<Eigen::Index>(vimages.size()),
                                                                 static_cast<Eigen::Index>(nn));
  for (std::size_t r = 0; r < vimages.size(); ++r) {
    const auto aff = affinity.find(home[r]);
    for (std::size_t col = 0; col < nn; ++col) {
      const NeuronId n = spec.neurons[col];
      const bool driven = aff != affinity.end() &&
                          std::find(aff->second.begin(), aff->second.end(), n) != aff->second.end();
      const double p = driven ? 0.9 : base[col];
      if (detail::draw_unit(rng) < p) {
        vact(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) =
            sixty_fourths(1 + draw_below(rng, 64 * peak[col]));
      }
    }
  }
  fx.verification = ActivationMatrix(std::move(vimages), spec.neurons, std::move(vact));
  return out;
}

}  // namespace

Fixture make_fixture(const FixtureSpec& in) {
  FixtureSpec spec = in;
  if (spec.neurons.empty()) {
    spec.neurons.resize(64);
    std::iota(spec.neurons.begin(), spec.neurons.end(), 0);
  }
  for (NeuronId n : spec.planted_neurons) {
    if (std::find(spec.neurons.begin(), spec.neurons.end(), n) == spec.neurons.end()) {
      throw Error(Errc::Config, "planted neuron " + std::to_string(n) + " is not among the fixture neurons");
    }
  }
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    Attempt a = generate(spec, spec.seed + attempt * 0x9E3779B97F4A7C15ULL);
    if (a.unique) return std::move(a.fx);
  }
  throw Error(Errc::Config, "could not generate a fixture with unique planted extensions");
}

void write_fixture(const Fixture& fx, const fs::path& dir) {
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write '" + (dir / name).string() + "'");
    return out;
  };
  {
    auto out = open("hierarchy.tsv");
    out << "# child\tparent\n";
    for (const auto& [c, p] : fx.hierarchy) out << c << '\t' << p << '\n';
  }
  {
    auto out = open("annotations.tsv");
    for (const auto& [img, label] : fx.annotations) out << img << '\t' << label << '\n';
  }
  {
    auto out = open("activations.csv");
    fx.activations.write_csv(out);
  }
  {
    auto out = open("verification.csv");
    fx.verification.write_csv(out);
  }
  {
    auto out = open("manifest.json");
    out << nlohmann::json(fx.manifest).dump(2) << '\n';
  }
  {
    auto out = open("planted.json");
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [n, label] : fx.planted) j[std::to_string(n)] = label;
    out << j.dump(2) << '\n';
  }
  {
    PipelineConfig cfg;
    cfg.hierarchy = "hierarchy.tsv";
    cfg.annotations = "annotations.tsv";
    cfg.activations = "activations.csv";
    cfg.manifest = "manifest.json";
    cfg.verification_activations = "verification.csv";
    cfg.output_dir = "out";
    auto out = open("config.json");
    out << cfg.to_json_text();
  }
}

}  // namespace clens
