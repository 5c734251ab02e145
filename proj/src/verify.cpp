#include "clens/verify.hpp"

#include "clens/error.hpp"
#include "random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <unordered_set>

namespace clens {

VerificationManifest VerificationManifest::load(std::istream& in) {
  VerificationManifest m;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, std::string("manifest: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::Parse, "manifest: expected an object {concept: [image ids]}");
  for (const auto& [key, list] : j.items()) {
    std::string name;
    try {
      name = normalize_label(key);
    } catch (const Error& e) {
      throw Error(Errc::Parse, std::string("manifest: ") + e.what());
    }
    if (!list.is_array()) throw Error(Errc::Parse, "manifest: concept '" + key + "' must map to an array");
    auto [it, inserted] = m.images.try_emplace(name);
    if (!inserted) throw Error(Errc::Parse, "manifest: concept '" + key + "' collides after normalization");
    std::unordered_set<std::string> seen;
    for (const auto& v : list) {
      if (!v.is_string()) throw Error(Errc::Parse, "manifest: image ids must be strings");
      auto id = v.get<std::string>();
      if (!seen.insert(id).second) {
        throw Error(Errc::Parse, "manifest: duplicate image '" + id + "' under name '" + key + "'");
      }
      it->second.push_back(std::move(id));
    }
  }
  return m;
}

VerificationManifest VerificationManifest::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open manifest '" + path + "'");
  return load(in);
}

Pool assemble_pool(const ReducedConceptList& concepts, const VerificationManifest& manifest) {
  Pool pool;
  std::unordered_set<std::string> seen;
  for (const auto& name : concepts.concepts) {
    auto it = manifest.images.find(name);
    if (it == manifest.images.end()) {
      pool.missing_concepts.push_back(name);
      continue;
    }
    for (const auto& img : it->second) {
      if (seen.insert(img).second) pool.images.push_back(img);
    }
  }
  if (pool.images.empty()) throw Error(Errc::EmptyPool, "no manifest images for any of the concepts");
  return pool;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_pool(std::span<const std::string> pool,
                                                                         double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(Errc::Split, "split ratio must lie in (0, 1)");
  if (pool.size() < 2) throw Error(Errc::Split, "cannot split a pool of fewer than two images");

  std::vector<std::string> shuffled(pool.begin(), pool.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
    std::swap(shuffled[i], shuffled[detail::draw_below(rng, i + 1)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(shuffled.size())));
  std::vector<std::string> eval(std::make_move_iterator(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train)),
                                std::make_move_iterator(shuffled.end()));
  shuffled.resize(n_train);
  return {std::move(shuffled), std::move(eval)};
}

ActivationCount activation_percentage(const ActivationMatrix& m, NeuronId neuron, std::span<const std::string> images,
                                      double fire_threshold) {
  if (images.empty()) throw Error(Errc::Domain, "activation percentage of an empty image list");
  const auto col = m.column(neuron);
  ActivationCount out;
  out.total = images.size();
  for (const auto& id : images) {
    if (m.values()(m.row(id), col) > fire_threshold) ++out.fired;
  }
  return out;
}

CaseVerification verify_case(NeuronId neuron, CaseId case_id, const ReducedConceptList& concepts,
                             const VerificationManifest& manifest, const ActivationMatrix& verification,
                             const VerificationSettings& settings) {
  CaseVerification cv;
  cv.case_id = case_id;
  cv.concepts = concepts.concepts;
  Pool pool = assemble_pool(concepts, manifest);
  cv.missing_concepts = std::move(pool.missing_concepts);
  cv.pool_size = pool.images.size();
  auto [train, eval] = split_pool(pool.images, settings.ratio, settings.seed);
  cv.train_size = train.size();
  cv.eval_size = eval.size();
  if (!train.empty()) cv.train = activation_percentage(verification, neuron, train, settings.fire_threshold);
  if (!eval.empty()) cv.eval = activation_percentage(verification, neuron, eval, settings.fire_threshold);
  return cv;
}

Buckets bucket(std::span<const NeuronVerification> neurons, SplitPart part) {
  Buckets b;
  for (const auto& n : neurons) {
    if (n.cases.empty()) continue;
    // exact: fired/total > 0.9  <=>  10 * fired > 9 * total
    bool high = true;
    bool low = true;
    for (const auto& c : n.cases) {
      const ActivationCount& a = part == SplitPart::Train ? c.train : c.eval;
      if (a.total == 0) {
        high = low = false;
        break;
      }
      high = high && 10 * a.fired > 9 * a.total;
      low = low && 100 * a.fired < a.total;
    }
    if (high) {
      ++b.high;
      b.high_neurons.push_back(n.neuron);
    } else if (low) {
      ++b.low;
      b.low_neurons.push_back(n.neuron);
    } else {
      ++b.mid;
    }
  }
  return b;
}

VerificationReport build_report(std::vector<NeuronVerification> neurons, const VerificationSettings& settings,
                                ConjunctionMode mode) {
  if (neurons.empty()) throw Error(Errc::Domain, "verification report needs at least one neuron");
  std::sort(neurons.begin(), neurons.end(), [](const auto& a, const auto& b) { return a.neuron < b.neuron; });
  VerificationReport r;
  r.mode = mode;
  r.settings = settings;
  r.neurons = std::move(neurons);
  r.train_buckets = bucket(r.neurons, SplitPart::Train);
  r.eval_buckets = bucket(r.neurons, SplitPart::Eval);
  return r;
}

namespace {

nlohmann::ordered_json count_json(const ActivationCount& a) {
  nlohmann::ordered_json j;
  j["fired"] = a.fired;
  j["total"] = a.total;
  j["percent"] = a.percent();
  return j;
}

nlohmann::ordered_json buckets_json(const Buckets& b) {
  nlohmann::ordered_json j;
  j["high"] = b.high;
  j["low"] = b.low;
  j["mid"] = b.mid;
  j["high_neurons"] = b.high_neurons;
  j["low_neurons"] = b.low_neurons;
  return j;
}

std::string percent_cell(const ActivationCount& a) {
  if (a.total == 0) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", a.percent());
  return buf;
}

std::string threshold_text(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += v[i];
  }
  return out;
}

void write_table(std::ostream& out, const VerificationReport& r, SplitPart part) {
  out << "| neuron | Case-I | Case-II | Case-III |\n|---|---:|---:|---:|\n";
  for (const auto& n : r.neurons) {
    out << "| neuron" << n.neuron;
    for (CaseId c : kAllCases) {
      auto it = std::find_if(n.cases.begin(), n.cases.end(), [&](const auto& cv) { return cv.case_id == c; });
      out << " | " << (it == n.cases.end() ? "n/a" : percent_cell(part == SplitPart::Train ? it->train : it->eval));
    }
    out << " |\n";
  }
  const Buckets& b = part == SplitPart::Train ? r.train_buckets : r.eval_buckets;
  out << "\nAbove 90% in every case: " << b.high << " neurons";
  if (!b.high_neurons.empty()) {
    out << " (";
    for (std::size_t i = 0; i < b.high_neurons.size(); ++i) out << (i ? ", " : "") << b.high_neurons[i];
    out << ")";
  }
  out << ". Below 1% in every case: " << b.low << " neurons";
  if (!b.low_neurons.empty()) {
    out << " (";
    for (std::size_t i = 0; i < b.low_neurons.size(); ++i) out << (i ? ", " : "") << b.low_neurons[i];
    out << ")";
  }
  out << ". In between: " << b.mid << " neurons.\n";
}

}  // namespace

void write_report_json(std::ostream& out, const VerificationReport& r) {
  nlohmann::ordered_json j;
  j["conjunction_mode"] = to_string(r.mode);
  j["fire_threshold"] = r.settings.fire_threshold;
  j["split_ratio"] = r.settings.ratio;
  j["seed"] = r.settings.seed;
  j["neurons"] = nlohmann::ordered_json::array();
  for (const auto& n : r.neurons) {
    nlohmann::ordered_json nj;
    nj["neuron"] = n.neuron;
    nj["cases"] = nlohmann::ordered_json::array();
    for (const auto& c : n.cases) {
      nlohmann::ordered_json cj;
      cj["case"] = to_string(c.case_id);
      cj["concepts"] = c.concepts;
      cj["missing_concepts"] = c.missing_concepts;
      cj["pool_size"] = c.pool_size;
      cj["train_size"] = c.train_size;
      cj["eval_size"] = c.eval_size;
      cj["train"] = count_json(c.train);
      cj["eval"] = count_json(c.eval);
      nj["cases"].push_back(std::move(cj));
    }
    j["neurons"].push_back(std::move(nj));
  }
  j["summary"] = {{"train", buckets_json(r.train_buckets)}, {"eval", buckets_json(r.eval_buckets)}};
  out << j.dump(2) << '\n';
}

void write_report_markdown(std::ostream& out, const VerificationReport& r) {
  const auto pct = [](double x) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%g%%", 100.0 * x);
    return std::string(buf);
  };
  out << "# Verification report\n\n";
  out << "- conjunction mode: " << to_string(r.mode) << '\n';
  out << "- candidate neurons: activation > 0 on strictly more than half of the probe images "
         "(1370 images: at least 686)\n";
  out << "- fire threshold: activation > " << threshold_text(r.settings.fire_threshold) << '\n';
  out << "- split: " << pct(r.settings.ratio) << " train / " << pct(1.0 - r.settings.ratio) << " eval, seed "
      << r.settings.seed << "\n\n";

  out << "## Activation percentage, train split\n\n";
  write_table(out, r, SplitPart::Train);
  out << "\n## Activation percentage, eval split\n\n";
  write_table(out, r, SplitPart::Eval);

  out << "\n## Concepts per neuron\n\n| neuron | case | pool | concepts | missing from manifest |\n|---|---|---:|---|---|\n";
  for (const auto& n : r.neurons) {
    for (const auto& c : n.cases) {
      out << "| neuron" << n.neuron << " | " << to_string(c.case_id) << " | " << c.pool_size << " | "
          << join(c.concepts) << " | " << join(c.missing_concepts) << " |\n";
    }
  }
}

}  // namespace clens
