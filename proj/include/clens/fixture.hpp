#pragma once
// Synthetic planted-concept datasets for tests, benchmarks and demos.
//
// Every neuron in `planted_neurons` fires (activation in [max/2, max]) on
// exactly the images annotated with its planted concept and is silent
// elsewhere, so all three cases yield the same split and the planted concept
// is the unique single-class perfect separator.

#include "clens/partition.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace clens {

struct FixtureSpec {
  std::size_t images = 1370;
  std::vector<NeuronId> neurons;          // default: 0..63
  std::vector<NeuronId> planted_neurons;  // default: the 29 majority neurons of the reference run
  std::size_t classes = 600;
  std::size_t max_distractors = 8;        // per image, uniform in [0, max]
  std::size_t verification_per_concept = 20;
  double manifest_coverage = 0.9;         // share of classes present in the manifest
  NeuronId peak_twelve_neuron = 5;        // this column's max is exactly 12 (if planted)
  std::uint64_t seed = 1;

  static FixtureSpec reference();
  static FixtureSpec micro();
};

struct Fixture {
  std::vector<std::pair<std::string, std::string>> hierarchy;    // child, parent
  std::vector<std::pair<std::string, std::string>> annotations;  // image, label ("" = no objects)
  ActivationMatrix activations;
  std::map<std::string, std::vector<std::string>> manifest;
  ActivationMatrix verification;
  std::map<NeuronId, std::string> planted;  // neuron -> raw class label
};

/// Deterministic in the spec. Regenerates internally until no class other
/// than the planted one has the planted concept's extension.
Fixture make_fixture(const FixtureSpec& spec);

/// Writes hierarchy.tsv, annotations.tsv, activations.csv, manifest.json,
/// verification.csv, planted.json and config.json into `dir`.
void write_fixture(const Fixture& fx, const std::filesystem::path& dir);

/// Random recursive tree over `classes` labels ("Concept_<i>", even ids with a
/// "WN_" prefix) written as hierarchy TSV. Class 0 is the root.
void write_synthetic_hierarchy(std::ostream& out, std::size_t classes, std::uint64_t seed);
std::string synthetic_label(std::size_t i);

}  // namespace clens
