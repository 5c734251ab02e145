#pragma once
// Dense-layer activations and the positive/negative example splits derived
// from them.

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace clens {

using NeuronId = int;

enum class CaseId { I, II, III };

const char* to_string(CaseId c) noexcept;
CaseId parse_case(std::string_view text);
inline constexpr CaseId kAllCases[] = {CaseId::I, CaseId::II, CaseId::III};

/// images x neurons, non-negative. Stored column-major so one neuron's
/// activations are contiguous.
class ActivationMatrix {
public:
  using Values = Eigen::MatrixXd;

  ActivationMatrix() = default;
  /// Validates shape, id uniqueness and non-negativity (Errc::Parse).
  ActivationMatrix(std::vector<std::string> image_ids, std::vector<NeuronId> neuron_ids, Values values);

  /// CSV with header `image_id,<neuron_id>,...`; '#' lines are skipped.
  static ActivationMatrix load(std::istream& in);
  static ActivationMatrix load_file(const std::string& path);

  /// Shortest round-trip decimal formatting; load(write_csv(m)) == m.
  void write_csv(std::ostream& out) const;

  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index cols() const noexcept { return values_.cols(); }
  bool empty() const noexcept { return values_.size() == 0; }

  const std::vector<std::string>& image_ids() const noexcept { return image_ids_; }
  const std::vector<NeuronId>& neuron_ids() const noexcept { return neuron_ids_; }
  const Values& values() const noexcept { return values_; }

  std::optional<Eigen::Index> find_column(NeuronId n) const;
  std::optional<Eigen::Index> find_row(std::string_view image) const;
  /// Throw Errc::Domain when absent.
  Eigen::Index column(NeuronId n) const;
  Eigen::Index row(std::string_view image) const;

  auto activations(NeuronId n) const { return values_.col(column(n)); }

private:
  std::vector<std::string> image_ids_;
  std::vector<NeuronId> neuron_ids_;
  Values values_;
  std::unordered_map<std::string, Eigen::Index> row_of_;
  std::unordered_map<NeuronId, Eigen::Index> col_of_;
};

/// Neurons whose activation is > 0 on a strict majority of images,
/// ascending by id. Throws Errc::Domain for a matrix without images.
std::vector<NeuronId> select_candidate_neurons(const ActivationMatrix& m);

struct ExampleSplit {
  NeuronId neuron = 0;
  CaseId case_id = CaseId::I;
  std::vector<std::string> positives;  // matrix row order
  std::vector<std::string> negatives;
  double threshold = 0.0;  // half the column max for I/II, 0 for III
};

/// Case I:   P = {a >= max/2}, N = the rest
/// Case II:  P = {a >= max/2}, N = {a == 0}
/// Case III: P = {a > 0},      N = {a == 0}
/// Throws Errc::DegenerateNeuron for an all-zero column.
ExampleSplit partition(const ActivationMatrix& m, NeuronId neuron, CaseId case_id);

}  // namespace clens
