#include "clens/partition.hpp"

#include "clens/error.hpp"
#include "text.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace clens {

const char* to_string(CaseId c) noexcept {
  switch (c) {
    case CaseId::I: return "I";
    case CaseId::II: return "II";
    case CaseId::III: return "III";
  }
  return "?";
}

CaseId parse_case(std::string_view text) {
  if (text == "I" || text == "1") return CaseId::I;
  if (text == "II" || text == "2") return CaseId::II;
  if (text == "III" || text == "3") return CaseId::III;
  throw Error(Errc::Config, "unknown case '" + std::string(text) + "' (expected I, II or III)");
}

ActivationMatrix::ActivationMatrix(std::vector<std::string> image_ids, std::vector<NeuronId> neuron_ids,
                                   Values values)
    : image_ids_(std::move(image_ids)), neuron_ids_(std::move(neuron_ids)), values_(std::move(values)) {
  if (values_.rows() != static_cast<Eigen::Index>(image_ids_.size()) ||
      values_.cols() != static_cast<Eigen::Index>(neuron_ids_.size())) {
    throw Error(Errc::Parse, "activation matrix shape does not match its ids");
  }
  for (Eigen::Index r = 0; r < values_.rows(); ++r) {
    if (!row_of_.emplace(image_ids_[r], r).second) {
      throw Error(Errc::Parse, "duplicate image id '" + image_ids_[r] + "'");
    }
  }
  for (Eigen::Index c = 0; c < values_.cols(); ++c) {
    if (!col_of_.emplace(neuron_ids_[c], c).second) {
      throw Error(Errc::Parse, "duplicate neuron id " + std::to_string(neuron_ids_[c]));
    }
  }
  if (values_.size() > 0 && (!values_.allFinite() || values_.minCoeff() < 0.0)) {
    throw Error(Errc::Parse, "activations must be finite and non-negative");
  }
}

namespace {

std::string where(std::size_t line, std::size_t col) {
  return "activations line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

ActivationMatrix ActivationMatrix::load(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<NeuronId> neurons;
  bool have_header = false;
  std::vector<std::string> images;
  std::vector<double> flat;  // row-major while reading

  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = detail::strip_cr(line);
    if (detail::is_blank_or_comment(s)) continue;
    const auto cells = detail::split(s, ',');

    if (!have_header) {
      for (std::size_t c = 1; c < cells.size(); ++c) {
        const auto cell = detail::trim(cells[c]);
        NeuronId n{};
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), n);
        if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
          throw Error(Errc::Parse, where(lineno, c + 1) + ": neuron id '" + std::string(cell) + "' is not an integer");
        }
        if (std::find(neurons.begin(), neurons.end(), n) != neurons.end()) {
          throw Error(Errc::Parse, where(lineno, c + 1) + ": duplicate neuron id " + std::to_string(n));
        }
        neurons.push_back(n);
      }
      have_header = true;
      continue;
    }

    if (cells.size() != neurons.size() + 1) {
      throw Error(Errc::Parse, "activations line " + std::to_string(lineno) + ": ragged row, expected " +
                                   std::to_string(neurons.size() + 1) + " cells, got " +
                                   std::to_string(cells.size()));
    }
    const auto id = detail::trim(cells[0]);
    if (id.empty()) throw Error(Errc::Parse, where(lineno, 1) + ": empty image id");
    images.emplace_back(id);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto cell = detail::trim(cells[c]);
      double v{};
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw Error(Errc::Parse, where(lineno, c + 1) + ": '" + std::string(cell) + "' is not a number");
      }
      if (v < 0.0) throw Error(Errc::Parse, where(lineno, c + 1) + ": negative activation");
      flat.push_back(v);
    }
  }
  if (!have_header) throw Error(Errc::Parse, "activations: missing header line");

  const auto r = static_cast<Eigen::Index>(images.size());
  const auto c = static_cast<Eigen::Index>(neurons.size());
  Values values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), r, c);
  return ActivationMatrix(std::move(images), std::move(neurons), std::move(values));
}

ActivationMatrix ActivationMatrix::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open activations file '" + path + "'");
  return load(in);
}

void ActivationMatrix::write_csv(std::ostream& out) const {
  out << "image_id";
  for (NeuronId n : neuron_ids_) out << ',' << n;
  out << '\n';
  char buf[64];
  for (Eigen::Index r = 0; r < rows(); ++r) {
    out << image_ids_[r];
    for (Eigen::Index c = 0; c < cols(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, values_(r, c));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

std::optional<Eigen::Index> ActivationMatrix::find_column(NeuronId n) const {
  auto it = col_of_.find(n);
  if (it == col_of_.end()) return std::nullopt;
  return it->second;
}

std::optional<Eigen::Index> ActivationMatrix::find_row(std::string_view image) const {
  auto it = row_of_.find(std::string(image));
  if (it == row_of_.end()) return std::nullopt;
  return it->second;
}

Eigen::Index ActivationMatrix::column(NeuronId n) const {
  if (auto c = find_column(n)) return *c;
  throw Error(Errc::Domain, "neuron " + std::to_string(n) + " is not in the activation matrix");
}

Eigen::Index ActivationMatrix::row(std::string_view image) const {
  if (auto r = find_row(image)) return *r;
  throw Error(Errc::Domain, "image '" + std::string(image) + "' is not in the activation matrix");
}

std::vector<NeuronId> select_candidate_neurons(const ActivationMatrix& m) {
  if (m.rows() == 0) throw Error(Errc::Domain, "activation matrix has no images");
  std::vector<NeuronId> out;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const auto fired = (m.values().col(c).array() > 0.0).count();
    if (2 * fired > m.rows()) out.push_back(m.neuron_ids()[c]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ExampleSplit partition(const ActivationMatrix& m, NeuronId neuron, CaseId case_id) {
  const auto col = m.activations(neuron);
  const double peak = col.size() > 0 ? col.maxCoeff() : 0.0;
  if (!(peak > 0.0)) {
    throw Error(Errc::DegenerateNeuron, "neuron " + std::to_string(neuron) + " never activates");
  }

  ExampleSplit split;
  split.neuron = neuron;
  split.case_id = case_id;
  split.threshold = case_id == CaseId::III ? 0.0 : 0.5 * peak;

  // 2a >= max rather than a >= max/2: doubling is exact, halving can underflow.
  for (Eigen::Index r = 0; r < col.size(); ++r) {
    const double a = col(r);
    const bool high = 2.0 * a >= peak;
    const auto& id = m.image_ids()[r];
    switch (case_id) {
      case CaseId::I:
        (high ? split.positives : split.negatives).push_back(id);
        break;
      case CaseId::II:
        if (high) split.positives.push_back(id);
        else if (a == 0.0) split.negatives.push_back(id);
        break;
      case CaseId::III:
        (a > 0.0 ? split.positives : split.negatives).push_back(id);
        break;
    }
  }
  return split;
}

}  // namespace clens
