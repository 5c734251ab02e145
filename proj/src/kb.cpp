#include "clens/kb.hpp"

#include "clens/error.hpp"
#include "text.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <unordered_set>

namespace clens {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidLabel: return "invalid-label";
    case Errc::Parse: return "parse";
    case Errc::UnknownClass: return "unknown-class";
    case Errc::Domain: return "domain";
    case Errc::DegenerateNeuron: return "degenerate-neuron";
    case Errc::InstanceTooLarge: return "instance-too-large";
    case Errc::EmptyPool: return "empty-pool";
    case Errc::Split: return "split";
    case Errc::Io: return "io";
    case Errc::Config: return "config";
  }
  return "unknown";
}

std::string normalize_label(std::string_view raw) {
  std::string_view s = detail::trim(raw);
  if (s.starts_with("WN_")) s.remove_prefix(3);
  s = detail::trim(s);

  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char ch : s) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc)) {
      pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back('_');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(uc)));
  }
  if (out.empty()) throw Error(Errc::InvalidLabel, "invalid label '" + std::string(raw) + "'");
  return out;
}

const char* to_string(ConjunctionMode mode) noexcept {
  return mode == ConjunctionMode::SingleFiller ? "single-filler" : "separate-fillers";
}

ConjunctionMode parse_conjunction_mode(std::string_view text) {
  if (text == "separate-fillers" || text == "separate") return ConjunctionMode::SeparateFillers;
  if (text == "single-filler" || text == "single") return ConjunctionMode::SingleFiller;
  throw Error(Errc::Config, "unknown conjunction mode '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// HierarchyIndex

class HierarchyBuilder {
public:
  ClassId intern(std::string_view raw) {
    std::string norm = normalize_label(raw);
    auto [it, inserted] = h_.by_label_.try_emplace(norm, static_cast<ClassId>(h_.raw_labels_.size()));
    if (inserted) {
      h_.raw_labels_.emplace_back(detail::trim(raw));
      h_.normalized_.push_back(std::move(norm));
    }
    return it->second;
  }

  void add_edge(std::string_view child, std::string_view parent) {
    const ClassId c = intern(child);
    const ClassId p = intern(parent);
    if (c != p) edges_.emplace_back(c, p);
  }

  HierarchyIndex finish() && {
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

    const std::size_t n = h_.raw_labels_.size();
    h_.parent_offsets_.assign(n + 1, 0);
    for (const auto& e : edges_) ++h_.parent_offsets_[e.first + 1];
    for (std::size_t i = 0; i < n; ++i) h_.parent_offsets_[i + 1] += h_.parent_offsets_[i];
    h_.parent_ids_.resize(edges_.size());
    // edges are sorted by child, so a straight copy lands in CSR order
    for (std::size_t i = 0; i < edges_.size(); ++i) h_.parent_ids_[i] = edges_[i].second;
    edges_.clear();
    edges_.shrink_to_fit();

    condense();
    return std::move(h_);
  }

private:
  // Iterative Tarjan over the parent graph, then the condensed DAG.
  void condense() {
    const std::size_t n = h_.raw_labels_.size();
    constexpr std::uint32_t kUnvisited = std::numeric_limits<std::uint32_t>::max();
    const auto& off = h_.parent_offsets_;
    const auto& adj = h_.parent_ids_;

    std::vector<std::uint32_t> order(n, kUnvisited);
    std::vector<std::uint32_t> low(n, 0);
    std::vector<char> on_stack(n, 0);
    std::vector<ClassId> stack;
    std::vector<std::pair<ClassId, std::uint32_t>> frames;
    h_.comp_of_.assign(n, 0);

    std::uint32_t counter = 0;
    ComponentId comps = 0;
    auto open = [&](ClassId v) {
      order[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack[v] = 1;
      frames.emplace_back(v, off[v]);
    };

    for (ClassId root = 0; root < n; ++root) {
      if (order[root] != kUnvisited) continue;
      open(root);
      while (!frames.empty()) {
        const ClassId v = frames.back().first;
        const std::uint32_t pos = frames.back().second;
        if (pos < off[v + 1]) {
          frames.back().second = pos + 1;
          const ClassId w = adj[pos];
          if (order[w] == kUnvisited) {
            open(w);
          } else if (on_stack[w]) {
            low[v] = std::min(low[v], order[w]);
          }
          continue;
        }
        if (low[v] == order[v]) {
          ClassId x;
          do {
            x = stack.back();
            stack.pop_back();
            on_stack[x] = 0;
            h_.comp_of_[x] = comps;
          } while (x != v);
          ++comps;
        }
        frames.pop_back();
        if (!frames.empty()) {
          const ClassId u = frames.back().first;
          low[u] = std::min(low[u], low[v]);
        }
      }
    }

    std::vector<std::pair<ComponentId, ComponentId>> cedges;
    for (ClassId v = 0; v < n; ++v) {
      for (std::uint32_t i = off[v]; i < off[v + 1]; ++i) {
        const ComponentId a = h_.comp_of_[v];
        const ComponentId b = h_.comp_of_[adj[i]];
        if (a != b) cedges.emplace_back(a, b);
      }
    }
    std::sort(cedges.begin(), cedges.end());
    cedges.erase(std::unique(cedges.begin(), cedges.end()), cedges.end());
    h_.comp_offsets_.assign(comps + 1, 0);
    for (const auto& e : cedges) ++h_.comp_offsets_[e.first + 1];
    for (std::size_t i = 0; i < comps; ++i) h_.comp_offsets_[i + 1] += h_.comp_offsets_[i];
    h_.comp_parents_.resize(cedges.size());
    for (std::size_t i = 0; i < cedges.size(); ++i) h_.comp_parents_[i] = cedges[i].second;
  }

  HierarchyIndex h_;
  std::vector<std::pair<ClassId, ClassId>> edges_;
};

HierarchyIndex HierarchyIndex::load(std::istream& in) {
  HierarchyBuilder b;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = detail::strip_cr(line);
    if (detail::is_blank_or_comment(s)) continue;
    const auto fields = detail::split(s, '\t');
    if (fields.size() != 2 || detail::trim(fields[0]).empty() || detail::trim(fields[1]).empty()) {
      throw Error(Errc::Parse, "hierarchy line " + std::to_string(lineno) +
                                   ": expected 'child<TAB>parent'");
    }
    try {
      b.add_edge(fields[0], fields[1]);
    } catch (const Error& e) {
      throw Error(Errc::Parse, "hierarchy line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return std::move(b).finish();
}

HierarchyIndex HierarchyIndex::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open hierarchy file '" + path + "'");
  return load(in);
}

HierarchyIndex HierarchyIndex::from_edges(std::span<const std::pair<std::string, std::string>> edges,
                                          std::span<const std::string> isolated) {
  HierarchyBuilder b;
  for (const auto& [child, parent] : edges) b.add_edge(child, parent);
  for (const auto& label : isolated) b.intern(label);
  return std::move(b).finish();
}

void HierarchyIndex::check(ClassId c) const {
  if (c >= size()) throw Error(Errc::Domain, "class id " + std::to_string(c) + " is not registered");
}

std::optional<ClassId> HierarchyIndex::find(std::string_view label) const {
  std::string norm;
  try {
    norm = normalize_label(label);
  } catch (const Error&) {
    return std::nullopt;
  }
  auto it = by_label_.find(norm);
  if (it == by_label_.end()) return std::nullopt;
  return it->second;
}

ClassId HierarchyIndex::id(std::string_view label) const {
  if (auto c = find(label)) return *c;
  throw Error(Errc::UnknownClass, "unknown class '" + std::string(label) + "'");
}

const std::string& HierarchyIndex::label(ClassId c) const {
  check(c);
  return raw_labels_[c];
}

const std::string& HierarchyIndex::normalized(ClassId c) const {
  check(c);
  return normalized_[c];
}

std::span<const ClassId> HierarchyIndex::parents(ClassId c) const {
  check(c);
  return {parent_ids_.data() + parent_offsets_[c], parent_ids_.data() + parent_offsets_[c + 1]};
}

ComponentId HierarchyIndex::component(ClassId c) const {
  check(c);
  return comp_of_[c];
}

bool HierarchyIndex::is_subclass_of(ClassId c, ClassId d) const {
  check(c);
  check(d);
  const ComponentId from = comp_of_[c];
  const ComponentId target = comp_of_[d];
  if (from == target) return true;

  std::unordered_set<ComponentId> seen{from};
  std::vector<ComponentId> frontier{from};
  while (!frontier.empty()) {
    const ComponentId x = frontier.back();
    frontier.pop_back();
    for (std::uint32_t i = comp_offsets_[x]; i < comp_offsets_[x + 1]; ++i) {
      const ComponentId y = comp_parents_[i];
      if (y == target) return true;
      if (seen.insert(y).second) frontier.push_back(y);
    }
  }
  return false;
}

std::vector<ClassId> HierarchyIndex::ancestors_within(ClassId c, unsigned depth) const {
  check(c);
  std::vector<ClassId> out{c};
  std::unordered_set<ClassId> seen{c};
  std::vector<ClassId> level{c};
  for (unsigned d = 0; d < depth && !level.empty(); ++d) {
    std::vector<ClassId> next;
    for (ClassId x : level) {
      for (ClassId p : parents(x)) {
        if (seen.insert(p).second) {
          next.push_back(p);
          out.push_back(p);
        }
      }
    }
    level = std::move(next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ComponentId> HierarchyIndex::ancestor_components(ClassId c) const {
  check(c);
  const ComponentId from = comp_of_[c];
  std::vector<ComponentId> out{from};
  std::unordered_set<ComponentId> seen{from};
  for (std::size_t i = 0; i < out.size(); ++i) {
    const ComponentId x = out[i];
    for (std::uint32_t j = comp_offsets_[x]; j < comp_offsets_[x + 1]; ++j) {
      if (seen.insert(comp_parents_[j]).second) out.push_back(comp_parents_[j]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

ClassId HierarchyIndex::register_class(std::string_view label) {
  std::string norm = normalize_label(label);
  if (auto it = by_label_.find(norm); it != by_label_.end()) return it->second;

  const auto c = static_cast<ClassId>(raw_labels_.size());
  by_label_.emplace(norm, c);
  raw_labels_.emplace_back(detail::trim(label));
  normalized_.push_back(std::move(norm));
  parent_offsets_.push_back(parent_offsets_.back());

  if (comp_offsets_.empty()) comp_offsets_.push_back(0);
  comp_of_.push_back(static_cast<ComponentId>(comp_offsets_.size() - 1));
  comp_offsets_.push_back(comp_offsets_.back());
  return c;
}

// ---------------------------------------------------------------------------
// ClassExpression

ClassExpression ClassExpression::existential(std::vector<ClassId> conjuncts, const HierarchyIndex& h) {
  if (conjuncts.empty()) throw Error(Errc::Domain, "existential expression needs at least one conjunct");
  for (ClassId c : conjuncts) (void)h.normalized(c);
  std::sort(conjuncts.begin(), conjuncts.end(), [&](ClassId a, ClassId b) {
    return h.normalized(a) < h.normalized(b);
  });
  conjuncts.erase(std::unique(conjuncts.begin(), conjuncts.end()), conjuncts.end());
  ClassExpression e;
  e.conjuncts_ = std::move(conjuncts);
  return e;
}

std::string ClassExpression::canonical(const HierarchyIndex& h) const {
  std::string out = "∃imageContains.(";
  for (std::size_t i = 0; i < conjuncts_.size(); ++i) {
    if (i) out += " ⊓ ";
    out += h.normalized(conjuncts_[i]);
  }
  out += ')';
  return out;
}

namespace {

constexpr std::string_view kMeet = "⊓";

std::string_view strip_decoration(std::string_view s) {
  auto junk = [](char ch) {
    return ch == '(' || ch == ')' || std::isspace(static_cast<unsigned char>(ch));
  };
  while (!s.empty() && junk(s.front())) s.remove_prefix(1);
  while (!s.empty() && junk(s.back())) s.remove_suffix(1);
  if (s.starts_with(':')) s.remove_prefix(1);
  return s;
}

}  // namespace

ClassExpression parse_expression(std::string_view text, const HierarchyIndex& h) {
  const auto role = text.find("imageContains");
  if (role == std::string_view::npos) {
    throw Error(Errc::Parse, "expression lacks the imageContains role: '" + std::string(text) + "'");
  }
  std::string_view body = text.substr(role + std::string_view("imageContains").size());
  body = detail::trim(body);
  if (!body.starts_with('.')) {
    throw Error(Errc::Parse, "expected '.' after role in '" + std::string(text) + "'");
  }
  body.remove_prefix(1);

  std::vector<std::string_view> pieces;
  while (true) {
    const auto meet = body.find(kMeet);
    const auto word = body.find(" and ");
    const auto cut = std::min(meet, word);
    if (cut == std::string_view::npos) {
      pieces.push_back(body);
      break;
    }
    pieces.push_back(body.substr(0, cut));
    body.remove_prefix(cut + (cut == meet ? kMeet.size() : 5));
  }

  std::vector<ClassId> conjuncts;
  for (auto piece : pieces) {
    const auto label = strip_decoration(piece);
    if (label.empty()) throw Error(Errc::Parse, "empty conjunct in '" + std::string(text) + "'");
    conjuncts.push_back(h.id(label));
  }
  return ClassExpression::existential(std::move(conjuncts), h);
}

// ---------------------------------------------------------------------------
// AnnotationStore

class AnnotationStore::Builder {
public:
  Builder(HierarchyIndex& h, AnnotationOptions opts) : h_(h), opts_(opts) {}

  ImageIndex image(std::string_view id) {
    auto [it, inserted] = store_.by_id_.try_emplace(std::string(id), static_cast<ImageIndex>(store_.image_ids_.size()));
    if (inserted) {
      store_.image_ids_.emplace_back(id);
      assertions_.emplace_back();
    }
    return it->second;
  }

  void add(std::string_view id, std::string_view label) {
    const ImageIndex img = image(id);
    if (detail::trim(label).empty()) return;
    ClassId c;
    if (auto found = h_.find(label)) {
      c = *found;
    } else if (opts_.lenient) {
      c = h_.register_class(label);
    } else {
      throw Error(Errc::UnknownClass, "unknown class '" + std::string(label) + "'");
    }
    assertions_[img].push_back(c);
  }

  AnnotationStore finish() && {
    std::unordered_map<ClassId, std::vector<ComponentId>> cache;
    auto closure_of = [&](ClassId c) -> const std::vector<ComponentId>& {
      auto it = cache.find(c);
      if (it == cache.end()) it = cache.emplace(c, h_.ancestor_components(c)).first;
      return it->second;
    };

    auto& s = store_;
    std::vector<ComponentId> merged;
    for (const auto& objs : assertions_) {
      merged.clear();
      for (ClassId c : objs) {
        s.objects_.push_back(c);
        const auto& cl = closure_of(c);
        s.object_closures_.insert(s.object_closures_.end(), cl.begin(), cl.end());
        s.object_closure_offsets_.push_back(static_cast<std::uint32_t>(s.object_closures_.size()));
        merged.insert(merged.end(), cl.begin(), cl.end());
      }
      s.object_offsets_.push_back(static_cast<std::uint32_t>(s.objects_.size()));
      std::sort(merged.begin(), merged.end());
      merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
      s.image_closures_.insert(s.image_closures_.end(), merged.begin(), merged.end());
      s.image_closure_offsets_.push_back(static_cast<std::uint32_t>(s.image_closures_.size()));
    }
    return std::move(store_);
  }

private:
  HierarchyIndex& h_;
  AnnotationOptions opts_;
  AnnotationStore store_;
  std::deque<std::vector<ClassId>> assertions_;
};

AnnotationStore AnnotationStore::load(std::istream& in, HierarchyIndex& h, AnnotationOptions opts) {
  Builder b(h, opts);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = detail::strip_cr(line);
    if (detail::is_blank_or_comment(s)) continue;
    const auto fields = detail::split(s, '\t');
    if (fields.size() > 2 || detail::trim(fields[0]).empty()) {
      throw Error(Errc::Parse, "annotations line " + std::to_string(lineno) +
                                   ": expected 'image_id<TAB>class_label'");
    }
    const std::string_view id = detail::trim(fields[0]);
    try {
      b.add(id, fields.size() == 2 ? fields[1] : std::string_view{});
    } catch (const Error& e) {
      if (e.code() == Errc::UnknownClass) {
        throw Error(Errc::UnknownClass, "annotations line " + std::to_string(lineno) + ": " + e.what());
      }
      throw Error(Errc::Parse, "annotations line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return std::move(b).finish();
}

AnnotationStore AnnotationStore::load_file(const std::string& path, HierarchyIndex& h, AnnotationOptions opts) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open annotations file '" + path + "'");
  return load(in, h, opts);
}

AnnotationStore AnnotationStore::from_records(std::span<const std::pair<std::string, std::string>> records,
                                              HierarchyIndex& h, AnnotationOptions opts) {
  Builder b(h, opts);
  for (const auto& [img, label] : records) b.add(img, label);
  return std::move(b).finish();
}

std::optional<ImageIndex> AnnotationStore::find(std::string_view image) const {
  auto it = by_id_.find(std::string(image));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

ImageIndex AnnotationStore::index(std::string_view image) const {
  if (auto i = find(image)) return *i;
  throw Error(Errc::Domain, "image '" + std::string(image) + "' is not registered");
}

std::span<const ClassId> AnnotationStore::objects(ImageIndex img) const {
  if (img >= size()) throw Error(Errc::Domain, "image index out of range");
  return {objects_.data() + object_offsets_[img], objects_.data() + object_offsets_[img + 1]};
}

std::span<const ComponentId> AnnotationStore::closure(ImageIndex img) const {
  if (img >= size()) throw Error(Errc::Domain, "image index out of range");
  return {image_closures_.data() + image_closure_offsets_[img],
          image_closures_.data() + image_closure_offsets_[img + 1]};
}

std::span<const ComponentId> AnnotationStore::object_closure(ImageIndex img, std::size_t object) const {
  if (img >= size()) throw Error(Errc::Domain, "image index out of range");
  const std::size_t pos = object_offsets_[img] + object;
  if (pos >= object_offsets_[img + 1]) throw Error(Errc::Domain, "object index out of range");
  return {object_closures_.data() + object_closure_offsets_[pos],
          object_closures_.data() + object_closure_offsets_[pos + 1]};
}

bool AnnotationStore::entails(ImageIndex img, const ClassExpression& e, const HierarchyIndex& h,
                              ConjunctionMode mode) const {
  auto holds_all = [&](std::span<const ComponentId> cl) {
    return std::all_of(e.conjuncts().begin(), e.conjuncts().end(), [&](ClassId c) {
      return std::binary_search(cl.begin(), cl.end(), h.component(c));
    });
  };
  if (mode == ConjunctionMode::SeparateFillers || e.size() == 1) return holds_all(closure(img));

  const std::size_t n = object_offsets_[img + 1] - object_offsets_[img];
  for (std::size_t o = 0; o < n; ++o) {
    if (holds_all(object_closure(img, o))) return true;
  }
  return false;
}

bool entails(std::string_view image, const ClassExpression& e, const AnnotationStore& ab,
             const HierarchyIndex& h, ConjunctionMode mode) {
  return ab.entails(ab.index(image), e, h, mode);
}

KnowledgeBase KnowledgeBase::load_files(const std::string& hierarchy_path, const std::string& annotations_path,
                                        AnnotationOptions opts) {
  KnowledgeBase kb;
  kb.hierarchy = HierarchyIndex::load_file(hierarchy_path);
  kb.annotations = AnnotationStore::load_file(annotations_path, kb.hierarchy, opts);
  return kb;
}

}  // namespace clens
