#pragma once
// Background knowledge: the class hierarchy (TBox), per-image contained-object
// assertions (ABox over the imageContains role) and the existential class
// expressions evaluated against them.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace clens {

using ClassId = std::uint32_t;
using ComponentId = std::uint32_t;
using ImageIndex = std::uint32_t;

// Strips a leading "WN_", lowercases, trims, and maps runs of internal
// whitespace to a single underscore. Throws Errc::InvalidLabel when nothing
// is left.
std::string normalize_label(std::string_view raw);

enum class ConjunctionMode {
  SeparateFillers,  // every conjunct has some (possibly different) filler
  SingleFiller,     // one filler carries all conjuncts
};

const char* to_string(ConjunctionMode mode) noexcept;
ConjunctionMode parse_conjunction_mode(std::string_view text);

/// Class hierarchy with interned labels and an ascent-reachability index.
///
/// Labels are interned by their normalized form, so "WN_Table" and "Table"
/// denote one class; label() keeps the first raw spelling seen. Edges point
/// child -> parent. Cycles are accepted: strongly connected classes collapse
/// into one component and are mutually subsumed.
class HierarchyIndex {
public:
  HierarchyIndex() = default;

  /// Reads `child<TAB>parent` lines; '#' lines and blank lines are skipped.
  static HierarchyIndex load(std::istream& in);
  static HierarchyIndex load_file(const std::string& path);
  static HierarchyIndex from_edges(
      std::span<const std::pair<std::string, std::string>> edges,
      std::span<const std::string> isolated = {});

  std::size_t size() const noexcept { return raw_labels_.size(); }
  std::size_t edge_count() const noexcept { return parent_ids_.size(); }
  std::size_t component_count() const noexcept { return comp_offsets_.empty() ? 0 : comp_offsets_.size() - 1; }

  std::optional<ClassId> find(std::string_view label) const;
  /// Like find() but throws Errc::UnknownClass.
  ClassId id(std::string_view label) const;

  const std::string& label(ClassId c) const;
  const std::string& normalized(ClassId c) const;
  std::span<const ClassId> parents(ClassId c) const;

  ComponentId component(ClassId c) const;

  /// True iff d is reachable from c over zero or more child->parent edges.
  bool is_subclass_of(ClassId c, ClassId d) const;

  /// c plus every class reachable within `depth` parent edges, ascending ids.
  std::vector<ClassId> ancestors_within(ClassId c, unsigned depth) const;

  /// Components reachable from c's component (itself included), ascending.
  std::vector<ComponentId> ancestor_components(ClassId c) const;

  /// Adds a parentless class, or returns the existing id for the label.
  ClassId register_class(std::string_view label);

private:
  friend class HierarchyBuilder;

  void check(ClassId c) const;

  std::vector<std::string> raw_labels_;
  std::vector<std::string> normalized_;
  std::unordered_map<std::string, ClassId> by_label_;

  // child -> parent adjacency, CSR
  std::vector<std::uint32_t> parent_offsets_{0};
  std::vector<ClassId> parent_ids_;

  // strongly connected components and the condensed (acyclic) parent graph
  std::vector<ComponentId> comp_of_;
  std::vector<std::uint32_t> comp_offsets_{0};
  std::vector<ComponentId> comp_parents_;
};

/// ∃imageContains.(C1 ⊓ ... ⊓ Ck), k >= 1.
class ClassExpression {
public:
  /// Sorts conjuncts by normalized label and drops duplicates. Throws
  /// Errc::Domain for an empty conjunct list.
  static ClassExpression existential(std::vector<ClassId> conjuncts, const HierarchyIndex& h);

  std::span<const ClassId> conjuncts() const noexcept { return conjuncts_; }
  std::size_t size() const noexcept { return conjuncts_.size(); }

  /// `∃imageContains.(a ⊓ b)` over normalized labels.
  std::string canonical(const HierarchyIndex& h) const;

  friend bool operator==(const ClassExpression&, const ClassExpression&) = default;

private:
  std::vector<ClassId> conjuncts_;
};

/// Accepts the canonical rendering as well as the reasoner-style
/// `∃ :imageContains.((:WN_Table) ⊓ (:Leg))` and ASCII `exists`/`and`.
ClassExpression parse_expression(std::string_view text, const HierarchyIndex& h);

struct AnnotationOptions {
  bool lenient = false;  // auto-register unknown class labels
};

/// Per-image contained-object assertions, with per-object and per-image
/// ascent closures (over hierarchy components) precomputed at load time.
class AnnotationStore {
public:
  AnnotationStore() = default;

  /// Reads `image_id<TAB>class_label` lines. A line holding only an image id
  /// (or an empty label) registers an image without annotations.
  static AnnotationStore load(std::istream& in, HierarchyIndex& h, AnnotationOptions opts = {});
  static AnnotationStore load_file(const std::string& path, HierarchyIndex& h, AnnotationOptions opts = {});
  static AnnotationStore from_records(
      std::span<const std::pair<std::string, std::string>> records, HierarchyIndex& h,
      AnnotationOptions opts = {});

  std::size_t size() const noexcept { return image_ids_.size(); }
  const std::vector<std::string>& image_ids() const noexcept { return image_ids_; }
  std::optional<ImageIndex> find(std::string_view image) const;
  /// Throws Errc::Domain for an unregistered image.
  ImageIndex index(std::string_view image) const;

  /// One entry per annotated object, in input order (a multiset).
  std::span<const ClassId> objects(ImageIndex img) const;

  /// Union of the objects' ascent closures, ascending.
  std::span<const ComponentId> closure(ImageIndex img) const;
  std::span<const ComponentId> object_closure(ImageIndex img, std::size_t object) const;

  bool entails(ImageIndex img, const ClassExpression& e, const HierarchyIndex& h,
               ConjunctionMode mode) const;

private:
  class Builder;

  std::vector<std::string> image_ids_;
  std::unordered_map<std::string, ImageIndex> by_id_;

  std::vector<std::uint32_t> object_offsets_{0};
  std::vector<ClassId> objects_;

  // per object, CSR indexed by global object position
  std::vector<std::uint32_t> object_closure_offsets_{0};
  std::vector<ComponentId> object_closures_;

  std::vector<std::uint32_t> image_closure_offsets_{0};
  std::vector<ComponentId> image_closures_;
};

/// Throws Errc::Domain when the image is not registered in `ab`.
bool entails(std::string_view image, const ClassExpression& e, const AnnotationStore& ab,
             const HierarchyIndex& h, ConjunctionMode mode = ConjunctionMode::SeparateFillers);

/// The background knowledge handed to induction: hierarchy plus ABox.
struct KnowledgeBase {
  HierarchyIndex hierarchy;
  AnnotationStore annotations;

  static KnowledgeBase load_files(const std::string& hierarchy_path, const std::string& annotations_path,
                                  AnnotationOptions opts = {});
};

}  // namespace clens
