#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "segmod/fields.hpp"
#include "segmod/types.hpp"
#include "segmod/user_store.hpp"

namespace segmod {

// Enum-set over the four feature groups.
class FeatureSetMask {
 public:
  constexpr FeatureSetMask() = default;

  static constexpr FeatureSetMask context() { return FeatureSetMask(1u << 0); }
  static constexpr FeatureSetMask text() { return FeatureSetMask(1u << 1); }
  static constexpr FeatureSetMask entities() { return FeatureSetMask(1u << 2); }
  static constexpr FeatureSetMask metadata() { return FeatureSetMask(1u << 3); }
  static constexpr FeatureSetMask all_content() { return text() | entities() | metadata(); }
  static constexpr FeatureSetMask all() { return context() | all_content(); }

  constexpr FeatureSetMask operator|(FeatureSetMask o) const { return FeatureSetMask(bits_ | o.bits_); }
  constexpr bool operator==(const FeatureSetMask&) const = default;

  constexpr bool contains(FeatureGroup g) const { return (bits_ >> static_cast<unsigned>(g)) & 1u; }
  constexpr bool includes(FeatureSetMask o) const { return (bits_ & o.bits_) == o.bits_; }
  constexpr bool empty() const { return bits_ == 0; }

  // "context", "text", "entities", "metadata", "all_content", "all", or
  // '+'-joined group names ("text+entities").
  static std::optional<FeatureSetMask> from_string(const std::string& name);
  std::string to_string() const;

  // The six ablation presets, in reporting order.
  static const std::array<FeatureSetMask, 6>& presets();

 private:
  constexpr explicit FeatureSetMask(unsigned bits) : bits_(bits) {}
  unsigned bits_ = 0;
};

// Dictionary of (namespace, token) -> column, columns contiguous per
// namespace, tokens lexicographic inside it. Immutable after build.
class FeatureSpace {
 public:
  // Keeps every (namespace, token) carried by at least min_token_count
  // visits, namespaces restricted to the mask. Throws EmptyVocabulary when
  // nothing survives.
  static FeatureSpace build(const UserStore& store, FeatureSetMask mask, int min_token_count);

  VecIndex dim() const { return static_cast<VecIndex>(terms_.size()); }
  FeatureSetMask mask() const { return mask_; }
  std::optional<VecIndex> column(Field ns, const std::string& token) const;
  const std::pair<Field, std::string>& term(VecIndex column) const { return terms_[static_cast<std::size_t>(column)]; }
  // [begin, end) column range of one namespace; empty when absent.
  std::pair<VecIndex, VecIndex> namespace_range(Field ns) const;

  // Stable content hash; models reference it.
  const std::string& id() const { return id_; }

  // Text table: namespace <TAB> token <TAB> index, in column order.
  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static FeatureSpace load(std::istream& in);
  static FeatureSpace load_file(const std::string& path);

 private:
  void finalize();

  std::vector<std::pair<Field, std::string>> terms_;
  std::array<std::unordered_map<std::string, VecIndex>, kNamespaceCount> columns_;
  std::array<std::pair<VecIndex, VecIndex>, kNamespaceCount> ranges_{};
  FeatureSetMask mask_;
  std::string id_;
};

// Per-field term-frequency blocks, each L2-normalized, then the whole vector
// scaled by 1/sqrt(active fields): every present field contributes the same
// weight to the final norm. Visits with nothing in-dictionary vectorize to
// the zero vector.
SparseVec vectorize_visit(const Visit& visit, const FeatureSpace& space, FeatureSetMask mask);

// Arithmetic mean of visit vectors, L2-normalized (the all-zero mean stays
// zero). Throws NoVisits on an empty list.
SparseVec user_centroid(const std::vector<SparseVec>& visit_vectors);

// Centroid of all of a user's visits under the mask.
SparseVec vectorize_user(const UserRecord& user, const FeatureSpace& space, FeatureSetMask mask);

}  // namespace segmod
