#include "segmod/vectorizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "segmod/detail/strings.hpp"

namespace segmod {

std::optional<FeatureSetMask> FeatureSetMask::from_string(const std::string& name) {
  if (name == "all") return all();
  if (name == "all_content") return all_content();
  FeatureSetMask mask;
  for (const auto& part : detail::split(name, '+')) {
    if (part == "context")
      mask = mask | context();
    else if (part == "text")
      mask = mask | text();
    else if (part == "entities")
      mask = mask | entities();
    else if (part == "metadata")
      mask = mask | metadata();
    else
      return std::nullopt;
  }
  if (mask.empty()) return std::nullopt;
  return mask;
}

std::string FeatureSetMask::to_string() const {
  if (*this == all()) return "all";
  if (*this == all_content()) return "all_content";
  std::vector<std::string> parts;
  for (int g = 0; g < 4; ++g)
    if (contains(static_cast<FeatureGroup>(g))) parts.push_back(segmod::to_string(static_cast<FeatureGroup>(g)));
  return detail::join(parts, "+");
}

const std::array<FeatureSetMask, 6>& FeatureSetMask::presets() {
  static const std::array<FeatureSetMask, 6> p = {context(), text(),        entities(),
                                                  metadata(), all_content(), all()};
  return p;
}

FeatureSpace FeatureSpace::build(const UserStore& store, FeatureSetMask mask, int min_token_count) {
  // document frequency over visits, one count per visit
  std::map<std::pair<Field, std::string>, int> visit_counts;
  std::set<std::pair<Field, std::string>> seen;
  for (const UserRecord& user : store.users()) {
    for (const Visit& visit : user.visits) {
      seen.clear();
      for (const auto& term : visit.tokens) {
        if (!mask.contains(group_of(term.first))) continue;
        if (seen.insert(term).second) ++visit_counts[term];
      }
    }
  }

  FeatureSpace space;
  space.mask_ = mask;
  for (const auto& [term, count] : visit_counts)
    if (count >= min_token_count) space.terms_.push_back(term);
  if (space.terms_.empty()) throw EmptyVocabulary("no (namespace, token) pair reaches min_token_count");
  // map iteration is already (namespace, token) ordered
  space.finalize();
  return space;
}

void FeatureSpace::finalize() {
  for (auto& r : ranges_) r = {0, 0};
  std::string table;
  for (VecIndex col = 0; col < dim(); ++col) {
    const auto& [ns, token] = terms_[static_cast<std::size_t>(col)];
    const auto ns_idx = static_cast<std::size_t>(ns);
    columns_[ns_idx].emplace(token, col);
    if (ranges_[ns_idx].first == ranges_[ns_idx].second) ranges_[ns_idx] = {col, col + 1};
    ranges_[ns_idx].second = col + 1;
    table += to_string(ns);
    table += '\t';
    table += token;
    table += '\t';
    table += std::to_string(col);
    table += '\n';
  }
  id_ = detail::hex64(detail::fnv1a64(table));
}

std::optional<VecIndex> FeatureSpace::column(Field ns, const std::string& token) const {
  const auto& map = columns_[static_cast<std::size_t>(ns)];
  const auto it = map.find(token);
  if (it == map.end()) return std::nullopt;
  return it->second;
}

std::pair<VecIndex, VecIndex> FeatureSpace::namespace_range(Field ns) const {
  return ranges_[static_cast<std::size_t>(ns)];
}

void FeatureSpace::save(std::ostream& out) const {
  for (VecIndex col = 0; col < dim(); ++col) {
    const auto& [ns, token] = terms_[static_cast<std::size_t>(col)];
    out << to_string(ns) << '\t' << token << '\t' << col << '\n';
  }
}

void FeatureSpace::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write feature space: " + path);
  save(out);
}

FeatureSpace FeatureSpace::load(std::istream& in) {
  FeatureSpace space;
  std::string line;
  Field prev = Field::domain;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 3) throw Error("feature space table: bad row: " + line);
    const auto ns = field_from_string(cols[0]);
    if (!ns || !is_namespace(*ns)) throw Error("feature space table: bad namespace: " + cols[0]);
    const auto idx = static_cast<VecIndex>(std::stoll(cols[2]));
    if (idx != static_cast<VecIndex>(space.terms_.size()))
      throw Error("feature space table: non-dense column index " + cols[2]);
    if (!space.terms_.empty() && static_cast<std::size_t>(*ns) < static_cast<std::size_t>(prev))
      throw Error("feature space table: namespaces out of order");
    prev = *ns;
    space.terms_.emplace_back(*ns, cols[1]);
  }
  if (space.terms_.empty()) throw EmptyVocabulary("feature space table is empty");
  FeatureSetMask mask;
  bool first = true;
  for (const auto& [ns, token] : space.terms_) {
    (void)token;
    const FeatureSetMask g = [&] {
      switch (group_of(ns)) {
        case FeatureGroup::context: return FeatureSetMask::context();
        case FeatureGroup::text: return FeatureSetMask::text();
        case FeatureGroup::entities: return FeatureSetMask::entities();
        default: return FeatureSetMask::metadata();
      }
    }();
    mask = first ? g : (mask | g);
    first = false;
  }
  space.mask_ = mask;
  space.finalize();
  return space;
}

FeatureSpace FeatureSpace::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature space: " + path);
  return load(in);
}

SparseVec vectorize_visit(const Visit& visit, const FeatureSpace& space, FeatureSetMask mask) {
  // tf per column (map keeps columns sorted, hence blocks contiguous)
  std::map<VecIndex, Scalar> tf;
  for (const auto& [ns, token] : visit.tokens) {
    if (!mask.contains(group_of(ns))) continue;
    if (const auto col = space.column(ns, token)) tf[*col] += 1.0;
  }
  if (tf.empty()) return SparseVec(space.dim());

  std::vector<std::pair<VecIndex, Scalar>> entries(tf.begin(), tf.end());

  // block norms per namespace; ranges are contiguous so a sweep suffices
  std::size_t active_fields = 0;
  std::size_t block_begin = 0;
  while (block_begin < entries.size()) {
    const Field ns = space.term(entries[block_begin].first).first;
    const VecIndex ns_end = space.namespace_range(ns).second;
    std::size_t block_end = block_begin;
    Scalar sq = 0;
    while (block_end < entries.size() && entries[block_end].first < ns_end) {
      sq += entries[block_end].second * entries[block_end].second;
      ++block_end;
    }
    const Scalar norm = std::sqrt(sq);
    for (std::size_t i = block_begin; i < block_end; ++i) entries[i].second /= norm;
    ++active_fields;
    block_begin = block_end;
  }

  const Scalar field_scale = 1.0 / std::sqrt(static_cast<Scalar>(active_fields));
  for (auto& [col, value] : entries) value *= field_scale;
  return make_sparse(space.dim(), std::move(entries));
}

SparseVec user_centroid(const std::vector<SparseVec>& visit_vectors) {
  if (visit_vectors.empty()) throw NoVisits("user_centroid over an empty visit list");
  const VecIndex dim = visit_vectors.front().size();
  std::map<VecIndex, Scalar> sum;
  for (const SparseVec& v : visit_vectors) {
    if (v.size() != dim) throw DimensionMismatch("user_centroid over mixed-dimension vectors");
    for (SparseVec::InnerIterator it(v); it; ++it) sum[it.index()] += it.value();
  }
  const Scalar n = static_cast<Scalar>(visit_vectors.size());
  std::vector<std::pair<VecIndex, Scalar>> entries;
  entries.reserve(sum.size());
  for (const auto& [col, value] : sum) entries.emplace_back(col, value / n);
  return l2_normalized(make_sparse(dim, std::move(entries)));
}

SparseVec vectorize_user(const UserRecord& user, const FeatureSpace& space, FeatureSetMask mask) {
  std::vector<SparseVec> vectors;
  vectors.reserve(user.visits.size());
  for (const Visit& visit : user.visits) vectors.push_back(vectorize_visit(visit, space, mask));
  return user_centroid(vectors);
}

}  // namespace segmod
