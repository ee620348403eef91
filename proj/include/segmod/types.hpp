#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "segmod/errors.hpp"

namespace segmod {

using Scalar = double;
using SparseVec = Eigen::SparseVector<Scalar>;
using DenseVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using VecIndex = Eigen::Index;

// Internal dense user id, assigned in first-seen order.
using UserId = std::uint32_t;

// Sorted ascending, no duplicates.
using UserSet = std::vector<UserId>;

// Builds a sparse vector from (index, value) pairs. Pairs may arrive in any
// order; zero values are dropped.
inline SparseVec make_sparse(VecIndex dim, std::vector<std::pair<VecIndex, Scalar>> entries) {
  std::sort(entries.begin(), entries.end());
  SparseVec v(dim);
  v.reserve(static_cast<VecIndex>(entries.size()));
  for (const auto& [i, x] : entries) {
    if (x == Scalar(0)) continue;
    v.insert(i) = x;  // ascending order keeps this an append
  }
  return v;
}

inline SparseVec l2_normalized(const SparseVec& v) {
  const Scalar n = v.norm();
  if (n == Scalar(0)) return v;
  return v / n;
}

inline std::vector<std::pair<VecIndex, Scalar>> to_pairs(const SparseVec& v) {
  std::vector<std::pair<VecIndex, Scalar>> out;
  out.reserve(static_cast<std::size_t>(v.nonZeros()));
  for (SparseVec::InnerIterator it(v); it; ++it) out.emplace_back(it.index(), it.value());
  return out;
}

inline UserSet set_intersect(const UserSet& a, const UserSet& b) {
  UserSet out;
  out.reserve(std::min(a.size(), b.size()));
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline UserSet set_union(const UserSet& a, const UserSet& b) {
  UserSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline UserSet set_difference(const UserSet& a, const UserSet& b) {
  UserSet out;
  out.reserve(a.size());
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// %.17g round-trips IEEE doubles exactly.
inline std::string format_scalar(Scalar x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Wire form: "index:value" pairs, space separated, ascending index.
inline std::string to_wire(const SparseVec& v) {
  std::string out;
  bool first = true;
  for (SparseVec::InnerIterator it(v); it; ++it) {
    if (!first) out += ' ';
    out += std::to_string(it.index());
    out += ':';
    out += format_scalar(it.value());
    first = false;
  }
  return out;
}

inline SparseVec sparse_from_wire(VecIndex dim, const std::string& text) {
  std::vector<std::pair<VecIndex, Scalar>> entries;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    if (pos >= text.size()) break;
    const std::size_t colon = text.find(':', pos);
    const std::size_t end = text.find(' ', pos);
    const std::size_t stop = end == std::string::npos ? text.size() : end;
    if (colon == std::string::npos || colon >= stop)
      throw Error("sparse_from_wire: malformed entry near offset " + std::to_string(pos));
    const VecIndex idx = static_cast<VecIndex>(std::stoll(text.substr(pos, colon - pos)));
    const Scalar val = std::stod(text.substr(colon + 1, stop - colon - 1));
    if (idx < 0 || idx >= dim) throw Error("sparse_from_wire: index out of range");
    entries.emplace_back(idx, val);
    pos = stop;
  }
  return make_sparse(dim, std::move(entries));
}

}  // namespace segmod
