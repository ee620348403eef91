#pragma once

#include <string>
#include <vector>

#include "segmod/fields.hpp"
#include "segmod/svm.hpp"
#include "segmod/types.hpp"
#include "segmod/vectorizer.hpp"

namespace segmod {

struct TagCloudEntry {
  Field ns;
  std::string token;
  double contribution;  // > 0
};

// Ranked keyword explanation of a segment: contributions are non-increasing,
// at most k entries.
struct TagCloud {
  std::vector<TagCloudEntry> entries;
  int k = 0;
};

// Feature i contributes w_i * mu_i, the i-th term of the dot product that
// decides whether the positive-class centroid scores positive. The top-k
// strictly positive contributors come back mapped to (namespace, token); ties
// break lexicographically. Throws EmptyCloud / DimensionMismatch.
TagCloud tag_cloud(const SvmModel& model, const SparseVec& positive_centroid, int k, const FeatureSpace& space);

enum class CloudFormat { text, json, html };

// text: uppercase tokens, alphabetized. json: ranked records with
// contributions. html: self-contained page, font size linear in contribution
// (10pt..32pt; a degenerate range maps to the maximum).
std::string render(const TagCloud& cloud, CloudFormat format);

TagCloud cloud_from_json(const std::string& text);

}  // namespace segmod
