#include "segmod/explainer.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace segmod {

using json = nlohmann::json;

TagCloud tag_cloud(const SvmModel& model, const SparseVec& positive_centroid, int k, const FeatureSpace& space) {
  if (k < 1) throw InvalidConfig("tag cloud needs k >= 1");
  if (positive_centroid.size() != model.w.size() || model.w.size() != space.dim())
    throw DimensionMismatch("model, centroid and feature space dimensions differ");

  std::vector<TagCloudEntry> entries;
  for (SparseVec::InnerIterator it(positive_centroid); it; ++it) {
    const double contribution = model.w[it.index()] * it.value();
    if (contribution > 0) {
      const auto& [ns, token] = space.term(it.index());
      entries.push_back({ns, token, contribution});
    }
  }
  if (entries.empty()) throw EmptyCloud("no feature contributes positively to the segment centroid");

  std::sort(entries.begin(), entries.end(), [](const TagCloudEntry& a, const TagCloudEntry& b) {
    if (a.contribution != b.contribution) return a.contribution > b.contribution;
    if (a.ns != b.ns) return a.ns < b.ns;
    return a.token < b.token;
  });
  if (entries.size() > static_cast<std::size_t>(k)) entries.resize(static_cast<std::size_t>(k));
  return TagCloud{std::move(entries), k};
}

namespace {

std::string upper_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  return out;
}

// alphabetized uppercase tokens, deduplicated, with the entry carried along
std::vector<std::pair<std::string, const TagCloudEntry*>> alphabetized(const TagCloud& cloud) {
  std::vector<std::pair<std::string, const TagCloudEntry*>> out;
  for (const auto& e : cloud.entries) out.emplace_back(upper_ascii(e.token), &e);
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  out.erase(std::unique(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first == b.first; }),
            out.end());
  return out;
}

}  // namespace

std::string render(const TagCloud& cloud, CloudFormat format) {
  switch (format) {
    case CloudFormat::text: {
      std::string out;
      for (const auto& [word, entry] : alphabetized(cloud)) {
        if (!out.empty()) out += ' ';
        out += word;
      }
      return out;
    }
    case CloudFormat::json: {
      json arr = json::array();
      int rank = 1;
      for (const auto& e : cloud.entries) {
        arr.push_back({{"namespace", to_string(e.ns)},
                       {"token", e.token},
                       {"contribution", e.contribution},
                       {"rank", rank}});
        ++rank;
      }
      return arr.dump(2);
    }
    case CloudFormat::html: {
      double lo = cloud.entries.front().contribution, hi = lo;
      for (const auto& e : cloud.entries) {
        lo = std::min(lo, e.contribution);
        hi = std::max(hi, e.contribution);
      }
      std::string body;
      for (const auto& [word, entry] : alphabetized(cloud)) {
        const double size =
            hi > lo ? 10.0 + (entry->contribution - lo) / (hi - lo) * 22.0 : 32.0;
        char pt[32];
        std::snprintf(pt, sizeof pt, "%.1f", size);
        body += "    <span style=\"font-size:" + std::string(pt) + "pt\" title=\"" + to_string(entry->ns) +
                "\">" + word + "</span>\n";
      }
      return "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>Segment tag cloud</title></head>\n"
             "<body>\n  <div style=\"font-family:sans-serif;line-height:2.2\">\n" +
             body + "  </div>\n</body>\n</html>\n";
    }
  }
  return {};
}

TagCloud cloud_from_json(const std::string& text) {
  json arr = json::parse(text, nullptr, false);
  if (arr.is_discarded() || !arr.is_array()) throw Error("tag cloud json must be an array");
  TagCloud cloud;
  for (const auto& item : arr) {
    const auto ns = field_from_string(item.at("namespace").get<std::string>());
    if (!ns) throw Error("unknown namespace in tag cloud json");
    cloud.entries.push_back({*ns, item.at("token").get<std::string>(), item.at("contribution").get<double>()});
  }
  cloud.k = static_cast<int>(cloud.entries.size());
  return cloud;
}

}  // namespace segmod
