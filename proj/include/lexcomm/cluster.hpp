// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexcomm/digest.hpp"
#include "lexcomm/error.hpp"
#include "lexcomm/gateway.hpp"
#include "lexcomm/hdbscan.hpp"
#include "lexcomm/provision.hpp"
#include "lexcomm/record.hpp"

namespace lexcomm {

struct ClusterParams {
  std::size_t min_cluster_size = 20;
  /// Defaults to min_cluster_size when unset.
  std::optional<std::size_t> min_samples;
  std::size_t headline_count = 5;

  std::size_t effective_min_samples() const { return min_samples.value_or(min_cluster_size); }

  void validate() const {
    if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be >= 2");
    if (min_samples && *min_samples < 1) throw ConfigError("min_samples must be >= 1");
    if (headline_count < 1) throw ConfigError("headline_count must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const ClusterParams& p) {
  j = nlohmann::json{{"min_cluster_size", p.min_cluster_size},
                     {"min_samples", p.effective_min_samples()},
                     {"headline_count", p.headline_count},
                     {"metric", "euclidean-on-normalized"}};
}
inline void from_json(const nlohmann::json& j, ClusterParams& p) {
  p.min_cluster_size = j.at("min_cluster_size").get<std::size_t>();
  if (j.contains("min_samples") && !j["min_samples"].is_null()) p.min_samples = j["min_samples"].get<std::size_t>();
  p.headline_count = j.value("headline_count", std::size_t{5});
}

struct Cluster {
  ProvisionRef provision;
  std::size_t index = 0;
  std::vector<std::string> members;  // ascending record_id
  Embedding centroid;
  std::vector<std::string> headlines;  // nearest to the centroid first
  double stability = 0.0;
};

struct ClusteringResult {
  ProvisionRef provision;
  ClusterParams params;
  std::vector<Cluster> clusters;
  std::vector<std::string> noise;  // ascending record_id
  std::string input_digest;
  std::vector<std::string> warnings;
};

inline void to_json(nlohmann::json& j, const Cluster& c) {
  j = nlohmann::json{{"index", c.index},       {"members", c.members},     {"centroid", c.centroid.vector},
                     {"headlines", c.headlines}, {"stability", c.stability}};
}

inline void to_json(nlohmann::json& j, const ClusteringResult& r) {
  j = nlohmann::json{{"provision", r.provision}, {"params", r.params},   {"input_digest", r.input_digest},
                     {"clusters", r.clusters},   {"noise", r.noise}};
}

inline void from_json(const nlohmann::json& j, ClusteringResult& r) {
  r.provision = j.at("provision").get<ProvisionRef>();
  r.params = j.at("params").get<ClusterParams>();
  r.input_digest = j.at("input_digest").get<std::string>();
  r.noise = j.at("noise").get<std::vector<std::string>>();
  r.clusters.clear();
  for (const auto& c : j.at("clusters")) {
    Cluster x;
    x.provision = r.provision;
    x.index = c.at("index").get<std::size_t>();
    x.members = c.at("members").get<std::vector<std::string>>();
    x.centroid = Embedding{c.at("centroid").get<std::vector<double>>(), true};
    x.headlines = c.at("headlines").get<std::vector<std::string>>();
    x.stability = c.at("stability").get<double>();
    r.clusters.push_back(std::move(x));
  }
}

/// Digest of the clustering input: ids, keywords and embeddings of the
/// clusterable records, in record_id order.
inline std::string records_digest(std::vector<const Record*> records) {
  std::sort(records.begin(), records.end(), [](const auto* a, const auto* b) { return a->record_id < b->record_id; });
  Hasher h;
  for (const auto* r : records) {
    h.field(r->record_id).field(r->keyword).field(r->summary);
    if (r->embedding) h.field(nlohmann::json(r->embedding->vector).dump());
  }
  return h.hex();
}

inline std::string records_digest(const std::vector<Record>& records) {
  std::vector<const Record*> ptrs;
  for (const auto& r : records) ptrs.push_back(&r);
  return records_digest(std::move(ptrs));
}

/// Mean of the member embeddings, L2-normalized.
inline Embedding centroid_of(const std::vector<const std::vector<double>*>& vectors) {
  if (vectors.empty()) throw ValidationError("centroid of an empty cluster");
  std::vector<double> sum(vectors.front()->size(), 0.0);
  for (const auto* v : vectors) {
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
  }
  for (auto& x : sum) x /= static_cast<double>(vectors.size());
  return Embedding::unit(std::move(sum));
}

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// The `count` members nearest to the centroid, ties by ascending record_id.
inline std::vector<std::string> select_headlines(const std::vector<const Record*>& members, const Embedding& centroid,
                                                 std::size_t count) {
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto* r : members) ranked.emplace_back(euclidean(r->embedding->vector, centroid.vector), r->record_id);
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < count; ++i) out.push_back(ranked[i].second);
  return out;
}

/// Clusters the records of one provision. Records that are not clusterable
/// (irrelevant, or without keyword or embedding) are ignored entirely.
inline ClusteringResult run_clustering(const ProvisionRef& provision, const std::vector<Record>& records,
                                       const ClusterParams& params) {
  params.validate();
  std::vector<const Record*> input;
  for (const auto& r : records) {
    if (r.provision != provision) {
      throw ValidationError("record " + r.record_id + " belongs to " + r.provision.render() + ", not " +
                            provision.render());
    }
    if (r.clusterable()) input.push_back(&r);
  }
  std::sort(input.begin(), input.end(), [](const auto* a, const auto* b) { return a->record_id < b->record_id; });
  for (std::size_t i = 1; i < input.size(); ++i) {
    if (input[i]->record_id == input[i - 1]->record_id) throw ValidationError("duplicate record " + input[i]->record_id);
  }

  ClusteringResult result;
  result.provision = provision;
  result.params = params;
  result.input_digest = records_digest(input);
  if (input.empty()) return result;
  const auto dim = input.front()->embedding->dim();
  for (const auto* r : input) {
    if (r->embedding->dim() != dim) throw ValidationError("embeddings of different dimension for " + provision.render());
  }
  if (input.size() < params.min_cluster_size) {
    result.warnings.push_back(provision.render() + ": " + std::to_string(input.size()) +
                              " records, fewer than min_cluster_size " + std::to_string(params.min_cluster_size) +
                              "; all treated as noise");
    for (const auto* r : input) result.noise.push_back(r->record_id);
    return result;
  }

  std::vector<std::vector<double>> points;
  points.reserve(input.size());
  for (const auto* r : input) points.push_back(r->embedding->vector);
  const auto flat = hdbscan::cluster(points, params.min_cluster_size, params.effective_min_samples());

  std::vector<std::vector<const Record*>> groups(flat.cluster_count());
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (flat.labels[i] < 0) {
      result.noise.push_back(input[i]->record_id);
    } else {
      groups[static_cast<std::size_t>(flat.labels[i])].push_back(input[i]);
    }
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& members = groups[g];
    if (members.size() < params.min_cluster_size) {
      throw ValidationError("cluster below min_cluster_size for " + provision.render());
    }
    Cluster c;
    c.provision = provision;
    c.stability = flat.stability[g];
    std::vector<const std::vector<double>*> vectors;
    for (const auto* r : members) {
      c.members.push_back(r->record_id);
      vectors.push_back(&r->embedding->vector);
    }
    c.centroid = centroid_of(vectors);
    c.headlines = select_headlines(members, c.centroid, params.headline_count);
    result.clusters.push_back(std::move(c));
  }
  std::sort(result.clusters.begin(), result.clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.members.front() < b.members.front();
  });
  for (std::size_t i = 0; i < result.clusters.size(); ++i) result.clusters[i].index = i;
  return result;
}

}  // namespace lexcomm
