// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "lexcomm/cluster.hpp"
#include "lexcomm/record.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace lexcomm;

namespace {

const ProvisionRef k823{"BGB", 823};

Record make(std::size_t i, std::vector<double> v, const std::string& keyword = "kw") {
  Record r;
  r.record_id = make_record_id(1, k823, {"D", i});
  r.provision = k823;
  r.chunk_id = {"D", i};
  r.summary = "s";
  r.keyword = keyword;
  r.relevant = true;
  r.embedding = Embedding::unit(std::move(v));
  return r;
}

/// 25 + 25 records carrying cluster markers plus 5 unmarked ones, embedded by the offline backend.
std::pair<std::vector<Record>, std::map<std::string, int>> marker_fixture(std::uint64_t seed) {
  MockBackend mock(seed);
  std::vector<Record> rs;
  std::map<std::string, int> truth;
  std::size_t i = 0;
  for (int group = 1; group <= 2; ++group) {
    for (int k = 0; k < 25; ++k, ++i) {
      const auto text = "CLUSTER" + std::to_string(group) + ": thema " + std::to_string(k);
      rs.push_back(make(i, mock.embed_one(text), text));
      truth[rs.back().record_id] = group;
    }
  }
  for (int k = 0; k < 5; ++k, ++i) {
    const auto text = "vereinzelt " + std::to_string(k);
    rs.push_back(make(i, mock.embed_one(text), text));
    truth[rs.back().record_id] = -1;
  }
  return {rs, truth};
}

std::vector<Record> random_records(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Record> rs;
  const std::size_t groups = 1 + rng() % 3;
  std::vector<std::vector<double>> centres(groups, std::vector<double>(6));
  for (auto& c : centres) {
    for (auto& x : c) x = g(rng);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto v = centres[rng() % groups];
    for (auto& x : v) x += 0.3 * g(rng);
    rs.push_back(make(i, v));
  }
  return rs;
}

std::set<std::set<std::string>> as_sets(const ClusteringResult& r) {
  std::set<std::set<std::string>> out;
  for (const auto& c : r.clusters) out.insert({c.members.begin(), c.members.end()});
  return out;
}

void check_partition(const std::vector<Record>& input, const ClusteringResult& r) {
  std::multiset<std::string> seen(r.noise.begin(), r.noise.end());
  for (const auto& c : r.clusters) {
    EXPECT_GE(c.members.size(), r.params.min_cluster_size);
    seen.insert(c.members.begin(), c.members.end());
  }
  std::multiset<std::string> expected;
  for (const auto& rec : input) expected.insert(rec.record_id);
  EXPECT_EQ(seen, expected);
}

}  // namespace

TEST(RunClustering, BelowThresholdIsAllNoiseWithWarning) {
  std::vector<Record> rs;
  for (std::size_t i = 0; i < 19; ++i) rs.push_back(make(i, {1.0, 0.0}));
  const auto r = run_clustering(k823, rs, ClusterParams{});
  EXPECT_TRUE(r.clusters.empty());
  EXPECT_EQ(r.noise.size(), 19u);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_TRUE(std::is_sorted(r.noise.begin(), r.noise.end()));
}

TEST(RunClustering, RecoversMarkerGroups) {
  for (std::uint64_t seed : {0u, 42u, 7u}) {
    const auto [rs, truth] = marker_fixture(seed);
    const auto r = run_clustering(k823, rs, ClusterParams{});
    ASSERT_EQ(r.clusters.size(), 2u) << "seed " << seed;
    // Purity over the marked members: each lands in the cluster whose majority
    // shares its marker. Unmarked vectors may attach to either group.
    std::vector<int> t;
    std::vector<int> labels;
    for (const auto& rec : rs) {
      t.push_back(truth.at(rec.record_id) - 1);
      int label = -1;
      for (const auto& c : r.clusters) {
        if (std::binary_search(c.members.begin(), c.members.end(), rec.record_id)) label = static_cast<int>(c.index);
      }
      labels.push_back(label);
    }
    EXPECT_GE(test::member_purity(t, labels), 0.95) << "seed " << seed;
    std::set<int> majorities;
    for (const auto& c : r.clusters) {
      std::map<int, int> votes;
      for (const auto& id : c.members) ++votes[truth.at(id)];
      majorities.insert(std::max_element(votes.begin(), votes.end(), [](auto& a, auto& b) { return a.second < b.second; })->first);
    }
    EXPECT_EQ(majorities, (std::set<int>{1, 2}));
    check_partition(rs, r);
  }
}

TEST(RunClustering, HeadlineTiesBreakByRecordId) {
  // All members coincide, so every distance to the centroid ties.
  std::vector<Record> rs;
  for (std::size_t i = 0; i < 20; ++i) rs.push_back(make(i, {0.0, 1.0, 0.0}));
  const auto r = run_clustering(k823, rs, ClusterParams{});
  ASSERT_EQ(r.clusters.size(), 1u);
  std::vector<std::string> ids;
  for (const auto& rec : rs) ids.push_back(rec.record_id);
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(r.clusters[0].headlines, std::vector<std::string>(ids.begin(), ids.begin() + 5));
}

TEST(RunClustering, SixEquidistantMembersKeepTheFiveSmallestIds) {
  std::vector<const Record*> members;
  std::vector<Record> rs;
  for (std::size_t i = 0; i < 6; ++i) rs.push_back(make(i, {1.0, 0.0}));
  rs.push_back(make(6, {0.0, 1.0}));
  for (const auto& r : rs) members.push_back(&r);
  const auto centre = Embedding::unit({1.0, 0.0});
  auto ids = std::vector<std::string>{};
  for (std::size_t i = 0; i < 6; ++i) ids.push_back(rs[i].record_id);
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(select_headlines(members, centre, 5), std::vector<std::string>(ids.begin(), ids.begin() + 5));
}

TEST(RunClustering, IgnoresUnclusterableAndRejectsForeignRecords) {
  auto [rs, truth] = marker_fixture(3);
  rs[0].relevant = false;
  rs[1].embedding.reset();
  const auto r = run_clustering(k823, rs, ClusterParams{});
  std::size_t total = r.noise.size();
  for (const auto& c : r.clusters) total += c.members.size();
  EXPECT_EQ(total, rs.size() - 2);
  rs[2].provision = ProvisionRef{"BGB", 280};
  EXPECT_THROW(run_clustering(k823, rs, ClusterParams{}), ValidationError);
}

TEST(RunClustering, OrderedBySizeThenSmallestId) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rs = random_records(rng, 30 + rng() % 50);
    ClusterParams p;
    p.min_cluster_size = 5;
    const auto r = run_clustering(k823, rs, p);
    for (std::size_t i = 0; i < r.clusters.size(); ++i) {
      EXPECT_EQ(r.clusters[i].index, i);
      EXPECT_TRUE(std::is_sorted(r.clusters[i].members.begin(), r.clusters[i].members.end()));
      if (i == 0) continue;
      const auto& a = r.clusters[i - 1];
      const auto& b = r.clusters[i];
      EXPECT_TRUE(a.members.size() > b.members.size() ||
                  (a.members.size() == b.members.size() && a.members.front() < b.members.front()));
    }
  }
}

TEST(ClusterProperties, PartitionSizeFloorAndPermutationInvariance) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    auto rs = random_records(rng, 10 + rng() % 70);
    ClusterParams p;
    p.min_cluster_size = 2 + rng() % 12;
    if (rng() % 2) p.min_samples = 1 + rng() % p.min_cluster_size;
    const auto r = run_clustering(k823, rs, p);
    check_partition(rs, r);
    std::shuffle(rs.begin(), rs.end(), rng);
    const auto shuffled = run_clustering(k823, rs, p);
    EXPECT_EQ(as_sets(r), as_sets(shuffled)) << "trial " << trial;
    EXPECT_EQ(r.noise, shuffled.noise);
    EXPECT_EQ(nlohmann::json(r).dump(), nlohmann::json(shuffled).dump());
  }
}

TEST(ClusterProperties, CentroidIdempotenceThroughStorage) {
  const auto [rs, truth] = marker_fixture(9);
  const auto r = run_clustering(k823, rs, ClusterParams{});
  const auto stored = nlohmann::json::parse(nlohmann::json(r).dump()).get<ClusteringResult>();
  std::map<std::string, const Record*> by_id;
  for (const auto& rec : rs) by_id[rec.record_id] = &rec;
  ASSERT_EQ(stored.clusters.size(), r.clusters.size());
  for (const auto& c : stored.clusters) {
    std::vector<const std::vector<double>*> vs;
    for (const auto& id : c.members) vs.push_back(&by_id.at(id)->embedding->vector);
    const auto again = centroid_of(vs);
    ASSERT_EQ(again.dim(), c.centroid.dim());
    for (std::size_t i = 0; i < again.dim(); ++i) EXPECT_NEAR(again.vector[i], c.centroid.vector[i], 1e-9);
    // Headlines depend only on member embeddings and ids.
    std::vector<const Record*> members;
    for (const auto& id : c.members) members.push_back(by_id.at(id));
    EXPECT_EQ(select_headlines(members, again, 5), c.headlines);
  }
}

TEST(ClusterProperties, InputDigestTracksContent) {
  auto [rs, truth] = marker_fixture(1);
  const auto a = records_digest(rs);
  std::reverse(rs.begin(), rs.end());
  EXPECT_EQ(records_digest(rs), a);
  rs[4].keyword += "x";
  EXPECT_NE(records_digest(rs), a);
}
