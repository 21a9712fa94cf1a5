// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>

#include "lexcomm/hdbscan.hpp"
#include "oracles.hpp"

using namespace lexcomm;
using namespace lexcomm::hdbscan;
using lexcomm::test::Point;

namespace {

const std::vector<Point> kCollinear{{0.0}, {1.0}, {3.0}};

DistanceMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  DistanceMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace

TEST(CoreDistance, CollinearByHand) {
  const auto core = core_distances(pairwise_distances(kCollinear), 1);
  EXPECT_EQ(core, (std::vector<double>{1.0, 1.0, 2.0}));
}

TEST(CoreDistance, IdenticalPointsAndUpperBound) {
  const std::vector<Point> same(5, Point{0.3, -0.2});
  for (std::size_t k = 0; k <= 4; ++k) {
    for (double c : core_distances(pairwise_distances(same), k)) EXPECT_EQ(c, 0.0);
  }
  // k = n-1 is the farthest other point.
  EXPECT_EQ(core_distances(pairwise_distances(kCollinear), 2), (std::vector<double>{3.0, 2.0, 3.0}));
  EXPECT_THROW(core_distances(pairwise_distances(kCollinear), 3), ConfigError);
}

TEST(MutualReachability, CollinearByHand) {
  const auto d = pairwise_distances(kCollinear);
  const auto m = mutual_reachability(d, core_distances(d, 1));
  EXPECT_EQ(m(0, 1), 1.0);
  EXPECT_EQ(m(1, 2), 2.0);
  EXPECT_EQ(m(0, 2), 3.0);
  EXPECT_EQ(m(1, 1), 0.0);
  const std::vector<Point> same(4, Point{1.0, 1.0});
  const auto ds = pairwise_distances(same);
  const auto ms = mutual_reachability(ds, core_distances(ds, 2));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(ms(i, j), 0.0);
  }
}

TEST(MutualReachability, MatchesBruteForceAndIsSymmetric) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    const std::size_t k = rng() % n;
    const auto pts = test::random_points(rng, n, 1 + rng() % 6);
    const auto core = core_distances(pairwise_distances(pts), k);
    const auto ref_core = test::brute_core(pts, k);
    const auto m = mutual_reachability(pairwise_distances(pts), core);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(core[i], ref_core[i], 1e-12);
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_NEAR(m(i, j), test::brute_mreach(pts, ref_core, i, j), 1e-12);
        EXPECT_EQ(m(i, j), m(j, i));
      }
    }
  }
}

TEST(Mst, TriangleAndCollinear) {
  const auto tri = build_mst(from_rows({{0, 1, 3}, {1, 0, 2}, {3, 2, 0}}));
  ASSERT_EQ(tri.size(), 2u);
  EXPECT_EQ(total_weight(tri), 3.0);
  const auto d = pairwise_distances(kCollinear);
  EXPECT_EQ(total_weight(build_mst(mutual_reachability(d, core_distances(d, 1)))), 3.0);
  EXPECT_THROW(build_mst(DistanceMatrix(1)), ConfigError);
}

TEST(Mst, EqualsKruskalOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t n = 2 + rng() % 63;
    const auto pts = test::random_points(rng, n, 1 + rng() % 8);
    const auto d = pairwise_distances(pts);
    const auto m = mutual_reachability(d, core_distances(d, rng() % std::min<std::size_t>(n, 5)));
    const auto edges = build_mst(m);
    ASSERT_EQ(edges.size(), n - 1);
    std::vector<double> w;
    for (const auto& e : edges) w.push_back(e.weight);
    std::sort(w.begin(), w.end());
    EXPECT_EQ(w, test::kruskal_weights(m)) << "trial " << trial;
    // Spanning: the union of edges connects every vertex.
    std::set<std::size_t> seen{0};
    for (bool grew = true; grew;) {
      grew = false;
      for (const auto& e : edges) {
        if (seen.contains(e.a) != seen.contains(e.b)) {
          seen.insert(e.a);
          seen.insert(e.b);
          grew = true;
        }
      }
    }
    EXPECT_EQ(seen.size(), n);
  }
}

TEST(Hierarchy, SingleLinkageSizesAndOrder) {
  const auto d = pairwise_distances(kCollinear);
  const auto merges = single_linkage(build_mst(d), 3);
  ASSERT_EQ(merges.size(), 2u);
  EXPECT_EQ(merges[0].distance, 1.0);
  EXPECT_EQ(merges[0].size, 2u);
  EXPECT_EQ(merges[1].distance, 2.0);
  EXPECT_EQ(merges[1].size, 3u);
  EXPECT_THROW(single_linkage({}, 3), ValidationError);
}

TEST(Extract, TightBlobIsOneClusterWithoutNoise) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1e-3);
  std::vector<Point> blob(20, Point(4));
  for (auto& p : blob) {
    for (auto& x : p) x = g(rng);
  }
  const auto r = cluster(blob, 20, 20);
  EXPECT_EQ(r.cluster_count(), 1u);
  for (int l : r.labels) EXPECT_EQ(l, 0);

  const std::vector<Point> same(20, Point{0.5, 0.5});
  const auto s = cluster(same, 20, 20);
  EXPECT_EQ(s.cluster_count(), 1u);
  EXPECT_EQ(std::count(s.labels.begin(), s.labels.end(), 0), 20);
}

TEST(Extract, TwoSeparatedGroupsOnALine) {
  const std::vector<Point> pts{{0.0}, {0.1}, {0.2}, {0.3}, {10.0}, {10.1}, {10.2}, {10.3}};
  const auto r = cluster(pts, 3, 3);
  ASSERT_EQ(r.cluster_count(), 2u);
  for (int i = 1; i < 4; ++i) EXPECT_EQ(r.labels[i], r.labels[0]);
  for (int i = 5; i < 8; ++i) EXPECT_EQ(r.labels[i], r.labels[4]);
  EXPECT_NE(r.labels[0], r.labels[4]);
}

TEST(Extract, TwoBlobsRecoverGroundTruth) {
  const auto b = test::two_blobs(11, 25, 0);
  const auto r = cluster(b.points, 20, 20);
  ASSERT_EQ(r.cluster_count(), 2u);
  EXPECT_GE(test::member_purity(b.truth, r.labels), 0.95);
}

TEST(Extract, TwoBlobsWithScatterAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto b = test::two_blobs(seed);
    const auto r = cluster(b.points, 20, 20);
    ASSERT_EQ(r.cluster_count(), 2u) << "seed " << seed;
    EXPECT_GE(test::member_purity(b.truth, r.labels), 0.95) << "seed " << seed;
    EXPECT_GE(test::scatter_as_noise(b.truth, r.labels), 8u) << "seed " << seed;
  }
}

TEST(Extract, SizeFloorAndLabelRangeOnRandomData) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng() % 80;
    const std::size_t mcs = 2 + rng() % 10;
    const auto pts = test::random_points(rng, n, 1 + rng() % 4);
    const auto r = cluster(pts, mcs, 1 + rng() % mcs);
    ASSERT_EQ(r.labels.size(), n);
    std::vector<std::size_t> sizes(r.cluster_count(), 0);
    for (int l : r.labels) {
      ASSERT_GE(l, -1);
      ASSERT_LT(l, static_cast<int>(r.cluster_count()));
      if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
    }
    for (auto s : sizes) EXPECT_GE(s, mcs) << "trial " << trial;
  }
}

TEST(Extract, BelowMinimumIsAllNoise) {
  const auto r = cluster(std::vector<Point>(5, Point{0.0}), 6, 6);
  EXPECT_EQ(r.cluster_count(), 0u);
  for (int l : r.labels) EXPECT_EQ(l, -1);
  EXPECT_THROW(cluster(kCollinear, 1, 1), ConfigError);
  EXPECT_THROW(cluster(kCollinear, 2, 0), ConfigError);
}
