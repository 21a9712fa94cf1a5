// SPDX-License-Identifier: Apache-2.0
//
// Dense HDBSCAN: core distances, mutual reachability, Prim MST, single-linkage
// hierarchy, condensed tree and excess-of-mass cluster selection. O(n^2) memory
// and time; intended for a few thousand points per call.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "lexcomm/error.hpp"

namespace lexcomm::hdbscan {

/// Row-major symmetric n x n matrix.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Euclidean distances; Points is any indexable sequence of indexable coordinate sequences.
template <typename Points>
DistanceMatrix pairwise_distances(const Points& points) {
  const std::size_t n = std::size(points);
  DistanceMatrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = points[i];
      const auto& b = points[j];
      if (std::size(a) != std::size(b)) throw ValidationError("points of different dimension");
      double s = 0.0;
      for (std::size_t k = 0; k < std::size(a); ++k) {
        const double t = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        s += t * t;
      }
      d(i, j) = d(j, i) = std::sqrt(s);
    }
  }
  return d;
}

/// Distance from each point to its k-th nearest other point. k = 0 yields zeros.
inline std::vector<double> core_distances(const DistanceMatrix& d, std::size_t k) {
  const std::size_t n = d.size();
  if (n == 0) return {};
  if (k > n - 1) {
    throw ConfigError("core distance needs k <= n-1 (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  std::vector<double> core(n, 0.0);
  if (k == 0) return core;
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(d(i, j));
    }
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    core[i] = row[k - 1];
  }
  return core;
}

inline DistanceMatrix mutual_reachability(const DistanceMatrix& d, const std::vector<double>& core) {
  const std::size_t n = d.size();
  if (core.size() != n) throw ValidationError("core distances do not match the matrix");
  DistanceMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = std::max({core[i], core[j], d(i, j)});
  }
  return m;
}

struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

/// Prim's algorithm on the dense matrix, starting at vertex 0. Among equal
/// candidate weights the lowest vertex index is attached first.
inline std::vector<Edge> build_mst(const DistanceMatrix& m) {
  const std::size_t n = m.size();
  if (n < 2) throw ConfigError("a spanning tree needs at least two points");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, inf);
  std::vector<std::size_t> from(n, 0);
  std::vector<Edge> edges;
  edges.reserve(n - 1);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t next = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      if (m(current, v) < best[v]) {
        best[v] = m(current, v);
        from[v] = current;
      }
      if (next == n || best[v] < best[next]) next = v;
    }
    in_tree[next] = true;
    edges.push_back({from[next], next, best[next]});
    current = next;
  }
  return edges;
}

inline double total_weight(const std::vector<Edge>& edges) {
  return std::accumulate(edges.begin(), edges.end(), 0.0, [](double s, const Edge& e) { return s + e.weight; });
}

/// One merge of the single-linkage dendrogram. Nodes < n are points; node n+i is
/// the cluster created by merge i.
struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double distance = 0.0;
  std::size_t size = 0;
};

inline std::vector<Merge> single_linkage(std::vector<Edge> mst, std::size_t n) {
  if (mst.size() + 1 != n) throw ValidationError("spanning tree has the wrong number of edges");
  std::stable_sort(mst.begin(), mst.end(), [](const Edge& x, const Edge& y) { return x.weight < y.weight; });
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::vector<std::size_t> size(2 * n - 1, 1);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::vector<Merge> out;
  out.reserve(n - 1);
  std::size_t next = n;
  for (const auto& e : mst) {
    const auto ra = find(e.a);
    const auto rb = find(e.b);
    const auto left = std::min(ra, rb);
    const auto right = std::max(ra, rb);
    size[next] = size[ra] + size[rb];
    out.push_back({left, right, e.weight, size[next]});
    parent[ra] = parent[rb] = next;
    ++next;
  }
  return out;
}

/// Distances at or below this are treated as this value when converted to lambda = 1/d.
inline constexpr double kMinDistance = 1e-12;

inline double lambda_of(double distance) { return 1.0 / std::max(distance, kMinDistance); }

/// Row of the condensed tree: `child` left `parent` at `lambda`. Children below
/// n are points (child_size 1), others are clusters.
struct CondensedRow {
  std::size_t parent = 0;
  std::size_t child = 0;
  double lambda = 0.0;
  std::size_t child_size = 0;
};

struct CondensedTree {
  std::size_t n = 0;
  std::vector<CondensedRow> rows;
  std::size_t root() const noexcept { return n; }
  /// Cluster labels are n, n+1, ..., n+cluster_count-1; children always have larger labels than parents.
  std::size_t cluster_count = 0;
};

inline CondensedTree condense_tree(const std::vector<Merge>& hierarchy, std::size_t n, std::size_t min_cluster_size) {
  if (hierarchy.size() + 1 != n) throw ValidationError("hierarchy has the wrong number of merges");
  CondensedTree tree;
  tree.n = n;
  const std::size_t root = 2 * n - 2;
  auto node_size = [&](std::size_t node) { return node < n ? std::size_t{1} : hierarchy[node - n].size; };
  auto children = [&](std::size_t node, std::vector<std::size_t>& out) {
    out.push_back(hierarchy[node - n].left);
    out.push_back(hierarchy[node - n].right);
  };
  auto leaves = [&](std::size_t node) {
    std::vector<std::size_t> out;
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      if (x < n) {
        out.push_back(x);
      } else {
        children(x, stack);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  };

  std::vector<std::size_t> relabel(2 * n - 1, 0);
  std::size_t next_label = n;
  relabel[root] = next_label++;

  // Breadth-first over the merges that still carry a cluster.
  std::vector<std::size_t> queue{root};
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const auto node = queue[qi];
    if (node < n) continue;
    const auto& m = hierarchy[node - n];
    const double lambda = lambda_of(m.distance);
    const auto ls = node_size(m.left);
    const auto rs = node_size(m.right);
    const auto parent = relabel[node];
    auto fall_out = [&](std::size_t sub) {
      for (auto p : leaves(sub)) tree.rows.push_back({parent, p, lambda, 1});
    };
    if (ls >= min_cluster_size && rs >= min_cluster_size) {
      for (auto c : {m.left, m.right}) {
        relabel[c] = next_label++;
        tree.rows.push_back({parent, relabel[c], lambda, node_size(c)});
        queue.push_back(c);
      }
    } else if (ls < min_cluster_size && rs < min_cluster_size) {
      fall_out(m.left);
      fall_out(m.right);
    } else if (ls < min_cluster_size) {
      relabel[m.right] = parent;
      fall_out(m.left);
      queue.push_back(m.right);
    } else {
      relabel[m.left] = parent;
      fall_out(m.right);
      queue.push_back(m.left);
    }
  }
  tree.cluster_count = next_label - n;
  return tree;
}

/// Excess of mass of each condensed cluster: sum over its rows of
/// (lambda - lambda_birth) * child_size. Indexed by label - n.
inline std::vector<double> cluster_stability(const CondensedTree& tree) {
  std::vector<double> birth(tree.cluster_count, 0.0);
  for (const auto& r : tree.rows) {
    if (r.child >= tree.n) birth[r.child - tree.n] = r.lambda;
  }
  std::vector<double> stability(tree.cluster_count, 0.0);
  for (const auto& r : tree.rows) {
    stability[r.parent - tree.n] += (r.lambda - birth[r.parent - tree.n]) * static_cast<double>(r.child_size);
  }
  return stability;
}

struct Result {
  /// Flat cluster index per point, -1 for noise. Flat clusters are numbered in
  /// ascending condensed label order.
  std::vector<int> labels;
  /// Stability of each flat cluster.
  std::vector<double> stability;
  std::size_t cluster_count() const noexcept { return stability.size(); }
};

/// Excess-of-mass selection over the condensed tree. The root may be selected,
/// so a single dense group forms one cluster. Ties keep the parent.
inline Result extract_clusters(const CondensedTree& tree) {
  const std::size_t n = tree.n;
  const std::size_t k = tree.cluster_count;
  const auto own = cluster_stability(tree);
  std::vector<double> stability = own;
  std::vector<std::vector<std::size_t>> child_clusters(k);
  std::vector<std::size_t> cluster_parent(k, 0);
  for (const auto& r : tree.rows) {
    if (r.child >= n) {
      child_clusters[r.parent - n].push_back(r.child - n);
      cluster_parent[r.child - n] = r.parent - n;
    }
  }
  std::vector<bool> selected(k, false);
  for (std::size_t c = k; c-- > 0;) {
    double subtree = 0.0;
    for (auto ch : child_clusters[c]) subtree += stability[ch];
    if (!child_clusters[c].empty() && subtree > stability[c]) {
      stability[c] = subtree;
      continue;
    }
    selected[c] = true;
    std::vector<std::size_t> stack(child_clusters[c].begin(), child_clusters[c].end());
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      selected[x] = false;
      stack.insert(stack.end(), child_clusters[x].begin(), child_clusters[x].end());
    }
  }

  Result out;
  std::vector<int> flat(k, -1);
  for (std::size_t c = 0; c < k; ++c) {
    if (!selected[c]) continue;
    flat[c] = static_cast<int>(out.stability.size());
    out.stability.push_back(own[c]);
  }

  // A point belongs to the nearest selected cluster among the cluster it left
  // and that cluster's ancestors. Inside a selected root only points that stay
  // until the root's last split count as members.
  double root_max_lambda = 0.0;
  for (const auto& r : tree.rows) {
    if (r.parent == n) root_max_lambda = std::max(root_max_lambda, r.lambda);
  }
  out.labels.assign(n, -1);
  for (const auto& r : tree.rows) {
    if (r.child >= n) continue;
    std::size_t c = r.parent - n;
    while (!selected[c] && c != 0) c = cluster_parent[c];
    if (!selected[c]) continue;
    if (c == 0 && r.lambda < root_max_lambda) continue;
    out.labels[r.child] = flat[c];
  }
  return out;
}

/// The full pipeline on a point set. min_samples counts the point itself, so
/// core distances use the (min_samples - 1)-th nearest other point.
template <typename Points>
Result cluster(const Points& points, std::size_t min_cluster_size, std::size_t min_samples) {
  const std::size_t n = std::size(points);
  if (min_cluster_size < 2) throw ConfigError("min_cluster_size must be >= 2");
  if (min_samples < 1) throw ConfigError("min_samples must be >= 1");
  if (n < min_cluster_size || n < 2) return {std::vector<int>(n, -1), {}};
  const auto d = pairwise_distances(points);
  const auto core = core_distances(d, std::min(min_samples - 1, n - 1));
  const auto mst = build_mst(mutual_reachability(d, core));
  const auto tree = condense_tree(single_linkage(mst, n), n, min_cluster_size);
  return extract_clusters(tree);
}

}  // namespace lexcomm::hdbscan
