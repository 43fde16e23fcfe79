#pragma once

#include <array>
#include <cstdint>

#include "gpa/tensor.hpp"

namespace gpa {

// Sparse spatial adjacency over patch centers: per-row sorted neighbor ids,
// self edges implicit (the dense view carries a unit diagonal).
struct SpatialAdjacency {
  int64_t n = 0;
  std::vector<int64_t> offsets;    // n + 1
  std::vector<int32_t> neighbors;  // sorted within each row, self excluded

  int64_t degree(int64_t i) const { return offsets[i + 1] - offsets[i]; }
  bool has_edge(int64_t i, int64_t j) const {
    const int32_t* lo = neighbors.data() + offsets[i];
    const int32_t* hi = neighbors.data() + offsets[i + 1];
    return std::binary_search(lo, hi, static_cast<int32_t>(j));
  }
};

// Patch centers for a grid layout, in patch-index units (unit spacing).
inline std::vector<std::array<float, 3>> grid_centers(const GridDims& g) {
  std::vector<std::array<float, 3>> centers;
  centers.reserve(static_cast<size_t>(g.count()));
  for (int64_t d = 0; d < g.d; ++d)
    for (int64_t h = 0; h < g.h; ++h)
      for (int64_t w = 0; w < g.w; ++w)
        centers.push_back({static_cast<float>(d), static_cast<float>(h),
                           static_cast<float>(w)});
  return centers;
}

// Connects i != j whenever ||x_i - x_j|| < tau (strict). Uniform-grid
// hashing with cell size tau; candidate cells are scanned two rings out so
// the float predicate d2 < tau*tau is evaluated for every pair that could
// pass it, keeping the result identical to the O(N^2) definition.
inline SpatialAdjacency build_adjacency(
    const std::vector<std::array<float, 3>>& centers, float tau) {
  check_shape(tau > 0.0f, "build_adjacency: tau must be positive");
  const int64_t n = static_cast<int64_t>(centers.size());
  SpatialAdjacency adj;
  adj.n = n;
  adj.offsets.assign(static_cast<size_t>(n + 1), 0);
  if (n == 0) return adj;
  for (const auto& c : centers)
    check_shape(std::isfinite(c[0]) && std::isfinite(c[1]) &&
                    std::isfinite(c[2]),
                "build_adjacency: non-finite center");

  std::array<float, 3> lo = centers[0];
  for (const auto& c : centers)
    for (int a = 0; a < 3; ++a) lo[a] = std::min(lo[a], c[a]);

  auto cell_of = [&](const std::array<float, 3>& c) {
    std::array<int64_t, 3> idx;
    for (int a = 0; a < 3; ++a)
      idx[a] = static_cast<int64_t>(std::floor((c[a] - lo[a]) / tau));
    return idx;
  };

  std::array<int64_t, 3> grid{1, 1, 1};
  std::vector<std::array<int64_t, 3>> cells(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    cells[static_cast<size_t>(i)] = cell_of(centers[static_cast<size_t>(i)]);
    for (int a = 0; a < 3; ++a)
      grid[a] = std::max(grid[a], cells[static_cast<size_t>(i)][a] + 1);
  }

  std::vector<std::vector<int32_t>> buckets(
      static_cast<size_t>(grid[0] * grid[1] * grid[2]));
  auto bucket_index = [&](int64_t x, int64_t y, int64_t z) {
    return (x * grid[1] + y) * grid[2] + z;
  };
  for (int64_t i = 0; i < n; ++i) {
    const auto& c = cells[static_cast<size_t>(i)];
    buckets[static_cast<size_t>(bucket_index(c[0], c[1], c[2]))].push_back(
        static_cast<int32_t>(i));
  }

  const float tau2 = tau * tau;
  std::vector<int32_t> row;
  for (int64_t i = 0; i < n; ++i) {
    row.clear();
    const auto& ci = centers[static_cast<size_t>(i)];
    const auto& cell = cells[static_cast<size_t>(i)];
    for (int64_t dx = -2; dx <= 2; ++dx) {
      const int64_t x = cell[0] + dx;
      if (x < 0 || x >= grid[0]) continue;
      for (int64_t dy = -2; dy <= 2; ++dy) {
        const int64_t y = cell[1] + dy;
        if (y < 0 || y >= grid[1]) continue;
        for (int64_t dz = -2; dz <= 2; ++dz) {
          const int64_t z = cell[2] + dz;
          if (z < 0 || z >= grid[2]) continue;
          for (int32_t j : buckets[static_cast<size_t>(bucket_index(x, y, z))]) {
            if (j == i) continue;
            const auto& cj = centers[static_cast<size_t>(j)];
            const float ddx = ci[0] - cj[0];
            const float ddy = ci[1] - cj[1];
            const float ddz = ci[2] - cj[2];
            if (ddx * ddx + ddy * ddy + ddz * ddz < tau2) row.push_back(j);
          }
        }
      }
    }
    std::sort(row.begin(), row.end());
    adj.offsets[static_cast<size_t>(i + 1)] =
        adj.offsets[static_cast<size_t>(i)] + static_cast<int64_t>(row.size());
    adj.neighbors.insert(adj.neighbors.end(), row.begin(), row.end());
  }
  return adj;
}

// Cosine similarity of node features, stored only on adjacency edges; rows
// with zero norm get similarity 0 off the diagonal.
template <class S>
struct EdgeSimilarity {
  std::vector<S> values;  // parallel to SpatialAdjacency::neighbors
};

template <class S>
EdgeSimilarity<S> similarity(const Tensor<S>& features,
                             const SpatialAdjacency& adj) {
  check_shape(features.ndim() == 2 && features.dim(0) == adj.n,
              "similarity: features " + shape_str(features.shape()) +
                  " do not match " + std::to_string(adj.n) + " nodes");
  const int64_t d = features.dim(1);
  std::vector<S> norms(static_cast<size_t>(adj.n));
  for (int64_t i = 0; i < adj.n; ++i) {
    const S* row = features.ptr() + i * d;
    S acc = S(0);
    for (int64_t j = 0; j < d; ++j) acc += row[j] * row[j];
    norms[static_cast<size_t>(i)] = std::sqrt(acc);
  }
  EdgeSimilarity<S> sim;
  sim.values.resize(adj.neighbors.size());
  for (int64_t i = 0; i < adj.n; ++i) {
    const S* ri = features.ptr() + i * d;
    for (int64_t e = adj.offsets[static_cast<size_t>(i)];
         e < adj.offsets[static_cast<size_t>(i + 1)]; ++e) {
      const int64_t j = adj.neighbors[static_cast<size_t>(e)];
      const S nn = norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)];
      if (nn == S(0)) {
        sim.values[static_cast<size_t>(e)] = S(0);
        continue;
      }
      const S* rj = features.ptr() + j * d;
      S dot = S(0);
      for (int64_t t = 0; t < d; ++t) dot += ri[t] * rj[t];
      // rounding can push |cos| past 1 for near-parallel vectors
      sim.values[static_cast<size_t>(e)] =
          std::clamp(dot / nn, S(-1), S(1));
    }
  }
  return sim;
}

// Similarity-weighted adjacency: elementwise product of the binary spatial
// matrix and the similarity matrix. Shares the spatial sparsity pattern;
// the diagonal is exactly 1.
template <class S>
struct PatchGraph {
  SpatialAdjacency adj;
  std::vector<S> edge_values;

  int64_t n() const { return adj.n; }

  Tensor<S> dense_spatial() const {
    Tensor<S> m = Tensor<S>::zeros({adj.n, adj.n});
    for (int64_t i = 0; i < adj.n; ++i) {
      m[i * adj.n + i] = S(1);
      for (int64_t e = adj.offsets[static_cast<size_t>(i)];
           e < adj.offsets[static_cast<size_t>(i + 1)]; ++e)
        m[i * adj.n + adj.neighbors[static_cast<size_t>(e)]] = S(1);
    }
    return m;
  }

  Tensor<S> dense_edge() const {
    Tensor<S> m = Tensor<S>::zeros({adj.n, adj.n});
    for (int64_t i = 0; i < adj.n; ++i) {
      m[i * adj.n + i] = S(1);
      for (int64_t e = adj.offsets[static_cast<size_t>(i)];
           e < adj.offsets[static_cast<size_t>(i + 1)]; ++e)
        m[i * adj.n + adj.neighbors[static_cast<size_t>(e)]] =
            edge_values[static_cast<size_t>(e)];
    }
    return m;
  }
};

template <class S>
PatchGraph<S> edge_weights(const SpatialAdjacency& adj,
                           const EdgeSimilarity<S>& sim) {
  check_shape(sim.values.size() == adj.neighbors.size(),
              "edge_weights: similarity does not cover the edge set");
  PatchGraph<S> g;
  g.adj = adj;
  g.edge_values = sim.values;  // spatial entries are 1 on the pattern
  return g;
}

template <class S>
PatchGraph<S> build_patch_graph(const Tensor<S>& features,
                                const std::vector<std::array<float, 3>>& centers,
                                float tau) {
  SpatialAdjacency adj = build_adjacency(centers, tau);
  return edge_weights(adj, similarity(features, adj));
}

}  // namespace gpa
