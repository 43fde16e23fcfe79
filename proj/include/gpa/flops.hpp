#pragma once

#include "gpa/network.hpp"

namespace gpa {

// Analytic operation counts under fixed conventions:
//   matmul (m x k)(k x n)      -> 2mkn
//   conv                       -> 2 * C_out * C_in * k^3 * output voxels
//   attention (n_q, n_k, d)    -> 2*n_q*n_k*d twice, plus softmax 5*n_q*n_k
// Graph machinery (cosines, message passing, assignment softmax) is tallied
// separately; normalizations, activations, and interpolation are not counted.
struct FlopEstimate {
  int64_t conv = 0;
  int64_t matmul = 0;
  int64_t attention = 0;
  int64_t graph = 0;
  int64_t total() const { return conv + matmul + attention + graph; }
};

namespace detail {

inline int64_t attention_flops(int64_t nq, int64_t nk, int64_t d) {
  return 2 * nq * nk * d * 2 + 5 * nq * nk;
}

// Directed edge count of a unit-spaced grid graph with threshold tau.
inline int64_t grid_edge_count(const GridDims& g, double tau) {
  const int64_t reach = static_cast<int64_t>(std::ceil(tau));
  int64_t edges = 0;
  for (int64_t dx = -reach; dx <= reach; ++dx)
    for (int64_t dy = -reach; dy <= reach; ++dy)
      for (int64_t dz = -reach; dz <= reach; ++dz) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        if (static_cast<double>(dx * dx + dy * dy + dz * dz) >= tau * tau)
          continue;
        const int64_t cx = std::max<int64_t>(0, g.d - std::abs(dx));
        const int64_t cy = std::max<int64_t>(0, g.h - std::abs(dy));
        const int64_t cz = std::max<int64_t>(0, g.w - std::abs(dz));
        edges += cx * cy * cz;
      }
  return edges;
}

}  // namespace detail

inline FlopEstimate estimate_flops(const ModelConfig& cfg,
                                   const GridDims& input) {
  cfg.validate();
  check_shape(input.d % 16 == 0 && input.h % 16 == 0 && input.w % 16 == 0,
              "estimate_flops: extents " + grid_str(input) +
                  " must be divisible by 16");
  FlopEstimate f;
  const int64_t d0 = cfg.stage_dims[0];
  const GridDims g0 = ModelConfig::stage_grid(0, input);
  const int64_t n0 = g0.count();

  if (cfg.enable_masa) {
    const int64_t half_voxels = input.count() / 8;
    for (int64_t k : MasaConfig::kernel_sizes) {
      f.conv += 2 * d0 * cfg.in_channels * k * k * k * half_voxels;
      f.conv += 2 * d0 * d0 * k * k * k * n0;
    }
    f.matmul += 3 * 2 * n0 * d0 * d0;  // q, k, v projections
    f.attention += detail::attention_flops(n0, n0, d0);
  } else {
    const int64_t pf = cfg.in_channels * cfg.patch_size * cfg.patch_size *
                       cfg.patch_size;
    f.matmul += 2 * n0 * pf * d0;
  }

  for (int s = 0; s < 3; ++s) {
    const GridDims g = ModelConfig::stage_grid(s, input);
    const int64_t n = g.count();
    const int64_t d = cfg.stage_dims[static_cast<size_t>(s)];
    const int64_t hidden = cfg.mlp_hidden(s);
    const int64_t blocks = cfg.blocks_per_stage[static_cast<size_t>(s)];
    for (int64_t b = 0; b < blocks; ++b) {
      if (cfg.enable_mpga) {
        const int64_t k = cfg.stage_k(s);
        const int64_t edges = detail::grid_edge_count(g, cfg.tau);
        f.graph += 4 * edges * d + 4 * n * d;  // cosines + one update step
        f.matmul += 2 * n * d * k;             // assignment logits
        f.graph += 5 * n * k;                  // assignment softmax
        f.matmul += 2 * k * n * d;             // pooling S^T X
        f.matmul += 2 * 2 * n * d * d;         // q and output projections
        f.matmul += 2 * 2 * k * d * d;         // reduced k/v projections
        f.attention += detail::attention_flops(n, k, d);
      } else {
        f.matmul += 4 * 2 * n * d * d;
        f.attention += detail::attention_flops(n, n, d);
      }
      f.matmul += 2 * 2 * n * d * hidden;  // mlp
    }
    if (s < 2) {
      const GridDims gn = ModelConfig::stage_grid(s + 1, input);
      f.conv += 2 * cfg.stage_dims[static_cast<size_t>(s + 1)] * d * 27 *
                gn.count();
    }
  }

  const int64_t dd = cfg.decoder_dim;
  for (int s = 0; s < 3; ++s)
    f.matmul += 2 * ModelConfig::stage_grid(s, input).count() *
                cfg.stage_dims[static_cast<size_t>(s)] * dd;
  f.matmul += 2 * n0 * (3 * dd) * dd;
  f.matmul += 2 * n0 * dd * dd;
  f.matmul += 2 * n0 * dd * cfg.num_classes;
  return f;
}

}  // namespace gpa
