#pragma once

#include <iostream>

#include "gpa/attention.hpp"
#include "gpa/graph.hpp"
#include "gpa/ops.hpp"

namespace gpa {

// One-step contextual update: X~ = G_edge * X + X, with the graph's unit
// diagonal contributing the node's own feature once more. Edge weights are
// data-derived constants; gradients flow through X only (both through the
// neighborhood sum, since the node matrix is X itself, and the residual).
template <class S>
Tensor<S> message_pass(const PatchGraph<S>& graph, const Tensor<S>& x) {
  check_shape(x.ndim() == 2 && x.dim(0) == graph.n(),
              "message_pass: features " + shape_str(x.shape()) +
                  " do not match " + std::to_string(graph.n()) + " nodes");
  const int64_t n = graph.n(), d = x.dim(1);
  Tensor<S> out = Tensor<S>::zeros({n, d});
  const auto& adj = graph.adj;
  for (int64_t i = 0; i < n; ++i) {
    const S* xi = x.ptr() + i * d;
    S* oi = out.ptr() + i * d;
    for (int64_t t = 0; t < d; ++t) oi[t] = S(2) * xi[t];
    for (int64_t e = adj.offsets[static_cast<size_t>(i)];
         e < adj.offsets[static_cast<size_t>(i + 1)]; ++e) {
      const S w = graph.edge_values[static_cast<size_t>(e)];
      const S* xj = x.ptr() + adj.neighbors[static_cast<size_t>(e)] * d;
      for (int64_t t = 0; t < d; ++t) oi[t] += w * xj[t];
    }
  }
  if (detail::grad_wanted<S>({&x})) {
    detail::mark_recorded(out, [x = x, out, graph, n, d]() mutable {
      if (!x.requires_grad()) return;
      // (G_edge + I) is symmetric, so the backward map reuses the weights
      auto& gx = x.grad();
      const auto& go = out.grad();
      const auto& adj = graph.adj;
      for (int64_t i = 0; i < n; ++i) {
        const S* gi = go.data() + i * d;
        S* xi = gx.data() + i * d;
        for (int64_t t = 0; t < d; ++t) xi[t] += S(2) * gi[t];
        for (int64_t e = adj.offsets[static_cast<size_t>(i)];
             e < adj.offsets[static_cast<size_t>(i + 1)]; ++e) {
          const S w = graph.edge_values[static_cast<size_t>(e)];
          S* xj = gx.data() + adj.neighbors[static_cast<size_t>(e)] * d;
          for (int64_t t = 0; t < d; ++t) xj[t] += w * gi[t];
        }
      }
    });
  }
  return out;
}

// Message passing with edge weights recomputed from the current features:
// w_ij = cos(x_i, x_j) on the fixed adjacency pattern, and gradients flow
// through the cosine as well, so the whole update is differentiable in x.
// The clamp on w only trims sub-ulp float overshoot of |cos| <= 1; the
// backward uses the raw cosine derivative (identical in exact arithmetic).
template <class S>
Tensor<S> message_pass_dynamic(const SpatialAdjacency& adj,
                               const Tensor<S>& x) {
  check_shape(x.ndim() == 2 && x.dim(0) == adj.n,
              "message_pass: features " + shape_str(x.shape()) +
                  " do not match " + std::to_string(adj.n) + " nodes");
  const int64_t n = adj.n, d = x.dim(1);
  std::vector<S> norms(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const S* xi = x.ptr() + i * d;
    S acc = S(0);
    for (int64_t t = 0; t < d; ++t) acc += xi[t] * xi[t];
    norms[static_cast<size_t>(i)] = std::sqrt(acc);
  }
  std::vector<S> weights(adj.neighbors.size());
  Tensor<S> out = Tensor<S>::zeros({n, d});
  for (int64_t i = 0; i < n; ++i) {
    const S* xi = x.ptr() + i * d;
    S* oi = out.ptr() + i * d;
    for (int64_t t = 0; t < d; ++t) oi[t] = S(2) * xi[t];
    for (int64_t e = adj.offsets[static_cast<size_t>(i)];
         e < adj.offsets[static_cast<size_t>(i + 1)]; ++e) {
      const int64_t j = adj.neighbors[static_cast<size_t>(e)];
      const S* xj = x.ptr() + j * d;
      const S nn = norms[static_cast<size_t>(i)] * norms[static_cast<size_t>(j)];
      S w = S(0);
      if (nn != S(0)) {
        S dot = S(0);
        for (int64_t t = 0; t < d; ++t) dot += xi[t] * xj[t];
        w = std::clamp(dot / nn, S(-1), S(1));
      }
      weights[static_cast<size_t>(e)] = w;
      for (int64_t t = 0; t < d; ++t) oi[t] += w * xj[t];
    }
  }
  if (detail::grad_wanted<S>({&x})) {
    detail::mark_recorded(out, [x = x, out, adj, n, d,
                                norms = std::move(norms),
                                weights = std::move(weights)]() mutable {
      if (!x.requires_grad()) return;
      auto& gx = x.grad();
      const auto& go = out.grad();
      for (int64_t i = 0; i < n; ++i) {
        const S* gi = go.data() + i * d;
        const S* xi = x.ptr() + i * d;
        S* dxi = gx.data() + i * d;
        for (int64_t t = 0; t < d; ++t) dxi[t] += S(2) * gi[t];
        const S ni = norms[static_cast<size_t>(i)];
        for (int64_t e = adj.offsets[static_cast<size_t>(i)];
             e < adj.offsets[static_cast<size_t>(i + 1)]; ++e) {
          const int64_t j = adj.neighbors[static_cast<size_t>(e)];
          const S w = weights[static_cast<size_t>(e)];
          const S* xj = x.ptr() + j * d;
          S* dxj = gx.data() + j * d;
          // value path: X~_i += w_ij x_j
          for (int64_t t = 0; t < d; ++t) dxj[t] += w * gi[t];
          // weight path: dw = <g_i, x_j>, then d cos
          const S nj = norms[static_cast<size_t>(j)];
          const S nn = ni * nj;
          if (nn == S(0)) continue;
          S alpha = S(0);
          for (int64_t t = 0; t < d; ++t) alpha += gi[t] * xj[t];
          const S inv_nn = S(1) / nn;
          const S wi = w / (ni * ni);
          const S wj = w / (nj * nj);
          for (int64_t t = 0; t < d; ++t) {
            dxi[t] += alpha * (xj[t] * inv_nn - wi * xi[t]);
            dxj[t] += alpha * (xi[t] * inv_nn - wj * xj[t]);
          }
        }
      }
    });
  }
  return out;
}

// Row-stochastic soft assignment of nodes to K representative slots.
template <class S>
Tensor<S> assign(const Tensor<S>& x, const Tensor<S>& w_assign) {
  check_shape(x.ndim() == 2 && w_assign.ndim() == 2 &&
                  w_assign.dim(0) == x.dim(1),
              "assign: features " + shape_str(x.shape()) +
                  " incompatible with " + shape_str(w_assign.shape()));
  const int64_t k = w_assign.dim(1);
  check_shape(k >= 1, "assign: K must be at least 1");
  if (k > x.dim(0))
    std::cerr << "assign: warning: K=" << k << " exceeds N=" << x.dim(0)
              << " (over-complete assignment)\n";
  return softmax(matmul(x, w_assign), 1);
}

// F = S^T X: weighted pooling of the original node features.
template <class S>
Tensor<S> aggregate(const Tensor<S>& s, const Tensor<S>& x) {
  check_shape(s.ndim() == 2 && x.ndim() == 2 && s.dim(0) == x.dim(0),
              "aggregate: assignment " + shape_str(s.shape()) +
                  " incompatible with features " + shape_str(x.shape()));
  return matmul(transpose2d(s), x);
}

// Splits the feature axis into equal head slices and runs attention per
// head. heads == 1 degenerates to one scaled_attention call.
template <class S>
Tensor<S> multihead_attention(const Tensor<S>& q, const Tensor<S>& k,
                              const Tensor<S>& v, int heads) {
  check_shape(heads >= 1, "attention: head count must be positive");
  const int64_t d = q.dim(1);
  check_shape(d % heads == 0, "attention: feature dim " + std::to_string(d) +
                                  " not divisible by " + std::to_string(heads) +
                                  " heads");
  if (heads == 1) return scaled_attention(q, k, v);
  const int64_t hd = d / heads;
  std::vector<Tensor<S>> outs;
  outs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const int64_t c0 = h * hd, c1 = c0 + hd;
    outs.push_back(scaled_attention(col_slice(q, c0, c1),
                                    col_slice(k, c0, c1),
                                    col_slice(v, c0, c1)));
  }
  return concat_cols(outs);
}

template <class S>
struct MpgaBlockParams {
  Tensor<S> w_assign;             // [d, K]
  Tensor<S> wq, bq, wk, wv, bv;   // projections (keys take no bias: a
                                  // constant key shift cannot change softmax
                                  // attention, so the parameter would never
                                  // receive gradient)
  Tensor<S> wo, bo;               // output projection
};

// Graph-guided reduced attention: the key/value sequence is pooled to the K
// representative nodes while queries keep full length, so the score matrix
// is N x K instead of N x N.
template <class S>
Tensor<S> mpga_attention(const Tensor<S>& x, const GridDims& grid, S tau,
                         const MpgaBlockParams<S>& p, int heads = 1,
                         Tensor<S>* assign_probe = nullptr) {
  check_shape(x.ndim() == 2 && x.dim(0) == grid.count(),
              "mpga_attention: " + shape_str(x.shape()) +
                  " does not cover grid " + grid_str(grid));
  SpatialAdjacency adj =
      build_adjacency(grid_centers(grid), static_cast<float>(tau));
  Tensor<S> enhanced = message_pass_dynamic(adj, x);
  Tensor<S> s = assign(enhanced, p.w_assign);
  if (assign_probe) *assign_probe = s.clone_values();
  Tensor<S> pooled = aggregate(s, x);
  Tensor<S> q = linear(x, p.wq, p.bq);
  Tensor<S> k = matmul(pooled, p.wk);
  Tensor<S> v = linear(pooled, p.wv, p.bv);
  Tensor<S> attn = multihead_attention(q, k, v, heads);
  return linear(attn, p.wo, p.bo);
}

}  // namespace gpa
