#pragma once

#include "gpa/conv.hpp"
#include "gpa/mpga.hpp"
#include "gpa/ops.hpp"
#include "gpa/optim.hpp"

namespace gpa {

// Multi-receptive-field stem: three parallel conv paths (kernels 3/5/7),
// each reducing resolution twice by stride 2, fused by elementwise sum and
// refined with residual self-attention.
struct MasaConfig {
  int64_t in_channels = 1;
  int64_t embed_dim = 32;  // shared output width of all three paths
  static constexpr std::array<int64_t, 3> kernel_sizes{3, 5, 7};
};

template <class S>
struct MasaPathParams {
  Tensor<S> conv1_w, conv1_b;
  Tensor<S> norm_gamma, norm_beta;
  Tensor<S> conv2_w, conv2_b;
};

template <class S>
struct MasaParams {
  MasaPathParams<S> fine, medium, coarse;
  Tensor<S> wq, bq, wk, wv, bv;  // residual self-attention (keys unbiased)
};

template <class S>
MasaPathParams<S> make_masa_path(ParamStore<S>& store, const std::string& name,
                                 int64_t in_ch, int64_t embed, int64_t k,
                                 std::mt19937_64& rng) {
  MasaPathParams<S> p;
  p.conv1_w = store.create(name + ".conv1.w", {embed, in_ch, k, k, k},
                           Init::he(in_ch * k * k * k), rng);
  p.conv1_b = store.create(name + ".conv1.b", {embed}, Init::zeros(), rng);
  p.norm_gamma = store.create(name + ".norm.gamma", {embed}, Init::ones(), rng);
  p.norm_beta = store.create(name + ".norm.beta", {embed}, Init::zeros(), rng);
  p.conv2_w = store.create(name + ".conv2.w", {embed, embed, k, k, k},
                           Init::he(embed * k * k * k), rng);
  p.conv2_b = store.create(name + ".conv2.b", {embed}, Init::zeros(), rng);
  return p;
}

template <class S>
MasaParams<S> make_masa_params(ParamStore<S>& store, const MasaConfig& cfg,
                               std::mt19937_64& rng,
                               const std::string& prefix = "masa") {
  MasaParams<S> p;
  p.fine = make_masa_path(store, prefix + ".fine", cfg.in_channels,
                          cfg.embed_dim, 3, rng);
  p.medium = make_masa_path(store, prefix + ".medium", cfg.in_channels,
                            cfg.embed_dim, 5, rng);
  p.coarse = make_masa_path(store, prefix + ".coarse", cfg.in_channels,
                            cfg.embed_dim, 7, rng);
  const int64_t d = cfg.embed_dim;
  auto proj = [&](const std::string& n) {
    return store.create(prefix + ".attn." + n, {d, d}, Init::normal(0.02), rng);
  };
  auto bias = [&](const std::string& n) {
    return store.create(prefix + ".attn." + n, {d}, Init::zeros(), rng);
  };
  p.wq = proj("wq");
  p.bq = bias("bq");
  p.wk = proj("wk");
  p.wv = proj("wv");
  p.bv = bias("bv");
  return p;
}

// Normalizes a [C,D,H,W] map across channels at each voxel.
template <class S>
Tensor<S> channel_norm(const Tensor<S>& vol, const Tensor<S>& gamma,
                       const Tensor<S>& beta) {
  const GridDims grid{vol.dim(1), vol.dim(2), vol.dim(3)};
  Tensor<S> tokens = volume_to_tokens(vol);
  return tokens_to_volume(layer_norm(tokens, gamma, beta), grid);
}

// One receptive-field path: conv(stride 2) -> norm -> gelu -> conv(stride 2),
// flattened to a token sequence of length DHW/64.
template <class S>
Tensor<S> path_extract(const Tensor<S>& volume, const MasaPathParams<S>& p) {
  check_shape(volume.ndim() == 4, "path_extract: expects [C,D,H,W], got " +
                                      shape_str(volume.shape()));
  const int64_t D = volume.dim(1), H = volume.dim(2), W = volume.dim(3);
  check_shape(D % 4 == 0 && H % 4 == 0 && W % 4 == 0,
              "path_extract: extents " + shape_str(volume.shape()) +
                  " must be divisible by 4 (no implicit padding)");
  Tensor<S> h = conv3d(volume, p.conv1_w, p.conv1_b, 2);
  h = channel_norm(h, p.norm_gamma, p.norm_beta);
  h = gelu(h);
  h = conv3d(h, p.conv2_w, p.conv2_b, 2);
  return volume_to_tokens(h);
}

// Elementwise sum of the three path outputs (Eq-style planar aggregation).
template <class S>
Tensor<S> fuse(const Tensor<S>& fine, const Tensor<S>& medium,
               const Tensor<S>& coarse) {
  return add(add(fine, medium), coarse);
}

template <class S>
Tensor<S> masa_forward(const Tensor<S>& volume, const MasaParams<S>& p,
                       int heads = 1) {
  Tensor<S> fused = fuse(path_extract(volume, p.fine),
                         path_extract(volume, p.medium),
                         path_extract(volume, p.coarse));
  Tensor<S> attn = multihead_attention(linear(fused, p.wq, p.bq),
                                       matmul(fused, p.wk),
                                       linear(fused, p.wv, p.bv), heads);
  return add(fused, attn);
}

}  // namespace gpa
