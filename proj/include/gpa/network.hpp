#pragma once

#include <optional>

#include "gpa/masa.hpp"
#include "gpa/mpga.hpp"

namespace gpa {

// Full architecture hyperparameters. input_dims is the reference volume
// geometry the model is built for: it fixes the per-stage token counts and
// with them the assignment matrix shapes (K = k_ratio * tokens). Forward
// accepts any extents divisible by 16; only K stays pinned.
struct ModelConfig {
  int64_t in_channels = 1;
  int64_t num_classes = 2;
  GridDims input_dims{96, 96, 96};
  std::array<int64_t, 3> stage_dims{32, 64, 128};
  double k_ratio = 1.0 / 8.0;
  double tau = 1.8;
  bool enable_masa = true;
  bool enable_mpga = true;
  int heads = 1;
  double mlp_ratio = 2.0;
  int64_t decoder_dim = 64;
  bool pos_embed = false;

  static constexpr std::array<int, 3> blocks_per_stage{2, 2, 2};
  static constexpr int64_t patch_size = 4;

  void validate() const {
    check_shape(in_channels >= 1, "config: in_channels must be positive");
    check_shape(num_classes >= 2, "config: need at least two classes");
    check_shape(stage_dims[0] < stage_dims[1] && stage_dims[1] < stage_dims[2],
                "config: stage_dims must be strictly increasing");
    check_shape(k_ratio > 0.0, "config: k_ratio must be positive");
    check_shape(tau > 0.0, "config: tau must be positive");
    check_shape(heads >= 1, "config: heads must be positive");
    for (int64_t d : stage_dims)
      check_shape(d % heads == 0, "config: stage width " + std::to_string(d) +
                                      " not divisible by heads");
    check_shape(mlp_ratio > 0.0, "config: mlp_ratio must be positive");
    check_shape(decoder_dim >= 1, "config: decoder_dim must be positive");
    check_shape(input_dims.d % 16 == 0 && input_dims.h % 16 == 0 &&
                    input_dims.w % 16 == 0,
                "config: input_dims " + grid_str(input_dims) +
                    " must be divisible by 16");
  }

  // Patch grid of stage s (0-based) for a given volume extent.
  static GridDims stage_grid(int stage, const GridDims& vol) {
    const int64_t div = patch_size << stage;
    return {vol.d / div, vol.h / div, vol.w / div};
  }

  int64_t stage_tokens_ref(int stage) const {
    return stage_grid(stage, input_dims).count();
  }

  int64_t stage_k(int stage) const {
    return std::max<int64_t>(
        1, std::llround(k_ratio * static_cast<double>(stage_tokens_ref(stage))));
  }

  int64_t mlp_hidden(int stage) const {
    return std::max<int64_t>(
        1, std::llround(mlp_ratio * static_cast<double>(stage_dims[stage])));
  }
};

template <class S>
struct BlockParams {
  Tensor<S> ln1_g, ln1_b;
  MpgaBlockParams<S> attn;  // w_assign left empty when MPGA is disabled
  Tensor<S> ln2_g, ln2_b;
  Tensor<S> mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

template <class S>
struct DecoderParams {
  std::array<Tensor<S>, 3> proj_w, proj_b;
  Tensor<S> fuse1_w, fuse1_b, fuse2_w, fuse2_b;
  Tensor<S> head_w, head_b;
};

// Captures the soft assignment of one chosen block during forward.
template <class S>
struct AssignmentProbe {
  int stage = 0;  // 0-based
  int block = 0;
  bool filled = false;
  Tensor<S> assignment;
  GridDims grid;
};

template <class S>
struct Model {
  ModelConfig cfg;
  ParamStore<S> store;

  std::optional<MasaParams<S>> masa;
  Tensor<S> patch_w, patch_b;  // baseline stem
  Tensor<S> pos;
  std::array<std::vector<BlockParams<S>>, 3> stages;
  std::array<Tensor<S>, 2> down_w, down_b;
  DecoderParams<S> dec;

  explicit Model(const ModelConfig& config, uint64_t seed = 0) : cfg(config) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    const int64_t d0 = cfg.stage_dims[0];
    if (cfg.enable_masa) {
      MasaConfig mc;
      mc.in_channels = cfg.in_channels;
      mc.embed_dim = d0;
      masa = make_masa_params<S>(store, mc, rng, "masa");
    } else {
      const int64_t pf = cfg.in_channels * cfg.patch_size * cfg.patch_size *
                         cfg.patch_size;
      patch_w = store.create("patch.w", {pf, d0}, Init::he(pf), rng);
      patch_b = store.create("patch.b", {d0}, Init::zeros(), rng);
    }
    if (cfg.pos_embed)
      pos = store.create("pos", {cfg.stage_tokens_ref(0), d0},
                         Init::normal(0.02), rng);

    for (int s = 0; s < 3; ++s) {
      const int64_t d = cfg.stage_dims[static_cast<size_t>(s)];
      const int64_t k = cfg.stage_k(s);
      const int64_t hidden = cfg.mlp_hidden(s);
      for (int b = 0; b < cfg.blocks_per_stage[static_cast<size_t>(s)]; ++b) {
        const std::string base =
            "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
        BlockParams<S> blk;
        blk.ln1_g = store.create(base + ".ln1.gamma", {d}, Init::ones(), rng);
        blk.ln1_b = store.create(base + ".ln1.beta", {d}, Init::zeros(), rng);
        if (cfg.enable_mpga)
          blk.attn.w_assign = store.create(base + ".attn.assign", {d, k},
                                           Init::normal(0.02), rng);
        blk.attn.wq = store.create(base + ".attn.wq", {d, d},
                                   Init::normal(0.02), rng);
        blk.attn.bq = store.create(base + ".attn.bq", {d}, Init::zeros(), rng);
        blk.attn.wk = store.create(base + ".attn.wk", {d, d},
                                   Init::normal(0.02), rng);
        blk.attn.wv = store.create(base + ".attn.wv", {d, d},
                                   Init::normal(0.02), rng);
        blk.attn.bv = store.create(base + ".attn.bv", {d}, Init::zeros(), rng);
        blk.attn.wo = store.create(base + ".attn.wo", {d, d},
                                   Init::normal(0.02), rng);
        blk.attn.bo = store.create(base + ".attn.bo", {d}, Init::zeros(), rng);
        blk.ln2_g = store.create(base + ".ln2.gamma", {d}, Init::ones(), rng);
        blk.ln2_b = store.create(base + ".ln2.beta", {d}, Init::zeros(), rng);
        blk.mlp_w1 = store.create(base + ".mlp.w1", {d, hidden}, Init::he(d),
                                  rng);
        blk.mlp_b1 = store.create(base + ".mlp.b1", {hidden}, Init::zeros(),
                                  rng);
        blk.mlp_w2 = store.create(base + ".mlp.w2", {hidden, d},
                                  Init::he(hidden), rng);
        blk.mlp_b2 = store.create(base + ".mlp.b2", {d}, Init::zeros(), rng);
        stages[static_cast<size_t>(s)].push_back(std::move(blk));
      }
      if (s < 2) {
        const int64_t dn = cfg.stage_dims[static_cast<size_t>(s + 1)];
        down_w[static_cast<size_t>(s)] =
            store.create("down" + std::to_string(s + 1) + ".w",
                         {dn, d, 3, 3, 3}, Init::he(d * 27), rng);
        down_b[static_cast<size_t>(s)] = store.create(
            "down" + std::to_string(s + 1) + ".b", {dn}, Init::zeros(), rng);
      }
    }

    const int64_t dd = cfg.decoder_dim;
    for (int s = 0; s < 3; ++s) {
      const int64_t d = cfg.stage_dims[static_cast<size_t>(s)];
      dec.proj_w[static_cast<size_t>(s)] =
          store.create("decoder.proj" + std::to_string(s + 1) + ".w", {d, dd},
                       Init::he(d), rng);
      dec.proj_b[static_cast<size_t>(s)] =
          store.create("decoder.proj" + std::to_string(s + 1) + ".b", {dd},
                       Init::zeros(), rng);
    }
    dec.fuse1_w = store.create("decoder.fuse1.w", {3 * dd, dd},
                               Init::he(3 * dd), rng);
    dec.fuse1_b = store.create("decoder.fuse1.b", {dd}, Init::zeros(), rng);
    dec.fuse2_w = store.create("decoder.fuse2.w", {dd, dd}, Init::he(dd), rng);
    dec.fuse2_b = store.create("decoder.fuse2.b", {dd}, Init::zeros(), rng);
    dec.head_w = store.create("decoder.head.w", {dd, cfg.num_classes},
                              Init::normal(0.01), rng);
    dec.head_b = store.create("decoder.head.b", {cfg.num_classes},
                              Init::zeros(), rng);
  }

  // Stage-1 tokens from the input volume.
  Tensor<S> embed(const Tensor<S>& volume) const {
    check_shape(volume.ndim() == 4 && volume.dim(0) == cfg.in_channels,
                "embed: expected " + std::to_string(cfg.in_channels) +
                    "-channel volume, got " + shape_str(volume.shape()));
    const GridDims vol{volume.dim(1), volume.dim(2), volume.dim(3)};
    check_shape(vol.d % 16 == 0 && vol.h % 16 == 0 && vol.w % 16 == 0,
                "embed: extents " + grid_str(vol) + " must be divisible by 16");
    Tensor<S> tokens;
    if (cfg.enable_masa) {
      tokens = masa_forward(volume, *masa, cfg.heads);
    } else {
      tokens = linear(patchify(volume, cfg.patch_size), patch_w, patch_b);
    }
    if (cfg.pos_embed) {
      check_shape(tokens.dim(0) == pos.dim(0),
                  "embed: positional table built for " +
                      std::to_string(pos.dim(0)) + " tokens, got " +
                      std::to_string(tokens.dim(0)));
      tokens = add(tokens, pos);
    }
    return tokens;
  }

  Tensor<S> attention_block(const Tensor<S>& x, const GridDims& grid,
                            const BlockParams<S>& blk,
                            Tensor<S>* probe = nullptr) const {
    if (cfg.enable_mpga)
      return mpga_attention(x, grid, static_cast<S>(cfg.tau), blk.attn,
                            cfg.heads, probe);
    Tensor<S> attn = multihead_attention(linear(x, blk.attn.wq, blk.attn.bq),
                                         matmul(x, blk.attn.wk),
                                         linear(x, blk.attn.wv, blk.attn.bv),
                                         cfg.heads);
    return linear(attn, blk.attn.wo, blk.attn.bo);
  }

  Tensor<S> stage_forward(Tensor<S> x, const GridDims& grid, int stage,
                          AssignmentProbe<S>* probe = nullptr) const {
    check_shape(x.dim(0) == grid.count(),
                "stage_forward: token count " + std::to_string(x.dim(0)) +
                    " does not match grid " + grid_str(grid));
    const auto& blocks = stages[static_cast<size_t>(stage)];
    for (size_t b = 0; b < blocks.size(); ++b) {
      const auto& blk = blocks[b];
      Tensor<S>* sp = nullptr;
      Tensor<S> captured;
      const bool want = probe && probe->stage == stage &&
                        probe->block == static_cast<int>(b) && cfg.enable_mpga;
      if (want) sp = &captured;
      Tensor<S> attn =
          attention_block(layer_norm(x, blk.ln1_g, blk.ln1_b), grid, blk, sp);
      if (want) {
        probe->assignment = captured;
        probe->grid = grid;
        probe->filled = true;
      }
      x = add(x, attn);
      Tensor<S> h = linear(layer_norm(x, blk.ln2_g, blk.ln2_b), blk.mlp_w1,
                           blk.mlp_b1);
      h = linear(gelu(h), blk.mlp_w2, blk.mlp_b2);
      x = add(x, h);
    }
    return x;
  }

  // Halves the grid, moves channels to the next stage width.
  Tensor<S> downsample(const Tensor<S>& tokens, const GridDims& grid,
                       int transition) const {
    check_shape(grid.d % 2 == 0 && grid.h % 2 == 0 && grid.w % 2 == 0,
                "downsample: grid " + grid_str(grid) + " must be even");
    Tensor<S> vol = tokens_to_volume(tokens, grid);
    Tensor<S> out = conv3d(vol, down_w[static_cast<size_t>(transition)],
                           down_b[static_cast<size_t>(transition)], 2);
    return volume_to_tokens(out);
  }

  Tensor<S> decode(const std::array<Tensor<S>, 3>& toks,
                   const std::array<GridDims, 3>& grids) const {
    std::vector<Tensor<S>> lifted;
    for (int s = 0; s < 3; ++s) {
      Tensor<S> p = linear(toks[static_cast<size_t>(s)],
                           dec.proj_w[static_cast<size_t>(s)],
                           dec.proj_b[static_cast<size_t>(s)]);
      if (s == 0) {
        lifted.push_back(p);
        continue;
      }
      Tensor<S> vol = tokens_to_volume(p, grids[static_cast<size_t>(s)]);
      lifted.push_back(volume_to_tokens(trilinear_upsample(vol, 1 << s)));
    }
    Tensor<S> h = linear(concat_cols(lifted), dec.fuse1_w, dec.fuse1_b);
    h = linear(gelu(h), dec.fuse2_w, dec.fuse2_b);
    Tensor<S> logits = linear(gelu(h), dec.head_w, dec.head_b);
    return trilinear_upsample(tokens_to_volume(logits, grids[0]),
                              cfg.patch_size);
  }

  Tensor<S> forward(const Tensor<S>& volume,
                    AssignmentProbe<S>* probe = nullptr) const {
    const GridDims vol{volume.dim(1), volume.dim(2), volume.dim(3)};
    std::array<Tensor<S>, 3> toks;
    std::array<GridDims, 3> grids;
    grids[0] = ModelConfig::stage_grid(0, vol);
    toks[0] = stage_forward(embed(volume), grids[0], 0, probe);
    for (int s = 1; s < 3; ++s) {
      grids[static_cast<size_t>(s)] = ModelConfig::stage_grid(s, vol);
      toks[static_cast<size_t>(s)] = stage_forward(
          downsample(toks[static_cast<size_t>(s - 1)],
                     grids[static_cast<size_t>(s - 1)], s - 1),
          grids[static_cast<size_t>(s)], s, probe);
    }
    return decode(toks, grids);
  }
};

// Exact number of learnable scalars for a configuration.
inline int64_t count_params(const ModelConfig& cfg) {
  Model<float> m(cfg, 0);
  return m.store.total_scalars();
}

}  // namespace gpa
