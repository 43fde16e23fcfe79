#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gpa/gradcheck.hpp"
#include "gpa/masa.hpp"
#include "oracles.hpp"

using gpa::MasaConfig;
using gpa::Tensor;
using Td = Tensor<double>;
using Tf = Tensor<float>;

namespace {

template <class S>
gpa::MasaParams<S> random_params(const MasaConfig& cfg, uint64_t seed) {
  gpa::ParamStore<S> store;
  std::mt19937_64 rng(seed);
  return gpa::make_masa_params<S>(store, cfg, rng);
}

}  // namespace

TEST_CASE("path_extract produces DHW/64 tokens for every kernel") {
  MasaConfig cfg;
  cfg.embed_dim = 4;
  auto g = oracle::rng(50);
  auto p = random_params<float>(cfg, 1);
  Tf vol = Tf::from({1, 32, 32, 32},
                    oracle::random_values<float>(32 * 32 * 32, g));
  for (const auto* path : {&p.fine, &p.medium, &p.coarse}) {
    Tf tokens = gpa::path_extract(vol, *path);
    CHECK(tokens.shape() == gpa::Shape{512, 4});
  }
}

TEST_CASE("path_extract: 96^3 input flattens to 13824 tokens") {
  MasaConfig cfg;
  cfg.embed_dim = 2;
  auto g = oracle::rng(51);
  auto p = random_params<float>(cfg, 2);
  Tf vol = Tf::from({1, 96, 96, 96},
                    oracle::random_values<float>(96 * 96 * 96, g));
  Tf tokens = gpa::path_extract(vol, p.coarse);
  CHECK(tokens.shape() == gpa::Shape{13824, 2});
}

TEST_CASE("path_extract rejects extents not divisible by four") {
  MasaConfig cfg;
  cfg.embed_dim = 2;
  auto p = random_params<float>(cfg, 3);
  CHECK_THROWS_AS(gpa::path_extract(Tf::zeros({1, 30, 32, 32}), p.fine),
                  gpa::ShapeError);
  CHECK_THROWS_AS(gpa::path_extract(Tf::zeros({1, 32, 32, 2}), p.fine),
                  gpa::ShapeError);
}

TEST_CASE("zero-weight path emits only the last conv bias") {
  MasaConfig cfg;
  cfg.embed_dim = 3;
  auto g = oracle::rng(52);
  auto p = random_params<double>(cfg, 4);
  for (auto* t : {&p.fine.conv1_w, &p.fine.conv1_b, &p.fine.conv2_w})
    std::fill(t->data().begin(), t->data().end(), 0.0);
  p.fine.conv2_b = Td::from({3}, {0.25, -1.0, 2.0});
  Td vol = Td::from({1, 8, 8, 8}, oracle::random_values<double>(512, g));
  Td tokens = gpa::path_extract(vol, p.fine);
  REQUIRE(tokens.shape() == gpa::Shape{8, 3});
  for (int64_t i = 0; i < 8; ++i) {
    CHECK(tokens[i * 3 + 0] == doctest::Approx(0.25));
    CHECK(tokens[i * 3 + 1] == doctest::Approx(-1.0));
    CHECK(tokens[i * 3 + 2] == doctest::Approx(2.0));
  }
}

TEST_CASE("fuse: zeros, additive identity, and the scalar-loop oracle") {
  auto g = oracle::rng(53);
  Td z = Td::zeros({6, 3});
  Td fused = gpa::fuse(z, z, z);
  for (int64_t i = 0; i < fused.numel(); ++i) CHECK(fused[i] == 0.0);

  Td f = Td::from({6, 3}, oracle::random_values<double>(18, g));
  Td only_f = gpa::fuse(f, z, z);
  for (int64_t i = 0; i < f.numel(); ++i) CHECK(only_f[i] == f[i]);

  Td m = Td::from({6, 3}, oracle::random_values<double>(18, g));
  Td c = Td::from({6, 3}, oracle::random_values<double>(18, g));
  Td all = gpa::fuse(f, m, c);
  for (int64_t i = 0; i < f.numel(); ++i) {
    // reference sum computed element by element
    CHECK(all[i] == (f[i] + m[i]) + c[i]);
  }
}

TEST_CASE("fuse is invariant under argument permutation") {
  auto g = oracle::rng(54);
  Td a = Td::from({4, 2}, oracle::random_values<double>(8, g));
  Td b = Td::from({4, 2}, oracle::random_values<double>(8, g));
  Td c = Td::from({4, 2}, oracle::random_values<double>(8, g));
  Td r1 = gpa::fuse(a, b, c);
  Td r2 = gpa::fuse(c, a, b);
  Td r3 = gpa::fuse(b, c, a);
  for (int64_t i = 0; i < r1.numel(); ++i) {
    CHECK(r1[i] == doctest::Approx(r2[i]).epsilon(1e-15));
    CHECK(r1[i] == doctest::Approx(r3[i]).epsilon(1e-15));
  }
}

TEST_CASE("fuse rejects mismatched shapes") {
  CHECK_THROWS_AS(gpa::fuse(Td::zeros({4, 2}), Td::zeros({4, 2}),
                            Td::zeros({2, 4})),
                  gpa::ShapeError);
}

TEST_CASE("masa_forward: zero attention projections add the value bias") {
  MasaConfig cfg;
  cfg.embed_dim = 3;
  auto g = oracle::rng(55);
  auto p = random_params<double>(cfg, 6);
  std::fill(p.wq.data().begin(), p.wq.data().end(), 0.0);
  std::fill(p.wk.data().begin(), p.wk.data().end(), 0.0);
  std::fill(p.wv.data().begin(), p.wv.data().end(), 0.0);
  p.bv = Td::from({3}, {0.5, -0.25, 1.5});
  Td vol = Td::from({1, 8, 8, 8}, oracle::random_values<double>(512, g));

  Td fused = gpa::fuse(gpa::path_extract(vol, p.fine),
                       gpa::path_extract(vol, p.medium),
                       gpa::path_extract(vol, p.coarse));
  Td out = gpa::masa_forward(vol, p);
  REQUIRE(out.shape() == fused.shape());
  for (int64_t i = 0; i < 8; ++i)
    for (int64_t c = 0; c < 3; ++c)
      CHECK(out[i * 3 + c] ==
            doctest::Approx(fused[i * 3 + c] + p.bv[c]).epsilon(1e-12));
}

TEST_CASE("masa_forward: zero value projection makes it the identity on fused") {
  MasaConfig cfg;
  cfg.embed_dim = 2;
  auto g = oracle::rng(56);
  auto p = random_params<double>(cfg, 7);
  std::fill(p.wv.data().begin(), p.wv.data().end(), 0.0);
  std::fill(p.bv.data().begin(), p.bv.data().end(), 0.0);
  Td vol = Td::from({1, 8, 8, 8}, oracle::random_values<double>(512, g));
  Td fused = gpa::fuse(gpa::path_extract(vol, p.fine),
                       gpa::path_extract(vol, p.medium),
                       gpa::path_extract(vol, p.coarse));
  Td out = gpa::masa_forward(vol, p);
  for (int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == fused[i]);
}

TEST_CASE("masa_forward shape: 32^3 volume with width 32 gives 512x32") {
  MasaConfig cfg;
  cfg.embed_dim = 32;
  auto g = oracle::rng(57);
  auto p = random_params<float>(cfg, 8);
  Tf vol = Tf::from({1, 32, 32, 32},
                    oracle::random_values<float>(32 * 32 * 32, g));
  Tf out = gpa::masa_forward(vol, p);
  CHECK(out.shape() == gpa::Shape{512, 32});
  CHECK(gpa::all_finite(out));
}

TEST_CASE("all paths agree on shape across a sweep of legal extents") {
  // the conv arithmetic (pad (k-1)/2, stride 2, twice) gives DHW/64 tokens
  // independent of k; checked analytically over the whole grid and by
  // running the convs on a sample of extents
  for (int64_t D = 8; D <= 64; D += 8)
    for (int64_t k : {3L, 5L, 7L}) {
      const int64_t pad = (k - 1) / 2;
      const int64_t once = (D + 2 * pad - k) / 2 + 1;
      const int64_t twice = (once + 2 * pad - k) / 2 + 1;
      CHECK(once == D / 2);
      CHECK(twice == D / 4);
    }

  MasaConfig cfg;
  cfg.embed_dim = 2;
  auto p = random_params<float>(cfg, 9);
  auto g = oracle::rng(58);
  const int64_t extents[] = {8, 16, 24, 40};
  for (int64_t D : extents) {
    const int64_t H = extents[(D / 8) % 4], W = 8;
    Tf vol = Tf::from({1, D, H, W},
                      oracle::random_values<float>(D * H * W, g));
    gpa::Shape expect{D * H * W / 64, 2};
    CHECK(gpa::path_extract(vol, p.fine).shape() == expect);
    CHECK(gpa::path_extract(vol, p.medium).shape() == expect);
    CHECK(gpa::path_extract(vol, p.coarse).shape() == expect);
  }
}

TEST_CASE("full-module gradient check on a 1x8^3 input") {
  // narrower widths make the per-token normalization statistics nearly
  // degenerate and blow up finite-difference truncation; 8 features keeps
  // the check in the regime the module actually runs in
  MasaConfig cfg;
  cfg.embed_dim = 8;
  auto g = oracle::rng(59);
  gpa::ParamStore<double> store;
  std::mt19937_64 rng(11);
  auto p = gpa::make_masa_params<double>(store, cfg, rng);
  Td vol = Td::from({1, 8, 8, 8}, oracle::random_values<double>(512, g));

  std::vector<Td> inputs{vol};
  for (auto& item : store.items()) inputs.push_back(item.value);
  double err = gpa::grad_check(
      [&](const std::vector<Td>& t) {
        Td out = gpa::masa_forward(t[0], p);
        return gpa::sum(gpa::mul(out, out));
      },
      inputs, 1e-4, 12, 77);
  CHECK(err < 1e-4);
}
