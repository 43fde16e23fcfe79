#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gpa/attention.hpp"
#include "gpa/conv.hpp"
#include "gpa/gradcheck.hpp"
#include "gpa/ops.hpp"
#include "gpa/optim.hpp"
#include "oracles.hpp"

using gpa::Tensor;
using gpa::Tape;
using Td = Tensor<double>;

namespace {

Td random_tensor(gpa::Shape shape, std::mt19937_64& g, double lo = -1.0,
                 double hi = 1.0) {
  return Td::from(shape, oracle::random_values<double>(gpa::numel(shape), g,
                                                       lo, hi));
}

}  // namespace

TEST_CASE("tensor basics") {
  Td t = Td::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.shape() == gpa::Shape{2, 3});
  CHECK(t[4] == 5.0);
  CHECK_THROWS_AS(Td::from({2, 2}, {1, 2, 3}), gpa::ShapeError);

  Td v = t.reshaped({3, 2});
  CHECK(v.shape() == gpa::Shape{3, 2});
  v[0] = 10.0;
  CHECK(t[0] == 10.0);  // reshape aliases
}

TEST_CASE("backward: sum gives ones, sum of squares gives 2x") {
  auto g = oracle::rng(1);
  Td x = random_tensor({4, 5}, g);
  x.set_requires_grad(true);
  {
    Tape<double> tape;
    Tape<double>::Scope scope(tape);
    Td loss = gpa::sum(x);
    tape.backward(loss);
  }
  for (double v : x.grad()) CHECK(v == 1.0);

  x.zero_grad();
  {
    Tape<double> tape;
    Tape<double>::Scope scope(tape);
    Td loss = gpa::sum(gpa::mul(x, x));
    tape.backward(loss);
  }
  for (int64_t i = 0; i < x.numel(); ++i)
    CHECK(x.grad()[size_t(i)] == doctest::Approx(2.0 * x[i]).epsilon(1e-12));
}

TEST_CASE("backward twice without reset doubles leaf gradients") {
  auto g = oracle::rng(2);
  Td x = random_tensor({3, 3}, g);
  x.set_requires_grad(true);
  Tape<double> tape;
  Tape<double>::Scope scope(tape);
  Td loss = gpa::sum(gpa::mul(gpa::add(x, x), x));
  tape.backward(loss);
  std::vector<double> once = x.grad();
  tape.backward(loss);
  for (size_t i = 0; i < once.size(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-14));
}

TEST_CASE("backward rejects non-scalar and unrecorded losses") {
  Td x = Td::from({2}, {1, 2});
  x.set_requires_grad(true);
  Tape<double> tape;
  Tape<double>::Scope scope(tape);
  Td y = gpa::mul(x, x);
  CHECK_THROWS_AS(tape.backward(y), gpa::ShapeError);
  CHECK_THROWS_AS(tape.backward(Td::scalar(1.0)), gpa::ShapeError);
}

TEST_CASE("matmul examples") {
  Td a = Td::from({2, 2}, {1, 2, 3, 4});
  Td eye = Td::from({2, 2}, {1, 0, 0, 1});
  Td r = gpa::matmul(a, eye);
  for (int64_t i = 0; i < 4; ++i) CHECK(r[i] == a[i]);

  Td b = Td::from({2, 1}, {1, 1});
  Td p = gpa::matmul(a, b);
  CHECK(p[0] == 3.0);
  CHECK(p[1] == 7.0);

  const int64_t k = 7;
  Td ones_row = Td::full({1, k}, 1.0);
  Td ones_col = Td::full({k, 1}, 1.0);
  CHECK(gpa::matmul(ones_row, ones_col)[0] == double(k));

  CHECK_THROWS_AS(gpa::matmul(Td::zeros({2, 3}), Td::zeros({2, 3})),
                  gpa::ShapeError);
}

TEST_CASE("matmul matches scalar-loop oracle") {
  auto g = oracle::rng(3);
  for (int iter = 0; iter < 5; ++iter) {
    int64_t m = 1 + int64_t(g() % 6), k = 1 + int64_t(g() % 6),
            n = 1 + int64_t(g() % 6);
    Td a = random_tensor({m, k}, g);
    Td b = random_tensor({k, n}, g);
    Td c = gpa::matmul(a, b);
    auto ref = oracle::matmul(a.data(), b.data(), m, k, n);
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(c[int64_t(i)] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("softmax examples") {
  const int64_t K = 5;
  Td z = Td::zeros({1, K});
  Td s = gpa::softmax(z, 1);
  for (int64_t i = 0; i < K; ++i)
    CHECK(s[i] == doctest::Approx(1.0 / K).epsilon(1e-12));

  Td big = Td::from({1, 2}, {1000.0, 0.0});
  Td sb = gpa::softmax(big, 1);
  CHECK(sb[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sb[1] == doctest::Approx(0.0).epsilon(1e-9));

  Td logs = Td::from({1, 3}, {std::log(1.0), std::log(2.0), std::log(3.0)});
  Td sl = gpa::softmax(logs, 1);
  CHECK(sl[0] == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(sl[1] == doctest::Approx(2.0 / 6).epsilon(1e-12));
  CHECK(sl[2] == doctest::Approx(3.0 / 6).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and stay non-negative across magnitudes") {
  auto g = oracle::rng(4);
  for (int seed = 0; seed < 20; ++seed) {
    Td x = random_tensor({8, 6}, g, -1e3, 1e3);
    Td s = gpa::softmax(x, 1);
    for (int64_t r = 0; r < 8; ++r) {
      double total = 0.0;
      for (int64_t c = 0; c < 6; ++c) {
        CHECK(s[r * 6 + c] >= 0.0);
        total += s[r * 6 + c];
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("softmax along a non-trailing axis matches per-slice oracle") {
  auto g = oracle::rng(5);
  Td x = random_tensor({3, 4}, g);
  Td s = gpa::softmax(x, 0);
  for (int64_t c = 0; c < 4; ++c) {
    std::vector<double> col{x[c], x[4 + c], x[8 + c]};
    auto ref = oracle::softmax_row(col);
    for (int64_t r = 0; r < 3; ++r)
      CHECK(s[r * 4 + c] == doctest::Approx(ref[size_t(r)]).epsilon(1e-12));
  }
}

TEST_CASE("layer_norm examples") {
  Td gamma = Td::full({4}, 1.0), beta = Td::zeros({4});
  Td c = Td::full({1, 4}, 3.5);
  Td out = gpa::layer_norm(c, gamma, beta);
  for (int64_t i = 0; i < 4; ++i)
    CHECK(out[i] == doctest::Approx(0.0).epsilon(1e-6));

  Td t = Td::from({1, 2}, {1.0, -1.0});
  Td g2 = Td::full({2}, 1.0), b2 = Td::zeros({2});
  Td o2 = gpa::layer_norm(t, g2, b2);
  CHECK(o2[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(o2[1] == doctest::Approx(-1.0).epsilon(1e-4));

  auto g = oracle::rng(6);
  Td x = random_tensor({3, 4}, g);
  Td zero_gamma = Td::zeros({4});
  Td some_beta = Td::from({4}, {1, 2, 3, 4});
  Td o3 = gpa::layer_norm(x, zero_gamma, some_beta);
  for (int64_t r = 0; r < 3; ++r)
    for (int64_t j = 0; j < 4; ++j) CHECK(o3[r * 4 + j] == some_beta[j]);
}

TEST_CASE("gelu asymptotes") {
  Td x = Td::from({3}, {0.0, 20.0, -20.0});
  Td y = gpa::gelu(x);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(y[2] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("attention: single key broadcasts its value") {
  auto g = oracle::rng(7);
  Td q = random_tensor({5, 3}, g);
  Td k = random_tensor({1, 3}, g);
  Td v = random_tensor({1, 4}, g);
  Td out = gpa::scaled_attention(q, k, v);
  for (int64_t i = 0; i < 5; ++i)
    for (int64_t j = 0; j < 4; ++j)
      CHECK(out[i * 4 + j] == doctest::Approx(v[j]).epsilon(1e-12));
}

TEST_CASE("attention: identical keys average the values") {
  auto g = oracle::rng(8);
  Td q = random_tensor({3, 2}, g);
  Td krow = random_tensor({1, 2}, g);
  Td k = Td::zeros({4, 2});
  for (int64_t j = 0; j < 4; ++j) {
    k[j * 2] = krow[0];
    k[j * 2 + 1] = krow[1];
  }
  Td v = random_tensor({4, 3}, g);
  Td out = gpa::scaled_attention(q, k, v);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t c = 0; c < 3; ++c) {
      double mean = (v[c] + v[3 + c] + v[6 + c] + v[9 + c]) / 4.0;
      CHECK(out[i * 3 + c] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("attention: scaled orthogonal queries attend to themselves") {
  const int64_t n = 4;
  Td q = Td::zeros({n, n});
  for (int64_t i = 0; i < n; ++i) q[i * n + i] = 60.0;  // large margin
  Td k = q.clone_values();
  auto g = oracle::rng(9);
  Td v = random_tensor({n, 2}, g);
  Td out = gpa::scaled_attention(q, k, v);
  auto ref = oracle::attention(q.data(), k.data(), v.data(), n, n, n, 2);
  for (size_t i = 0; i < ref.size(); ++i)
    CHECK(out[int64_t(i)] == doctest::Approx(ref[i]).epsilon(1e-12));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t c = 0; c < 2; ++c)
      CHECK(out[i * 2 + c] == doctest::Approx(v[i * 2 + c]).epsilon(1e-6));
}

TEST_CASE("attention matches the scalar oracle on random shapes") {
  auto g = oracle::rng(10);
  for (int iter = 0; iter < 8; ++iter) {
    int64_t nq = 1 + int64_t(g() % 40), nk = 1 + int64_t(g() % 40),
            d = 1 + int64_t(g() % 8), dv = 1 + int64_t(g() % 8);
    Td q = random_tensor({nq, d}, g);
    Td k = random_tensor({nk, d}, g);
    Td v = random_tensor({nk, dv}, g);
    Td out = gpa::scaled_attention(q, k, v);
    auto ref = oracle::attention(q.data(), k.data(), v.data(), nq, nk, d, dv);
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(out[int64_t(i)] == doctest::Approx(ref[i]).epsilon(1e-10));
  }
}

TEST_CASE("conv3d: identity kernel reproduces the input") {
  auto g = oracle::rng(11);
  Td in = random_tensor({1, 4, 4, 4}, g);
  Td w = Td::zeros({1, 1, 3, 3, 3});
  w[13] = 1.0;  // center tap
  Td b = Td::zeros({1});
  Td out = gpa::conv3d(in, w, b, 1);
  CHECK(out.shape() == in.shape());
  for (int64_t i = 0; i < in.numel(); ++i)
    CHECK(out[i] == doctest::Approx(in[i]).epsilon(1e-12));
}

TEST_CASE("conv3d: all-ones kernel sums the 27-window in the interior") {
  const double c = 0.731;
  Td in = Td::full({1, 5, 5, 5}, c);
  Td w = Td::full({1, 1, 3, 3, 3}, 1.0);
  Td b = Td::zeros({1});
  Td out = gpa::conv3d(in, w, b, 1, 1);
  // interior voxels see the whole window
  for (int64_t z = 1; z < 4; ++z)
    for (int64_t y = 1; y < 4; ++y)
      for (int64_t x = 1; x < 4; ++x)
        CHECK(out[(z * 5 + y) * 5 + x] ==
              doctest::Approx(27.0 * c).epsilon(1e-12));
  // a corner sees an eighth of it
  CHECK(out[0] == doctest::Approx(8.0 * c).epsilon(1e-12));
}

TEST_CASE("conv3d: stride-2 halves 96 to 48 to 24") {
  CHECK(gpa::detail::conv_out_extent(96, 3, 2, 1) == 48);
  CHECK(gpa::detail::conv_out_extent(48, 3, 2, 1) == 24);
  Td in = Td::zeros({1, 96, 8, 8});
  Td w = Td::zeros({1, 1, 3, 3, 3});
  Td b = Td::zeros({1});
  Td once = gpa::conv3d(in, w, b, 2);
  CHECK(once.shape() == gpa::Shape{1, 48, 4, 4});
  Td twice = gpa::conv3d(once, w, b, 2);
  CHECK(twice.shape() == gpa::Shape{1, 24, 2, 2});
}

TEST_CASE("conv3d shape formula swept over extent/kernel/stride") {
  Td b = Td::zeros({1});
  for (int64_t D = 4; D <= 16; ++D)
    for (int64_t k : {3, 5, 7})
      for (int64_t s : {1, 2}) {
        const int64_t pad = (k - 1) / 2;
        Td in = Td::zeros({1, D, D, D});
        Td w = Td::zeros({1, 1, k, k, k});
        Td out = gpa::conv3d(in, w, b, s);
        const int64_t expect = (D + 2 * pad - k) / s + 1;
        CHECK(out.dim(1) == expect);
        CHECK(out.dim(2) == expect);
        CHECK(out.dim(3) == expect);
      }
}

TEST_CASE("conv3d matches direct-summation oracle with channels") {
  auto g = oracle::rng(12);
  for (int64_t stride : {1, 2}) {
    Td in = random_tensor({3, 6, 5, 7}, g);
    Td w = random_tensor({4, 3, 3, 3, 3}, g);
    Td b = random_tensor({4}, g);
    Td out = gpa::conv3d(in, w, b, stride);
    auto ref = oracle::conv3d(in.data(), w.data(), b.data(), 3, 6, 5, 7, 4, 3,
                              stride, 1);
    REQUIRE(out.numel() == int64_t(ref.size()));
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(out[int64_t(i)] == doctest::Approx(ref[i]).epsilon(1e-10));
  }
}

TEST_CASE("conv3d rejects channel mismatch and even kernels") {
  Td in = Td::zeros({3, 4, 4, 4});
  Td w = Td::zeros({2, 4, 3, 3, 3});
  Td b = Td::zeros({2});
  CHECK_THROWS_AS(gpa::conv3d(in, w, b), gpa::ShapeError);
  Td we = Td::zeros({2, 3, 4, 4, 4});
  CHECK_THROWS_AS(gpa::conv3d(in, we, b), gpa::ShapeError);
}

TEST_CASE("trilinear_upsample: factor 1 is the identity") {
  auto g = oracle::rng(13);
  Td in = random_tensor({2, 3, 4, 5}, g);
  Td out = gpa::trilinear_upsample(in, 1);
  for (int64_t i = 0; i < in.numel(); ++i) CHECK(out[i] == in[i]);
}

TEST_CASE("trilinear_upsample: constants stay constant") {
  Td in = Td::full({1, 2, 2, 2}, 4.25);
  Td out = gpa::trilinear_upsample(in, 3);
  CHECK(out.shape() == gpa::Shape{1, 6, 6, 6});
  for (int64_t i = 0; i < out.numel(); ++i)
    CHECK(out[i] == doctest::Approx(4.25).epsilon(1e-12));
}

TEST_CASE("trilinear_upsample: ramp stays monotone") {
  Td in = Td::from({1, 1, 1, 2}, {0.0, 1.0});
  Td out = gpa::trilinear_upsample(in, 2);
  CHECK(out.shape() == gpa::Shape{1, 2, 2, 4});
  for (int64_t r = 0; r < 4; ++r) {
    const double* row = out.ptr() + r * 4;
    for (int64_t i = 0; i + 1 < 4; ++i) CHECK(row[i] <= row[i + 1]);
  }
  CHECK(out[0] == doctest::Approx(0.0));
  CHECK(out[3] == doctest::Approx(1.0));
}

TEST_CASE("gradients: every op passes finite-difference checks") {
  auto g = oracle::rng(14);
  using Inputs = std::vector<Td>;

  SUBCASE("elementwise and reductions") {
    Inputs in{random_tensor({3, 4}, g), random_tensor({3, 4}, g)};
    double err = gpa::grad_check(
        [](const Inputs& t) {
          return gpa::sum(gpa::mul(gpa::add(t[0], t[1]),
                                   gpa::sub(t[0], gpa::mul_scalar(t[1], 0.5))));
        },
        in);
    CHECK(err < 1e-6);
  }
  SUBCASE("div") {
    Inputs in{random_tensor({2, 3}, g, 0.5, 2.0),
              random_tensor({2, 3}, g, 0.5, 2.0)};
    double err = gpa::grad_check(
        [](const Inputs& t) { return gpa::sum(gpa::div(t[0], t[1])); }, in);
    CHECK(err < 1e-6);
  }
  SUBCASE("matmul + bias") {
    Inputs in{random_tensor({3, 4}, g), random_tensor({4, 2}, g),
              random_tensor({2}, g)};
    double err = gpa::grad_check(
        [](const Inputs& t) {
          return gpa::sum(gpa::linear(t[0], t[1], t[2]));
        },
        in);
    CHECK(err < 1e-6);
  }
  SUBCASE("softmax both axes") {
    Inputs in{random_tensor({3, 5}, g)};
    for (int axis : {0, 1}) {
      double err = gpa::grad_check(
          [axis](const Inputs& t) {
            Td s = gpa::softmax(t[0], axis);
            return gpa::sum(gpa::mul(s, s));
          },
          in);
      CHECK(err < 1e-4);
    }
  }
  SUBCASE("layer_norm") {
    Inputs in{random_tensor({4, 6}, g), random_tensor({6}, g, 0.5, 1.5),
              random_tensor({6}, g)};
    double err = gpa::grad_check(
        [](const Inputs& t) {
          Td o = gpa::layer_norm(t[0], t[1], t[2]);
          return gpa::sum(gpa::mul(o, o));
        },
        in);
    CHECK(err < 1e-4);
  }
  SUBCASE("gelu") {
    Inputs in{random_tensor({5, 3}, g, -3.0, 3.0)};
    double err = gpa::grad_check(
        [](const Inputs& t) { return gpa::sum(gpa::gelu(t[0])); }, in);
    CHECK(err < 1e-6);
  }
  SUBCASE("scaled_attention") {
    Inputs in{random_tensor({4, 3}, g), random_tensor({5, 3}, g),
              random_tensor({5, 2}, g)};
    double err = gpa::grad_check(
        [](const Inputs& t) {
          Td o = gpa::scaled_attention(t[0], t[1], t[2]);
          return gpa::sum(gpa::mul(o, o));
        },
        in);
    CHECK(err < 1e-4);
  }
  SUBCASE("conv3d") {
    Inputs in{random_tensor({2, 4, 4, 4}, g), random_tensor({3, 2, 3, 3, 3}, g),
              random_tensor({3}, g)};
    for (int64_t stride : {1, 2}) {
      double err = gpa::grad_check(
          [stride](const Inputs& t) {
            Td o = gpa::conv3d(t[0], t[1], t[2], stride);
            return gpa::sum(gpa::mul(o, o));
          },
          in);
      CHECK(err < 1e-4);
    }
  }
  SUBCASE("trilinear_upsample") {
    Inputs in{random_tensor({2, 2, 3, 2}, g)};
    double err = gpa::grad_check(
        [](const Inputs& t) {
          Td o = gpa::trilinear_upsample(t[0], 2);
          return gpa::sum(gpa::mul(o, o));
        },
        in);
    CHECK(err < 1e-4);
  }
  SUBCASE("slices, concat, transpose, patchify") {
    Inputs in{random_tensor({4, 6}, g), random_tensor({1, 8, 4, 4}, g)};
    double err = gpa::grad_check(
        [](const Inputs& t) {
          Td a = gpa::row_slice(t[0], 1, 3);
          Td b = gpa::col_slice(t[0], 2, 5);
          Td cat = gpa::concat_cols<double>({a, gpa::row_slice(b, 1, 3)});
          cat = gpa::transpose2d(cat);
          Td p = gpa::patchify(t[1], 2);
          return gpa::add(gpa::sum(gpa::mul(cat, cat)),
                          gpa::sum(gpa::mul(p, p)));
        },
        in);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("grad_check on a pure linear map is exact to 1e-10") {
  auto g = oracle::rng(15);
  std::vector<Td> in{random_tensor({4, 4}, g)};
  double err = gpa::grad_check(
      [](const std::vector<Td>& t) { return gpa::sum(t[0]); }, in);
  CHECK(err < 1e-10);
}

TEST_CASE("20-seed sweep: composite graphs pass grad_check") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto g = oracle::rng(100 + seed);
    std::vector<Td> in{random_tensor({3, 4}, g), random_tensor({4, 3}, g)};
    double err = gpa::grad_check(
        [](const std::vector<Td>& t) {
          Td h = gpa::gelu(gpa::matmul(t[0], t[1]));
          Td s = gpa::softmax(h, 1);
          return gpa::sum(gpa::mul(s, h));
        },
        in, 1e-4, -1, seed);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("adamw: zero grad leaves value fixed and counts the step") {
  gpa::Parameter<double> p;
  p.name = "w";
  p.value = Td::from({3}, {1.0, -2.0, 3.0});
  p.first_moment = Td::zeros({3});
  p.second_moment = Td::zeros({3});
  std::vector<double> zero(3, 0.0);
  gpa::AdamWConfig cfg;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0.0;
  gpa::adamw_step(p, zero, cfg);
  CHECK(p.step_count == 1);
  CHECK(p.value[0] == 1.0);
  CHECK(p.value[1] == -2.0);
  CHECK(p.value[2] == 3.0);
}

TEST_CASE("adamw: zero grad with decay is exactly multiplicative") {
  gpa::Parameter<double> p;
  p.name = "w";
  p.value = Td::from({2}, {1.5, -0.25});
  p.first_moment = Td::zeros({2});
  p.second_moment = Td::zeros({2});
  std::vector<double> zero(2, 0.0);
  gpa::AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  gpa::adamw_step(p, zero, cfg);
  const double f = 1.0 - cfg.lr * cfg.weight_decay;
  CHECK(p.value[0] == doctest::Approx(1.5 * f).epsilon(1e-15));
  CHECK(p.value[1] == doctest::Approx(-0.25 * f).epsilon(1e-15));
}

TEST_CASE("adamw: first step moves against the gradient sign by about lr") {
  gpa::Parameter<double> p;
  p.name = "w";
  p.value = Td::zeros({2});
  p.first_moment = Td::zeros({2});
  p.second_moment = Td::zeros({2});
  std::vector<double> grad{0.37, -2.4};
  gpa::AdamWConfig cfg;
  cfg.lr = 1e-3;
  gpa::adamw_step(p, grad, cfg);
  CHECK(p.value[0] == doctest::Approx(-cfg.lr).epsilon(1e-4));
  CHECK(p.value[1] == doctest::Approx(cfg.lr).epsilon(1e-4));
}

TEST_CASE("adamw with zero decay matches a decay-free reference") {
  // reference: textbook Adam with bias correction, scalar loop
  auto g = oracle::rng(16);
  const int64_t n = 5;
  std::vector<double> val = oracle::random_values<double>(n, g);
  std::vector<double> m(n, 0.0), v(n, 0.0);
  gpa::Parameter<double> p;
  p.name = "w";
  p.value = Td::from({n}, val);
  p.first_moment = Td::zeros({n});
  p.second_moment = Td::zeros({n});
  gpa::AdamWConfig cfg;
  cfg.lr = 3e-3;
  for (int step = 1; step <= 7; ++step) {
    auto grad = oracle::random_values<double>(n, g);
    gpa::adamw_step(p, grad, cfg);
    for (int64_t i = 0; i < n; ++i) {
      m[size_t(i)] = 0.9 * m[size_t(i)] + 0.1 * grad[size_t(i)];
      v[size_t(i)] =
          0.999 * v[size_t(i)] + 0.001 * grad[size_t(i)] * grad[size_t(i)];
      const double mh = m[size_t(i)] / (1.0 - std::pow(0.9, step));
      const double vh = v[size_t(i)] / (1.0 - std::pow(0.999, step));
      val[size_t(i)] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
      CHECK(p.value[i] == doctest::Approx(val[size_t(i)]).epsilon(1e-12));
    }
  }
}
