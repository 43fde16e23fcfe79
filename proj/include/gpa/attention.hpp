#pragma once

#include <Eigen/Dense>

#include "gpa/ops.hpp"

namespace gpa {

namespace detail {

inline int64_t attn_block_rows(int64_t nq, int64_t nk) {
  const int64_t budget = 8 << 20;  // floats held per score block
  return std::min(nq, std::max<int64_t>(16, budget / std::max<int64_t>(1, nk)));
}

// Rowwise stable softmax of an Eigen block, in place.
template <class M>
void softmax_rows_inplace(M&& s) {
  using S = typename std::remove_reference_t<M>::Scalar;
  auto mx = s.rowwise().maxCoeff().eval();
  s = (s.colwise() - mx).array().exp().matrix();
  auto total = s.rowwise().sum().eval();
  s.array().colwise() /= total.array();
}

}  // namespace detail

// softmax(Q K^T / sqrt(d)) V, processed in query-row blocks so the full
// score matrix is never materialized. The backward pass recomputes the
// probability blocks from the saved Q and K.
template <class S>
Tensor<S> scaled_attention(const Tensor<S>& q, const Tensor<S>& k,
                           const Tensor<S>& v) {
  check_shape(q.ndim() == 2 && k.ndim() == 2 && v.ndim() == 2,
              "attention: operands must be 2-d");
  const int64_t nq = q.dim(0), d = q.dim(1), nk = k.dim(0);
  check_shape(k.dim(1) == d, "attention: query dim " + std::to_string(d) +
                                 " != key dim " + std::to_string(k.dim(1)));
  check_shape(v.dim(0) == nk, "attention: key count " + std::to_string(nk) +
                                  " != value count " + std::to_string(v.dim(0)));
  const int64_t dv = v.dim(1);
  const S scale = S(1) / std::sqrt(static_cast<S>(d));

  Tensor<S> out = Tensor<S>::zeros({nq, dv});
  const int64_t block = detail::attn_block_rows(nq, nk);
  MatRM<S> scores(block, nk);
  for (int64_t r0 = 0; r0 < nq; r0 += block) {
    const int64_t rows = std::min(block, nq - r0);
    auto sb = scores.topRows(rows);
    sb.noalias() = map2d(q, nq, d).middleRows(r0, rows) *
                   map2d(k, nk, d).transpose() * scale;
    detail::softmax_rows_inplace(sb);
    map2d(out, nq, dv).middleRows(r0, rows).noalias() = sb * map2d(v, nk, dv);
  }

  if (detail::grad_wanted<S>({&q, &k, &v})) {
    detail::mark_recorded(out, [q = q, k = k, v = v, out, nq, nk, d, dv, scale]() mutable {
      Eigen::Map<const MatRM<S>> go(out.grad().data(), nq, dv);
      const int64_t block = detail::attn_block_rows(nq, nk);
      MatRM<S> prob(block, nk), ds(block, nk);
      for (int64_t r0 = 0; r0 < nq; r0 += block) {
        const int64_t rows = std::min(block, nq - r0);
        auto pb = prob.topRows(rows);
        pb.noalias() = map2d(q, nq, d).middleRows(r0, rows) *
                       map2d(k, nk, d).transpose() * scale;
        detail::softmax_rows_inplace(pb);
        auto gob = go.middleRows(r0, rows);
        if (v.requires_grad()) {
          Eigen::Map<MatRM<S>> gv(v.grad().data(), nk, dv);
          gv.noalias() += pb.transpose() * gob;
        }
        if (q.requires_grad() || k.requires_grad()) {
          auto db = ds.topRows(rows);
          db.noalias() = gob * map2d(v, nk, dv).transpose();  // dP
          auto rowdot = (db.array() * pb.array()).rowwise().sum().eval();
          db = (pb.array() * (db.array().colwise() - rowdot.col(0).array()))
                   .matrix();  // dS
          if (q.requires_grad()) {
            Eigen::Map<MatRM<S>> gq(q.grad().data(), nq, d);
            gq.middleRows(r0, rows).noalias() += db * map2d(k, nk, d) * scale;
          }
          if (k.requires_grad()) {
            Eigen::Map<MatRM<S>> gk(k.grad().data(), nk, d);
            gk.noalias() += db.transpose() *
                            map2d(q, nq, d).middleRows(r0, rows) * scale;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace gpa
