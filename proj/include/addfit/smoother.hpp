#pragma once

// Row-stochastic smoother matrices and their mean-removed versions.

#include "addfit/kernel.hpp"

#include <stdexcept>
#include <vector>

namespace addfit {

/// Observations (y_i, u_i, v_i) in sample order, with the permutations that
/// list each coordinate in non-decreasing order.
class Dataset {
 public:
  Dataset(Vector y, Vector u, Vector v)
      : y_(std::move(y)), u_(std::move(u)), v_(std::move(v)) {
    if (y_.size() != u_.size() || y_.size() != v_.size())
      throw std::invalid_argument("y, u and v must share one length");
    if (y_.size() < 2) throw std::invalid_argument("need at least two observations");
    if (!y_.allFinite() || !u_.allFinite() || !v_.allFinite())
      throw std::invalid_argument("dataset contains non-finite values");
    sort_u_ = detail::sort_order(u_);
    sort_v_ = detail::sort_order(v_);
  }

  const Vector& y() const { return y_; }
  const Vector& u() const { return u_; }
  const Vector& v() const { return v_; }
  const std::vector<Eigen::Index>& sort_u() const { return sort_u_; }
  const std::vector<Eigen::Index>& sort_v() const { return sort_v_; }
  Eigen::Index size() const { return y_.size(); }

 private:
  Vector y_, u_, v_;
  std::vector<Eigen::Index> sort_u_, sort_v_;
};

/// Row i holds the weight row of x_i under bandwidth h_i.
inline Matrix build_smoother(const Vector& x, const KernelSpec& kernel,
                             const BandwidthSpec& bw) {
  const Eigen::Index n = x.size();
  if (n < 2) throw std::invalid_argument("smoother needs n >= 2");
  const auto h = realize_bandwidths(bw, x);
  Matrix s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    s.row(i) = weight_row(kernel, x, i, h[static_cast<std::size_t>(i)]).transpose();
  return s;
}

/// (I - 11'/n) s: subtracts the column-mean row from every row.
inline Matrix center(const Matrix& s) {
  if (s.rows() != s.cols()) throw std::invalid_argument("center needs a square matrix");
  return s.rowwise() - s.colwise().mean();
}

struct SmootherPair {
  Matrix s1, s2;
  Matrix s1_star, s2_star;

  Eigen::Index n() const { return s1.rows(); }
};

inline SmootherPair build_pair(const Dataset& data, const KernelSpec& kernel,
                               const BandwidthSpec& bw_u,
                               const BandwidthSpec& bw_v) {
  SmootherPair p;
  p.s1 = build_smoother(data.u(), kernel, bw_u);
  p.s2 = build_smoother(data.v(), kernel, bw_v);
  p.s1_star = center(p.s1);
  p.s2_star = center(p.s2);
  return p;
}

}  // namespace addfit
