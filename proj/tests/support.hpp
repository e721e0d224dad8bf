#pragma once

// Test-only oracles and generators. Nothing here calls into the code paths
// it is used to check.

#include "addfit/addfit.hpp"

#include <random>
#include <vector>

namespace addfit::testing {

/// Some power S^k, k <= n^2, is entrywise positive. Works on the 0/1 pattern
/// so the answer does not depend on underflow of small products.
inline bool power_positive_oracle(const Matrix& s) {
  const Eigen::Index n = s.rows();
  using B = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  const B pattern = (s.array() > 0.0).cast<int>();
  B power = pattern;
  for (Eigen::Index k = 1; k <= n * n; ++k) {
    if ((power.array() > 0).all()) return true;
    power = ((power * pattern).array() > 0).cast<int>();
  }
  return false;
}

/// max over all pairs (i, j) of x_j - x_i such that no sample lies strictly
/// between them.
inline double max_gap_oracle(const Vector& x) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (!(x[j] > x[i])) continue;
      bool empty = true;
      for (Eigen::Index k = 0; k < x.size() && empty; ++k)
        empty = !(x[k] > x[i] && x[k] < x[j]);
      if (empty) best = std::max(best, x[j] - x[i]);
    }
  return best;
}

/// Random row-stochastic matrix with a random sparsity pattern; the diagonal
/// may or may not be populated.
inline Matrix random_stochastic(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double density = 0.05 + 0.5 * unif(rng);
  const bool zero_diag = unif(rng) < 0.5;
  Matrix s = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (zero_diag && i == j) continue;
      if (unif(rng) < density) s(i, j) = 0.05 + unif(rng);
    }
    if (s.row(i).sum() == 0.0) {
      std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
      Eigen::Index j = pick(rng);
      if (zero_diag && n > 1)
        while (j == i) j = pick(rng);
      s(i, j) = 1.0;
    }
    s.row(i) /= s.row(i).sum();
  }
  return s;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = 0.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Vector x(n);
  for (auto& e : x) e = unif(rng);
  return x;
}

inline KernelSpec random_kernel(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 3);
  return {static_cast<KernelShape>(pick(rng))};
}

/// Two-cluster design: n_a points in [0, 1] and n_b points in [10, 11] on
/// both coordinates, with identical cluster membership. Within-cluster
/// spacings are 1/(size-1), so a Uniform kernel with h = 0.5 connects each
/// cluster but never bridges them.
inline Dataset two_cluster_dataset(Eigen::Index n_a = 6, Eigen::Index n_b = 5) {
  const Eigen::Index n = n_a + n_b;
  Vector y(n), u(n), v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool a = i < n_a;
    const Eigen::Index k = a ? i : i - n_a;
    const Eigen::Index size = a ? n_a : n_b;
    const double base = a ? 0.0 : 10.0;
    u[i] = base + static_cast<double>(k) / static_cast<double>(size - 1);
    // v visits the same cluster in reverse order
    v[i] = base + static_cast<double>(size - 1 - k) / static_cast<double>(size - 1);
    y[i] = std::sin(static_cast<double>(i));
  }
  return Dataset(y, u, v);
}

}  // namespace addfit::testing
