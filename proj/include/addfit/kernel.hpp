#pragma once

// Kernel shapes, scaled evaluation and Nadaraya-Watson weight rows.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace addfit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class KernelShape { Uniform, Epanechnikov, Triangular, Gaussian };

/// Raw kernel values below this are treated as exact zeros, so positivity
/// tests on compact-support kernels are never decided by denormals.
inline constexpr double kKernelZero = 1e-300;

struct KernelSpec {
  KernelShape shape = KernelShape::Gaussian;

  /// K(t). Symmetric, K(0) > 0; compact shapes vanish outside [-1, 1].
  double operator()(double t) const {
    const double a = std::abs(t);
    double k = 0.0;
    switch (shape) {
      case KernelShape::Uniform:
        k = a <= 1.0 ? 0.5 : 0.0;
        break;
      case KernelShape::Epanechnikov:
        k = a < 1.0 ? 0.75 * (1.0 - t * t) : 0.0;
        break;
      case KernelShape::Triangular:
        k = a < 1.0 ? 1.0 - a : 0.0;
        break;
      case KernelShape::Gaussian:
        k = std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
        break;
    }
    return k < kKernelZero ? 0.0 : k;
  }

  bool compact() const { return shape != KernelShape::Gaussian; }
};

inline std::string_view to_string(KernelShape s) {
  switch (s) {
    case KernelShape::Uniform: return "uniform";
    case KernelShape::Epanechnikov: return "epanechnikov";
    case KernelShape::Triangular: return "triangular";
    case KernelShape::Gaussian: return "gaussian";
  }
  return "?";
}

inline KernelShape parse_kernel_shape(std::string_view name) {
  if (name == "uniform") return KernelShape::Uniform;
  if (name == "epanechnikov") return KernelShape::Epanechnikov;
  if (name == "triangular") return KernelShape::Triangular;
  if (name == "gaussian") return KernelShape::Gaussian;
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "'");
}

/// K_h(t) = K(t/h)/h.
inline double eval_scaled(const KernelSpec& kernel, double t, double h) {
  if (!(h > 0.0)) throw std::domain_error("bandwidth must be positive");
  return kernel(t / h) / h;
}

/// Normalized kernel weights of point i against every sample point.
inline Vector weight_row(const KernelSpec& kernel, const Vector& x,
                         Eigen::Index i, double h_i) {
  if (!(h_i > 0.0)) throw std::domain_error("bandwidth must be positive");
  const Eigen::Index n = x.size();
  Vector w(n);
  // The 1/h factor cancels in the normalization.
  for (Eigen::Index k = 0; k < n; ++k) w[k] = kernel((x[i] - x[k]) / h_i);
  const double total = w.sum();
  // w[i] = K(0) > 0 for every shape, so total > 0.
  return w / total;
}

// ---------------------------------------------------------------------------
// Bandwidths

struct ConstantBandwidth {
  double h;
};
struct PerPointBandwidth {
  std::vector<double> h;
};
struct KNearestBandwidth {
  int k;
};

using BandwidthSpec =
    std::variant<ConstantBandwidth, PerPointBandwidth, KNearestBandwidth>;

/// Error for a k-nearest bandwidth that collapses to zero at one point.
class ZeroBandwidthError : public std::domain_error {
 public:
  explicit ZeroBandwidthError(Eigen::Index index)
      : std::domain_error("k-nearest bandwidth is zero at index " +
                          std::to_string(index) + " (tied sample values)"),
        index_(index) {}
  Eigen::Index index() const { return index_; }

 private:
  Eigen::Index index_;
};

namespace detail {

inline std::vector<Eigen::Index> sort_order(const Vector& x) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
  return order;
}

/// Distance from `q` to its k-th nearest entry of the sorted array, skipping
/// position `skip` (the query point itself) when given.
inline double kth_distance(const std::vector<double>& sorted, double q, int k,
                           std::optional<std::size_t> skip) {
  const auto n = sorted.size();
  std::size_t right =
      static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), q) -
                               sorted.begin());
  std::ptrdiff_t left = static_cast<std::ptrdiff_t>(right) - 1;
  double d = 0.0;
  int taken = 0;
  while (taken < k) {
    if (skip && right < n && right == *skip) { ++right; continue; }
    if (skip && left >= 0 && static_cast<std::size_t>(left) == *skip) { --left; continue; }
    const bool has_l = left >= 0;
    const bool has_r = right < n;
    if (!has_l && !has_r) break;
    const double dl = has_l ? q - sorted[left] : INFINITY;
    const double dr = has_r ? sorted[right] - q : INFINITY;
    if (dl <= dr) { d = dl; --left; } else { d = dr; ++right; }
    ++taken;
  }
  return d;
}

}  // namespace detail

/// Per-point bandwidths h_1..h_n for sample `x`.
inline std::vector<double> realize_bandwidths(const BandwidthSpec& spec,
                                              const Vector& x) {
  const auto n = static_cast<std::size_t>(x.size());
  return std::visit(
      [&](const auto& b) -> std::vector<double> {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, ConstantBandwidth>) {
          if (!(b.h > 0.0)) throw std::domain_error("bandwidth must be positive");
          return std::vector<double>(n, b.h);
        } else if constexpr (std::is_same_v<T, PerPointBandwidth>) {
          if (b.h.size() != n)
            throw std::invalid_argument("per-point bandwidth length mismatch");
          for (double h : b.h)
            if (!(h > 0.0)) throw std::domain_error("bandwidth must be positive");
          return b.h;
        } else {
          if (b.k < 1 || static_cast<std::size_t>(b.k) >= n)
            throw std::domain_error("k-nearest bandwidth needs 1 <= k < n");
          const auto order = detail::sort_order(x);
          std::vector<double> sorted(n);
          for (std::size_t r = 0; r < n; ++r) sorted[r] = x[order[r]];
          std::vector<double> h(n);
          for (std::size_t r = 0; r < n; ++r) {
            const double d = detail::kth_distance(sorted, sorted[r], b.k, r);
            if (!(d > 0.0)) throw ZeroBandwidthError(order[r]);
            h[order[r]] = d;
          }
          return h;
        }
      },
      spec);
}

/// Bandwidth for an out-of-sample query at `q`. Constant: h. k-nearest: the
/// k-th nearest sample distance from q. Per-point: bandwidth of the nearest
/// sample point.
inline double query_bandwidth(const BandwidthSpec& spec, const Vector& x,
                              double q) {
  if (const auto* c = std::get_if<ConstantBandwidth>(&spec)) return c->h;
  if (const auto* p = std::get_if<PerPointBandwidth>(&spec)) {
    Eigen::Index best = 0;
    (x.array() - q).abs().minCoeff(&best);
    return p->h.at(static_cast<std::size_t>(best));
  }
  const auto k = std::get<KNearestBandwidth>(spec).k;
  std::vector<double> sorted(x.data(), x.data() + x.size());
  std::sort(sorted.begin(), sorted.end());
  if (k < 1 || static_cast<std::size_t>(k) > sorted.size())
    throw std::domain_error("k-nearest bandwidth needs 1 <= k <= n");
  return detail::kth_distance(sorted, q, k, std::nullopt);
}

inline double sample_sd(const Vector& x) {
  const double n = static_cast<double>(x.size());
  if (n < 2) return 0.0;
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / (n - 1.0));
}

/// Rate bandwidth coef * n^-delta, optionally scaled by the sample sd of x.
inline ConstantBandwidth rate_bandwidth(const Vector& x, double delta,
                                        bool scale_by_sd = true,
                                        double coef = 1.0) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::domain_error("bandwidth rate exponent must lie in (0, 1)");
  double h = coef * std::pow(static_cast<double>(x.size()), -delta);
  if (scale_by_sd) h *= sample_sd(x);
  if (!(h > 0.0)) throw std::domain_error("rate bandwidth is not positive");
  return {h};
}

}  // namespace addfit
