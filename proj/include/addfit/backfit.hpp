#pragma once

// Backfitting estimator for Y = alpha + m1(U) + m2(V) + eps with
// Nadaraya-Watson smoothers: the alternating iteration and the direct solve
// of its fixed-point system
//
//   [ I    S1* ] [m1]   [S1*]
//   [ S2*  I   ] [m2] = [S2*] y.

#include "addfit/kernel.hpp"
#include "addfit/smoother.hpp"

#include <Eigen/LU>

#include <stdexcept>
#include <string>

namespace addfit {

enum class Sweep { GaussSeidel, Jacobi };
enum class FitMethod { Iterative, Direct };

inline std::string_view to_string(Sweep s) {
  return s == Sweep::GaussSeidel ? "gauss-seidel" : "jacobi";
}
inline std::string_view to_string(FitMethod m) {
  return m == FitMethod::Iterative ? "iterative" : "direct";
}
inline Sweep parse_sweep(std::string_view s) {
  if (s == "gauss-seidel") return Sweep::GaussSeidel;
  if (s == "jacobi") return Sweep::Jacobi;
  throw std::invalid_argument("unknown sweep '" + std::string(s) + "'");
}

struct FitResult {
  double alpha_hat = 0.0;
  Vector m1_hat, m2_hat;
  FitMethod method = FitMethod::Iterative;
  Sweep sweep = Sweep::GaussSeidel;
  int iterations = 0;
  double final_delta = 0.0;
  /// ||m1 - S1*(y - m2)||_inf + ||m2 - S2*(y - m1)||_inf
  double residual_normal_eq = 0.0;
  /// Direct only: ||m1 - S1*(I - S2*S1*)^-1 (I - S2*) y||_inf.
  double closed_form_gap = 0.0;

  Vector fitted() const { return (m1_hat + m2_hat).array() + alpha_hat; }
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(int iterations, double last_delta)
      : std::runtime_error("backfitting did not converge in " +
                           std::to_string(iterations) + " iterations (last delta " +
                           std::to_string(last_delta) + ")"),
        iterations_(iterations),
        last_delta_(last_delta) {}
  int iterations() const { return iterations_; }
  double last_delta() const { return last_delta_; }

 private:
  int iterations_;
  double last_delta_;
};

class SingularSystemError : public std::runtime_error {
 public:
  explicit SingularSystemError(double rcond)
      : std::runtime_error("I - S2* S1* is singular or ill-conditioned (rcond " +
                           std::to_string(rcond) + ")"),
        rcond_(rcond) {}
  double rcond() const { return rcond_; }

 private:
  double rcond_;
};

inline double normal_equation_residual(const SmootherPair& pair, const Vector& y,
                                       const Vector& m1, const Vector& m2) {
  return (m1 - pair.s1_star * (y - m2)).lpNorm<Eigen::Infinity>() +
         (m2 - pair.s2_star * (y - m1)).lpNorm<Eigen::Infinity>();
}

struct IterativeOptions {
  double tol = 1e-10;
  int max_iter = -1;  // -1: 10 n + 1000
  Sweep sweep = Sweep::GaussSeidel;
};

inline int default_max_iter(Eigen::Index n) { return static_cast<int>(10 * n + 1000); }

inline void check_dims(const SmootherPair& pair, const Vector& y) {
  if (y.size() != pair.n() || pair.s2.rows() != pair.n())
    throw std::invalid_argument("response length does not match smoothers");
}

/// Alternating updates from m1 = m2 = 0 until both updates move by at most
/// tol in the sup norm.
inline FitResult backfit_iterative(const SmootherPair& pair, const Vector& y,
                                   const IterativeOptions& opt = {}) {
  check_dims(pair, y);
  if (!(opt.tol > 0.0)) throw std::domain_error("tolerance must be positive");
  const int max_iter = opt.max_iter < 0 ? default_max_iter(pair.n()) : opt.max_iter;

  FitResult f;
  f.method = FitMethod::Iterative;
  f.sweep = opt.sweep;
  f.alpha_hat = y.mean();
  Vector m1 = Vector::Zero(y.size());
  Vector m2 = Vector::Zero(y.size());
  double delta = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    Vector m1_new = pair.s1_star * (y - m2);
    Vector m2_new = pair.s2_star * (y - (opt.sweep == Sweep::GaussSeidel ? m1_new : m1));
    delta = std::max((m1_new - m1).lpNorm<Eigen::Infinity>(),
                     (m2_new - m2).lpNorm<Eigen::Infinity>());
    m1 = std::move(m1_new);
    m2 = std::move(m2_new);
    if (delta <= opt.tol) {
      f.iterations = it;
      f.final_delta = delta;
      f.m1_hat = std::move(m1);
      f.m2_hat = std::move(m2);
      f.residual_normal_eq = normal_equation_residual(pair, y, f.m1_hat, f.m2_hat);
      return f;
    }
  }
  throw NonConvergenceError(max_iter, delta);
}

/// Rejects systems whose reciprocal condition estimate is below this.
inline constexpr double kMinRcond = 1e-12;

/// One LU of (I - S2* S1*): m2 from the second closed form, then
/// m1 = S1*(y - m2). The first closed form is evaluated with the same
/// factorization as a cross-check.
inline FitResult backfit_direct(const SmootherPair& pair, const Vector& y) {
  check_dims(pair, y);
  const Eigen::Index n = pair.n();
  const Matrix id = Matrix::Identity(n, n);
  const Eigen::PartialPivLU<Matrix> lu(id - pair.s2_star * pair.s1_star);
  const double rcond = lu.rcond();
  if (!(rcond >= kMinRcond)) throw SingularSystemError(rcond);

  FitResult f;
  f.method = FitMethod::Direct;
  f.alpha_hat = y.mean();
  f.m2_hat = lu.solve(pair.s2_star * (y - pair.s1_star * y));
  f.m1_hat = pair.s1_star * (y - f.m2_hat);
  const Vector m1_closed = pair.s1_star * lu.solve(y - pair.s2_star * y);
  f.closed_form_gap = (f.m1_hat - m1_closed).lpNorm<Eigen::Infinity>();
  f.residual_normal_eq = normal_equation_residual(pair, y, f.m1_hat, f.m2_hat);
  return f;
}

class ZeroKernelMassError : public std::domain_error {
 public:
  ZeroKernelMassError()
      : std::domain_error("query point has zero kernel mass against the sample") {}
};

/// alpha + NW average of m1_hat around u + NW average of m2_hat around v.
inline double predict(const Dataset& data, const FitResult& fit, double u, double v,
                      const KernelSpec& kernel, const BandwidthSpec& bw_u,
                      const BandwidthSpec& bw_v) {
  auto smooth = [&](const Vector& x, const Vector& m, double q, const BandwidthSpec& bw) {
    const double h = query_bandwidth(bw, x, q);
    if (!(h > 0.0)) throw ZeroKernelMassError();
    double num = 0.0, den = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double w = kernel((q - x[k]) / h);
      num += w * m[k];
      den += w;
    }
    if (!(den > 0.0)) throw ZeroKernelMassError();
    return num / den;
  };
  return fit.alpha_hat + smooth(data.u(), fit.m1_hat, u, bw_u) +
         smooth(data.v(), fit.m2_hat, v, bw_v);
}

}  // namespace addfit
