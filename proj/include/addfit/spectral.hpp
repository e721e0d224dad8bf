#pragma once

// Convergence certification for bivariate kernel backfitting.
//
// Positive kernel weight across every adjacent order-statistic gap makes a
// smoother S irreducible; K(0) > 0 puts mass on the diagonal, so S is a
// regular transition matrix. Its eigenvalue 1 (eigenvector 1/sqrt(n)) is then
// simple and dominant, the centered smoother S* = (I - 11'/n) S keeps the
// remaining spectrum and maps the Perron direction to 0, and rho(S2* S1*) < 1
// makes (I - S2* S1*) invertible and the backfitting iteration contractive.

#include "addfit/kernel.hpp"
#include "addfit/smoother.hpp"

#include <Eigen/Eigenvalues>

#include <complex>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace addfit {

enum class Coordinate { U, V };

struct GapReport {
  Coordinate coordinate = Coordinate::U;
  std::vector<double> gaps;  // x_(r+1) - x_(r), r = 0..n-2
  double max_gap = 0.0;
  bool condition_holds = true;
  /// Ranks r (0-based, sorted order) whose kernel weight towards an adjacent
  /// order statistic is zero.
  std::vector<Eigen::Index> failing_indices;
};

/// Checks K_{h_(r)}(x_(r) - x_(r-1)) > 0 and K_{h_(r)}(x_(r) - x_(r+1)) > 0
/// for every rank r that has the corresponding neighbour.
inline GapReport check_gap_conditions(const Vector& x, const KernelSpec& kernel,
                                      const BandwidthSpec& bw,
                                      Coordinate coordinate = Coordinate::U) {
  const Eigen::Index n = x.size();
  if (n < 2) throw std::invalid_argument("gap conditions need n >= 2");
  const auto h = realize_bandwidths(bw, x);
  const auto order = detail::sort_order(x);

  GapReport r;
  r.coordinate = coordinate;
  r.gaps.resize(static_cast<std::size_t>(n - 1));
  for (Eigen::Index k = 0; k + 1 < n; ++k)
    r.gaps[k] = x[order[k + 1]] - x[order[k]];
  r.max_gap = *std::max_element(r.gaps.begin(), r.gaps.end());

  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = order[k];
    const double hi = h[static_cast<std::size_t>(i)];
    bool ok = true;
    if (k > 0) ok = ok && eval_scaled(kernel, x[i] - x[order[k - 1]], hi) > 0.0;
    if (k + 1 < n) ok = ok && eval_scaled(kernel, x[i] - x[order[k + 1]], hi) > 0.0;
    if (!ok) r.failing_indices.push_back(k);
  }
  r.condition_holds = r.failing_indices.empty();
  return r;
}

// ---------------------------------------------------------------------------
// Markov-chain regularity

struct RegularityReport {
  bool irreducible = false;
  bool positive_diagonal = false;
  int period = 0;  // 0 when reducible
  bool regular() const { return irreducible && period == 1; }
};

inline void require_stochastic(const Matrix& s, double tol = 1e-10) {
  if (s.rows() != s.cols() || s.rows() == 0)
    throw std::domain_error("transition matrix must be square and non-empty");
  if (!s.allFinite() || (s.array() < 0.0).any())
    throw std::domain_error("transition matrix has negative or non-finite entries");
  if (((s.rowwise().sum().array() - 1.0).abs() > tol).any())
    throw std::domain_error("transition matrix rows do not sum to 1");
}

/// Strong connectivity of the positive-entry graph plus its period (gcd of
/// cycle lengths, from BFS levels). A positive diagonal forces period 1.
inline RegularityReport analyze_regularity(const Matrix& s) {
  require_stochastic(s);
  const Eigen::Index n = s.rows();
  RegularityReport rep;
  rep.positive_diagonal = (s.diagonal().array() > 0.0).all();

  auto reach = [&](bool transpose) {
    std::vector<int> level(static_cast<std::size_t>(n), -1);
    std::queue<Eigen::Index> q;
    level[0] = 0;
    q.push(0);
    while (!q.empty()) {
      const auto i = q.front();
      q.pop();
      for (Eigen::Index j = 0; j < n; ++j) {
        const double w = transpose ? s(j, i) : s(i, j);
        if (w > 0.0 && level[j] < 0) {
          level[j] = level[i] + 1;
          q.push(j);
        }
      }
    }
    return level;
  };

  const auto fwd = reach(false);
  const auto bwd = reach(true);
  rep.irreducible = std::none_of(fwd.begin(), fwd.end(), [](int l) { return l < 0; }) &&
                    std::none_of(bwd.begin(), bwd.end(), [](int l) { return l < 0; });
  if (!rep.irreducible) return rep;

  int g = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (s(i, j) > 0.0) g = std::gcd(g, std::abs(fwd[i] + 1 - fwd[j]));
  rep.period = g;
  return rep;
}

/// Irreducible and aperiodic.
inline bool check_regularity(const Matrix& s) { return analyze_regularity(s).regular(); }

// ---------------------------------------------------------------------------
// Spectral radius

enum class SpectralMethod { Dense, PowerIteration };

inline std::string_view to_string(SpectralMethod m) {
  return m == SpectralMethod::Dense ? "dense" : "power_iteration";
}

struct PowerOptions {
  double tol = 1e-10;
  int max_iter = 20000;
  std::uint64_t seed = 0x5eed;
};

struct RadiusResult {
  double value = 0.0;
  bool converged = true;
  int iterations = 0;
  SpectralMethod method = SpectralMethod::Dense;
};

inline Eigen::VectorXcd eigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("eigenvalues need a square matrix");
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
  return es.eigenvalues();
}

namespace detail {

/// Power iteration that fits the dominant eigenvalue pair from the Krylov
/// triple (x, Ax, A^2 x), so a complex-conjugate or +/- dominant pair is
/// recovered instead of oscillating.
inline RadiusResult power_radius(const Matrix& m, const PowerOptions& opt) {
  RadiusResult r{0.0, false, 0, SpectralMethod::PowerIteration};
  const Eigen::Index n = m.rows();
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  // Not the all-ones start: centered smoothers annihilate it.
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = unif(rng);
  x.normalize();

  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  double prev = -1.0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    r.iterations = it;
    const Vector y1 = m * x;
    const double n1 = y1.norm();
    if (n1 <= 1e-300 * scale) { r.value = 0.0; r.converged = true; return r; }
    const Vector y2 = m * y1;
    const double n2 = y2.norm();
    if (n2 <= 1e-300 * scale) { r.value = 0.0; r.converged = true; return r; }

    const double g11 = y1.squaredNorm(), g12 = y1.dot(x), g22 = x.squaredNorm();
    const double det = g11 * g22 - g12 * g12;
    double est = 0.0, resid = 0.0;
    if (det <= 1e-10 * g11 * g22) {
      // x and Ax collinear: a single real dominant eigenvalue.
      const double lam = g12 / g22;
      est = std::abs(lam);
      resid = (y1 - lam * x).norm() / n1;
    } else {
      const double r1 = y1.dot(y2), r2 = x.dot(y2);
      const double a = (g22 * r1 - g12 * r2) / det;
      const double b = (g11 * r2 - g12 * r1) / det;
      // Dominant pair are the roots of t^2 - a t - b.
      const double disc = a * a + 4.0 * b;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        est = std::max(std::abs(0.5 * (a + sq)), std::abs(0.5 * (a - sq)));
      } else {
        est = std::sqrt(-b);
      }
      resid = (y2 - a * y1 - b * x).norm() / n2;
    }
    if (std::abs(est - prev) <= opt.tol * std::max(1.0, est) && resid <= 1e-6) {
      r.value = est;
      r.converged = true;
      return r;
    }
    prev = est;
    r.value = est;
    x = y2 / n2;
  }
  return r;
}

}  // namespace detail

/// Largest eigenvalue modulus. Dense is exact up to the eigensolver; the
/// power route reports `converged = false` when it hits its cap.
inline RadiusResult spectral_radius(const Matrix& m,
                                    SpectralMethod method = SpectralMethod::Dense,
                                    const PowerOptions& opt = {}) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral radius needs a square matrix");
  if (m.rows() == 0) return {};
  if (method == SpectralMethod::PowerIteration) return detail::power_radius(m, opt);
  return {eigenvalues(m).cwiseAbs().maxCoeff(), true, 0, SpectralMethod::Dense};
}

// ---------------------------------------------------------------------------
// Certificate

struct SpectralReport {
  double rho_s1_star = 0.0;
  double rho_s2_star = 0.0;
  double rho_product = 0.0;  // rho(S2* S1*)
  std::complex<double> top_eigenvalue_s1{};
  bool top_eigenvalue_simple = false;
  double perron_vector_check = 0.0;  // ||S1 theta - theta||, theta = 1/sqrt(n)
  SpectralMethod method = SpectralMethod::Dense;
  int iterations = 0;
};

enum class Verdict { CertifiedByGapConditions, CertifiedBySpectralRadius, NotCertified };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::CertifiedByGapConditions: return "certified_by_gap_conditions";
    case Verdict::CertifiedBySpectralRadius: return "certified_by_spectral_radius";
    case Verdict::NotCertified: return "not_certified";
  }
  return "?";
}

struct ConvergenceCertificate {
  GapReport gap_u, gap_v;
  bool regular_s1 = false, regular_s2 = false;
  SpectralReport spectral;
  Verdict verdict = Verdict::NotCertified;
  std::string notes;

  bool certified() const { return verdict != Verdict::NotCertified; }
};

/// Spectral radii below 1 - this margin count as "< 1".
inline constexpr double kCertifyMargin = 1e-8;

struct CertifyOptions {
  SpectralMethod method = SpectralMethod::Dense;
  /// Above this n the dense route is replaced by power iteration.
  Eigen::Index dense_limit = 2000;
  PowerOptions power{};
};

inline SpectralReport analyze_spectrum(const SmootherPair& pair,
                                       const CertifyOptions& opt = {},
                                       std::string* notes = nullptr) {
  const Eigen::Index n = pair.n();
  SpectralReport rep;
  const Vector theta = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  rep.perron_vector_check = (pair.s1 * theta - theta).norm();
  const Matrix product = pair.s2_star * pair.s1_star;

  auto dense = [&] {
    rep.method = SpectralMethod::Dense;
    rep.iterations = 0;
    const auto ev = eigenvalues(pair.s1);
    Eigen::Index top = 0;
    ev.cwiseAbs().maxCoeff(&top);
    rep.top_eigenvalue_s1 = ev[top];
    rep.top_eigenvalue_simple =
        ((ev.array() - ev[top]).abs() <= kCertifyMargin).count() == 1;
    rep.rho_s1_star = spectral_radius(pair.s1_star).value;
    rep.rho_s2_star = spectral_radius(pair.s2_star).value;
    rep.rho_product = spectral_radius(product).value;
  };

  const bool use_power =
      opt.method == SpectralMethod::PowerIteration || n > opt.dense_limit;
  if (!use_power) {
    dense();
    return rep;
  }

  rep.method = SpectralMethod::PowerIteration;
  const auto top = spectral_radius(pair.s1, SpectralMethod::PowerIteration, opt.power);
  const auto r1 = spectral_radius(pair.s1_star, SpectralMethod::PowerIteration, opt.power);
  const auto r2 = spectral_radius(pair.s2_star, SpectralMethod::PowerIteration, opt.power);
  const auto rp = spectral_radius(product, SpectralMethod::PowerIteration, opt.power);
  if (top.converged && r1.converged && r2.converged && rp.converged) {
    rep.top_eigenvalue_s1 = top.value;
    // The non-Perron eigenvalues of S1 are exactly those of S1* other than
    // the 0 it gains on theta, so rho(S1*) < 1 makes eigenvalue 1 simple.
    rep.top_eigenvalue_simple = r1.value < 1.0 - kCertifyMargin;
    rep.rho_s1_star = r1.value;
    rep.rho_s2_star = r2.value;
    rep.rho_product = rp.value;
    rep.iterations = top.iterations + r1.iterations + r2.iterations + rp.iterations;
    return rep;
  }
  if (notes) *notes += "power iteration did not converge; dense fallback used. ";
  dense();
  return rep;
}

inline ConvergenceCertificate certify(const SmootherPair& pair,
                                      const KernelSpec& kernel,
                                      const BandwidthSpec& bw_u,
                                      const BandwidthSpec& bw_v,
                                      const Dataset& data,
                                      const CertifyOptions& opt = {}) {
  if (pair.n() != data.size())
    throw std::invalid_argument("smoother pair and dataset sizes differ");
  ConvergenceCertificate c;
  c.gap_u = check_gap_conditions(data.u(), kernel, bw_u, Coordinate::U);
  c.gap_v = check_gap_conditions(data.v(), kernel, bw_v, Coordinate::V);
  c.regular_s1 = check_regularity(pair.s1);
  c.regular_s2 = check_regularity(pair.s2);
  c.spectral = analyze_spectrum(pair, opt, &c.notes);

  const bool gaps_ok = c.gap_u.condition_holds && c.gap_v.condition_holds;
  const bool rho_ok = c.spectral.rho_product < 1.0 - kCertifyMargin;
  if (gaps_ok && rho_ok)
    c.verdict = Verdict::CertifiedByGapConditions;
  else if (rho_ok)
    c.verdict = Verdict::CertifiedBySpectralRadius;
  else
    c.verdict = Verdict::NotCertified;

  if (!gaps_ok) {
    std::ostringstream os;
    os << "adjacent-gap condition fails on";
    if (!c.gap_u.condition_holds) os << " U (" << c.gap_u.failing_indices.size() << " ranks)";
    if (!c.gap_v.condition_holds) os << " V (" << c.gap_v.failing_indices.size() << " ranks)";
    os << ". ";
    c.notes += os.str();
  }
  if (!rho_ok) {
    std::ostringstream os;
    os.precision(17);
    os << "rho(S2* S1*) = " << c.spectral.rho_product << " is not below 1 - "
       << kCertifyMargin << "; ";
    if (pair.n() <= opt.dense_limit) {
      const Matrix a = Matrix::Identity(pair.n(), pair.n()) - pair.s2_star * pair.s1_star;
      const double rcond = Eigen::PartialPivLU<Matrix>(a).rcond();
      os << "reciprocal condition estimate of (I - S2* S1*) = " << rcond << ". ";
    }
    if (gaps_ok) os << "gap conditions hold but the computed radius sits at fp noise of 1. ";
    c.notes += os.str();
  }
  return c;
}

}  // namespace addfit
