#pragma once

// Synthetic additive-model data, spacing statistics and the Monte Carlo
// harness for probabilistic convergence of backfitting.

#include "addfit/backfit.hpp"
#include "addfit/kernel.hpp"
#include "addfit/smoother.hpp"
#include "addfit/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace addfit {

enum class ComponentFn { Zero, Identity, Sin, Cubic };

inline double apply(ComponentFn f, double x) {
  switch (f) {
    case ComponentFn::Zero: return 0.0;
    case ComponentFn::Identity: return x;
    case ComponentFn::Sin: return std::sin(2.0 * std::numbers::pi * x);
    case ComponentFn::Cubic: return x * x * x;
  }
  return 0.0;
}

inline std::string_view to_string(ComponentFn f) {
  switch (f) {
    case ComponentFn::Zero: return "zero";
    case ComponentFn::Identity: return "identity";
    case ComponentFn::Sin: return "sin";
    case ComponentFn::Cubic: return "cubic";
  }
  return "?";
}

inline ComponentFn parse_component(std::string_view s) {
  if (s == "zero") return ComponentFn::Zero;
  if (s == "identity") return ComponentFn::Identity;
  if (s == "sin") return ComponentFn::Sin;
  if (s == "cubic") return ComponentFn::Cubic;
  throw std::invalid_argument("unknown component function '" + std::string(s) + "'");
}

/// U ~ Uniform(u_lo, u_hi) independent of V ~ Uniform(v_lo, v_hi).
struct UniformDesign {
  double u_lo = 0.0, u_hi = 1.0;
  double v_lo = 0.0, v_hi = 1.0;
};

/// (U, V) bivariate normal.
struct NormalDesign {
  double mean_u = 0.0, mean_v = 0.0;
  double sd_u = 1.0, sd_v = 1.0;
  double rho = 0.0;
};

using Design = std::variant<UniformDesign, NormalDesign>;

struct SimSpec {
  int n = 200;
  ComponentFn m1 = ComponentFn::Sin;
  ComponentFn m2 = ComponentFn::Cubic;
  Design design = UniformDesign{};
  double noise_sd = 0.1;
  double alpha = 0.0;
  std::uint64_t seed = 1;
};

inline void validate(const SimSpec& s) {
  if (s.n < 2) throw std::domain_error("simulation needs n >= 2");
  if (!(s.noise_sd >= 0.0)) throw std::domain_error("noise sd must be >= 0");
  if (const auto* u = std::get_if<UniformDesign>(&s.design)) {
    if (!(u->u_hi > u->u_lo && u->v_hi > u->v_lo))
      throw std::domain_error("uniform design needs lo < hi");
  } else {
    const auto& d = std::get<NormalDesign>(s.design);
    if (!(std::abs(d.rho) < 1.0)) throw std::domain_error("normal design needs |rho| < 1");
    if (!(d.sd_u > 0.0 && d.sd_v > 0.0)) throw std::domain_error("normal design needs sd > 0");
  }
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of replicate r: splitmix64(seed ^ splitmix64(r)). Depends only on
/// (seed, r), so any replicate can be regenerated on its own.
inline std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t r) {
  return splitmix64(seed ^ splitmix64(r));
}

/// Draws n observations; the component values are centered in-sample.
inline Dataset generate(const SimSpec& spec) {
  validate(spec);
  const Eigen::Index n = spec.n;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector u(n), v(n), eps(n);

  if (const auto* d = std::get_if<UniformDesign>(&spec.design)) {
    std::uniform_real_distribution<double> du(d->u_lo, d->u_hi), dv(d->v_lo, d->v_hi);
    for (Eigen::Index i = 0; i < n; ++i) {
      u[i] = du(rng);
      v[i] = dv(rng);
    }
  } else {
    const auto& g = std::get<NormalDesign>(spec.design);
    const double c = std::sqrt(1.0 - g.rho * g.rho);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z1 = normal(rng);
      const double z2 = normal(rng);
      u[i] = g.mean_u + g.sd_u * z1;
      v[i] = g.mean_v + g.sd_v * (g.rho * z1 + c * z2);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) eps[i] = spec.noise_sd * normal(rng);

  Vector g1 = u.unaryExpr([&](double x) { return apply(spec.m1, x); });
  Vector g2 = v.unaryExpr([&](double x) { return apply(spec.m2, x); });
  g1.array() -= g1.mean();
  g2.array() -= g2.mean();
  Vector y = (g1 + g2 + eps).array() + spec.alpha;
  return Dataset(std::move(y), std::move(u), std::move(v));
}

/// Largest spacing between consecutive order statistics.
inline double max_gap(const Vector& x) {
  if (x.size() < 2) throw std::invalid_argument("max_gap needs n >= 2");
  std::vector<double> s(x.data(), x.data() + x.size());
  std::sort(s.begin(), s.end());
  double g = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) g = std::max(g, s[i] - s[i - 1]);
  return g;
}

struct GapBound {
  double exact = 0.0;        // n (1 - h)^(n-1), 0 for h >= 1
  double exponential = 0.0;  // n exp(-(n - 1) h / 2)
};

/// Union bounds on P(max spacing of n Uniform(0,1) draws >= h).
inline GapBound gap_exceedance_bound(long long n, double h) {
  if (n < 2) throw std::domain_error("bound needs n >= 2");
  if (!(h > 0.0)) throw std::domain_error("bound needs h > 0");
  const double nn = static_cast<double>(n);
  GapBound b;
  b.exact = h >= 1.0 ? 0.0 : nn * std::exp((nn - 1.0) * std::log1p(-h));
  b.exponential = nn * std::exp(-(nn - 1.0) * h / 2.0);
  return b;
}

struct ExceedanceEstimate {
  long long exceed = 0;
  long long replicates = 0;
  double frequency = 0.0;
  double std_error = 0.0;  // binomial, at the empirical frequency
};

/// Fraction of replicates whose n Uniform(0,1) draws have max spacing >= h.
inline ExceedanceEstimate empirical_gap_exceedance(int n, double h, long long replicates,
                                                   std::uint64_t seed) {
  if (n < 2 || replicates < 1) throw std::domain_error("need n >= 2 and replicates >= 1");
  ExceedanceEstimate e;
  e.replicates = replicates;
  Vector x(n);
  for (long long r = 0; r < replicates; ++r) {
    std::mt19937_64 rng(replicate_seed(seed, static_cast<std::uint64_t>(r)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < n; ++i) x[i] = unif(rng);
    if (max_gap(x) >= h) ++e.exceed;
  }
  e.frequency = static_cast<double>(e.exceed) / static_cast<double>(replicates);
  e.std_error = std::sqrt(e.frequency * (1.0 - e.frequency) / static_cast<double>(replicates));
  return e;
}

/// h(n) = coef * n^-delta * (log n)^log_power, times the sample sd of the
/// coordinate when scale_by_sd is set.
struct BandwidthRule {
  double coef = 1.0;
  double delta = 0.2;
  double log_power = 0.0;
  bool scale_by_sd = false;

  double base(Eigen::Index n) const {
    const double nn = static_cast<double>(n);
    return coef * std::pow(nn, -delta) * std::pow(std::log(nn), log_power);
  }
  double operator()(const Vector& x) const {
    return base(x.size()) * (scale_by_sd ? sample_sd(x) : 1.0);
  }
  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << coef << " * n^-" << delta;
    if (log_power != 0.0) os << " * log(n)^" << log_power;
    if (scale_by_sd) os << " * sd";
    return os.str();
  }
};

struct MonteCarloOptions {
  bool certify = true;
  CertifyOptions certify_opts{SpectralMethod::PowerIteration, 2000, {}};
  unsigned threads = 0;  // 0: hardware concurrency
};

struct ReplicateRow {
  long long replicate = 0;
  double max_gap_u = 0.0, max_gap_v = 0.0;
  double h_u = 0.0, h_v = 0.0;
  bool gap_ok = false;
  std::optional<Verdict> verdict;
  std::optional<double> rho_product;

  bool certified() const { return verdict && *verdict != Verdict::NotCertified; }
};

struct MonteCarloReport {
  long long replicates = 0;
  int n = 0;
  std::string bandwidth_rule;
  KernelShape kernel = KernelShape::Gaussian;
  double fraction_gap_ok = 0.0;  // h > max gap and h' > max gap'
  std::optional<double> fraction_certified;
  std::optional<double> fraction_gap_certified;  // verdict from the gap conditions
  std::optional<double> analytic_bound;          // uniform designs only
  double mean_max_gap_u = 0.0, mean_max_gap_v = 0.0;
  std::vector<ReplicateRow> rows;
};

inline ReplicateRow run_replicate(const SimSpec& base, const BandwidthRule& rule_u,
                                  const BandwidthRule& rule_v, const KernelSpec& kernel,
                                  long long r, const MonteCarloOptions& opt) {
  SimSpec spec = base;
  spec.seed = replicate_seed(base.seed, static_cast<std::uint64_t>(r));
  const Dataset data = generate(spec);
  ReplicateRow row;
  row.replicate = r;
  row.max_gap_u = max_gap(data.u());
  row.max_gap_v = max_gap(data.v());
  row.h_u = rule_u(data.u());
  row.h_v = rule_v(data.v());
  row.gap_ok = row.h_u > row.max_gap_u && row.h_v > row.max_gap_v;
  if (opt.certify) {
    const ConstantBandwidth bu{row.h_u}, bv{row.h_v};
    const SmootherPair pair = build_pair(data, kernel, bu, bv);
    const auto cert = certify(pair, kernel, bu, bv, data, opt.certify_opts);
    row.verdict = cert.verdict;
    row.rho_product = cert.spectral.rho_product;
  }
  return row;
}

/// Per replicate: generate, compare each bandwidth with the coordinate's max
/// spacing, and (optionally) run the full certificate. Rows are stored by
/// replicate index, so the report does not depend on thread scheduling.
inline MonteCarloReport run_monte_carlo(const SimSpec& spec, const BandwidthRule& rule_u,
                                        const BandwidthRule& rule_v, const KernelSpec& kernel,
                                        long long replicates,
                                        const MonteCarloOptions& opt = {}) {
  validate(spec);
  if (replicates < 1) throw std::domain_error("need at least one replicate");

  MonteCarloReport rep;
  rep.replicates = replicates;
  rep.n = spec.n;
  rep.kernel = kernel.shape;
  rep.bandwidth_rule = "u: " + rule_u.describe() + "; v: " + rule_v.describe();
  rep.rows.resize(static_cast<std::size_t>(replicates));

  unsigned threads = opt.threads ? opt.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(replicates)));
  std::atomic<long long> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (long long r = next++; r < replicates; r = next++) {
      try {
        rep.rows[static_cast<std::size_t>(r)] = run_replicate(spec, rule_u, rule_v, kernel, r, opt);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  const double total = static_cast<double>(replicates);
  long long gap_ok = 0, cert = 0, gap_cert = 0;
  for (const auto& row : rep.rows) {
    gap_ok += row.gap_ok;
    cert += row.certified();
    gap_cert += row.verdict == Verdict::CertifiedByGapConditions;
    rep.mean_max_gap_u += row.max_gap_u / total;
    rep.mean_max_gap_v += row.max_gap_v / total;
  }
  rep.fraction_gap_ok = static_cast<double>(gap_ok) / total;
  if (opt.certify) {
    rep.fraction_certified = static_cast<double>(cert) / total;
    rep.fraction_gap_certified = static_cast<double>(gap_cert) / total;
  }
  if (const auto* d = std::get_if<UniformDesign>(&spec.design);
      d && !rule_u.scale_by_sd && !rule_v.scale_by_sd) {
    // Spacings scale with the interval length.
    rep.analytic_bound =
        std::min(1.0, gap_exceedance_bound(spec.n, rule_u.base(spec.n) / (d->u_hi - d->u_lo)).exact +
                          gap_exceedance_bound(spec.n, rule_v.base(spec.n) / (d->v_hi - d->v_lo)).exact);
  }
  return rep;
}

struct Grid {
  double u_lo = -4.0, u_hi = 4.0;
  double v_lo = -4.0, v_hi = 4.0;
  double step = 0.01;
};

/// sup over the grid of |f(u,v) / (f1(u) f2(v)) - 1| for a bivariate normal.
inline double or_density_ratio(const NormalDesign& d, const Grid& g) {
  if (!(std::abs(d.rho) < 1.0)) throw std::domain_error("density ratio needs |rho| < 1");
  if (!(g.step > 0.0) || g.u_hi < g.u_lo || g.v_hi < g.v_lo)
    throw std::domain_error("invalid grid");
  const double r = d.rho;
  const double one_m_r2 = 1.0 - r * r;
  const double norm = 1.0 / std::sqrt(one_m_r2);
  const auto nu = static_cast<long long>(std::floor((g.u_hi - g.u_lo) / g.step + 1e-9));
  const auto nv = static_cast<long long>(std::floor((g.v_hi - g.v_lo) / g.step + 1e-9));
  double sup = 0.0;
  for (long long i = 0; i <= nu; ++i) {
    const double a = (g.u_lo + static_cast<double>(i) * g.step - d.mean_u) / d.sd_u;
    for (long long j = 0; j <= nv; ++j) {
      const double b = (g.v_lo + static_cast<double>(j) * g.step - d.mean_v) / d.sd_v;
      const double marg = a * a + b * b;
      const double joint = (marg - 2.0 * r * a * b) / one_m_r2;
      const double ratio = norm * std::exp(0.5 * (marg - joint));
      sup = std::max(sup, std::abs(ratio - 1.0));
    }
  }
  return sup;
}

}  // namespace addfit
