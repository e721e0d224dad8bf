#pragma once

// `addfit` command-line front end: fit, certify, simulate, bound.

#include "addfit/addfit.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace addfit::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kParseError = 2,
  kNonConvergence = 3,
  kNotCertified = 4,
  kSingular = 5,
};

struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string kernel = "gaussian";
  std::string bandwidth = "rate:0.2";
  std::string scale = "sd";
  std::string sweep = "gauss-seidel";
  std::string method = "iterative";
  double tol = 1e-10;
  int max_iter = -1;
  std::uint64_t seed = 1;
  long long replicates = 100;
  bool require_certificate = false;
  bool gap_only = false;
  std::string out;

  // simulation design, used when no --input is given
  std::optional<int> n;
  std::string design = "uniform";
  double rho = 0.0;
  double noise_sd = 0.1;
  double alpha = 0.0;
  std::string m1 = "sin";
  std::string m2 = "cubic";

  double h = 0.0;  // bound
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Json echo(const RunConfig& c) {
  Json j;
  j["subcommand"] = c.subcommand;
  if (!c.input.empty()) j["input"] = c.input;
  if (c.subcommand != "bound") {
    j["kernel"] = c.kernel;
    j["bandwidth"] = c.bandwidth;
    j["scale"] = c.scale;
  }
  if (c.subcommand == "fit") {
    j["method"] = c.method;
    j["sweep"] = c.sweep;
    j["tol"] = c.tol;
    j["max_iter"] = c.max_iter;
  }
  if (c.subcommand == "bound") {
    j["n"] = c.n.value_or(0);
    j["h"] = c.h;
    return j;
  }
  if (c.n) {
    j["n"] = *c.n;
    j["design"] = c.design;
    if (c.design == "normal") j["rho"] = c.rho;
    j["noise_sd"] = c.noise_sd;
    j["alpha"] = c.alpha;
    j["m1"] = c.m1;
    j["m2"] = c.m2;
    j["seed"] = c.seed;
  }
  if (c.subcommand == "simulate") {
    j["replicates"] = c.replicates;
    j["gap_only"] = c.gap_only;
  }
  j["require_certificate"] = c.require_certificate;
  return j;
}

inline Json envelope(const RunConfig& c, Json result) {
  Json j;
  j["tool"] = "addfit";
  j["version"] = kVersion;
  j["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                       std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  j["config"] = echo(c);
  j["result"] = std::move(result);
  return j;
}

inline SimSpec sim_spec(const RunConfig& c) {
  SimSpec s;
  s.n = *c.n;
  s.m1 = parse_component(c.m1);
  s.m2 = parse_component(c.m2);
  if (c.design == "uniform")
    s.design = UniformDesign{};
  else if (c.design == "normal")
    s.design = NormalDesign{0.0, 0.0, 1.0, 1.0, c.rho};
  else
    throw UsageError("unknown design '" + c.design + "'");
  s.noise_sd = c.noise_sd;
  s.alpha = c.alpha;
  s.seed = c.seed;
  validate(s);
  return s;
}

inline Dataset load_data(const RunConfig& c) {
  if (c.input.empty() == !c.n.has_value())
    throw UsageError("give exactly one input source: --input <csv> or --n <size>");
  if (c.n) return generate(sim_spec(c));
  std::ifstream in(c.input);
  if (!in) throw UsageError("cannot open input '" + c.input + "'");
  return read_dataset_csv(in);
}

inline bool scale_by_sd(const RunConfig& c) {
  if (c.scale == "sd") return true;
  if (c.scale == "none") return false;
  throw UsageError("--scale must be 'sd' or 'none'");
}

/// Parses `<float>`, `rate:<delta>` or `knn:<k>` against one coordinate.
inline BandwidthSpec parse_bandwidth(const std::string& text, const Vector& x, bool by_sd) {
  try {
    if (text.rfind("rate:", 0) == 0) {
      const double delta = std::stod(text.substr(5));
      if (!(delta > 0.0 && delta < 1.0)) throw UsageError("rate exponent must lie in (0, 1)");
      return rate_bandwidth(x, delta, by_sd);
    }
    if (text.rfind("knn:", 0) == 0) return KNearestBandwidth{std::stoi(text.substr(4))};
    std::size_t used = 0;
    const double h = std::stod(text, &used);
    if (used != text.size() || !(h > 0.0)) throw UsageError("bad bandwidth '" + text + "'");
    return ConstantBandwidth{h};
  } catch (const std::logic_error&) {
    throw UsageError("bad bandwidth '" + text + "'");
  }
}

inline BandwidthRule parse_rule(const std::string& text, bool by_sd) {
  try {
    if (text.rfind("rate:", 0) == 0) {
      const double delta = std::stod(text.substr(5));
      if (!(delta > 0.0 && delta < 1.0)) throw UsageError("rate exponent must lie in (0, 1)");
      return BandwidthRule{1.0, delta, 0.0, by_sd};
    }
    std::size_t used = 0;
    const double h = std::stod(text, &used);
    if (used != text.size() || !(h > 0.0)) throw UsageError("bad bandwidth '" + text + "'");
    return BandwidthRule{h, 0.0, 0.0, false};
  } catch (const std::logic_error&) {
    throw UsageError("simulate accepts --bandwidth <float> or rate:<delta>");
  }
}

inline void write_file(const RunConfig& c, const std::string& name, const std::string& body) {
  if (c.out.empty()) return;
  std::filesystem::create_directories(c.out);
  std::ofstream f(std::filesystem::path(c.out) / name, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + name);
  f << body;
}

struct Smoothing {
  KernelSpec kernel;
  BandwidthSpec bw_u, bw_v;
};

inline Smoothing smoothing(const RunConfig& c, const Dataset& d) {
  Smoothing s;
  try {
    s.kernel.shape = parse_kernel_shape(c.kernel);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const bool by_sd = scale_by_sd(c);
  s.bw_u = parse_bandwidth(c.bandwidth, d.u(), by_sd);
  s.bw_v = parse_bandwidth(c.bandwidth, d.v(), by_sd);
  return s;
}

inline int run_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Dataset data = load_data(c);
  const auto s = smoothing(c, data);
  const SmootherPair pair = build_pair(data, s.kernel, s.bw_u, s.bw_v);
  if (c.require_certificate) {
    const auto cert = certify(pair, s.kernel, s.bw_u, s.bw_v, data);
    if (!cert.certified()) {
      err << "not certified: " << cert.notes << '\n';
      return kNotCertified;
    }
  }
  FitResult fit;
  if (c.method == "direct") {
    fit = backfit_direct(pair, data.y());
  } else if (c.method == "iterative") {
    IterativeOptions opt;
    opt.tol = c.tol;
    opt.max_iter = c.max_iter;
    opt.sweep = parse_sweep(c.sweep);
    fit = backfit_iterative(pair, data.y(), opt);
  } else {
    throw UsageError("--method must be 'iterative' or 'direct'");
  }
  const std::string report = envelope(c, to_json(fit)).dump(2) + "\n";
  std::ostringstream curves;
  write_curves_csv(curves, data, fit);
  write_file(c, "fit.json", report);
  write_file(c, "curves.csv", curves.str());
  out << report;
  return kOk;
}

inline int run_certify(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Dataset data = load_data(c);
  const auto s = smoothing(c, data);
  const SmootherPair pair = build_pair(data, s.kernel, s.bw_u, s.bw_v);
  const auto cert = certify(pair, s.kernel, s.bw_u, s.bw_v, data);
  const std::string report = envelope(c, to_json(cert)).dump(2) + "\n";
  write_file(c, "certificate.json", report);
  out << report;
  if (c.require_certificate && !cert.certified()) {
    err << "not certified: " << cert.notes << '\n';
    return kNotCertified;
  }
  return kOk;
}

inline int run_simulate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (!c.input.empty()) throw UsageError("simulate does not take --input");
  if (!c.n) throw UsageError("simulate needs --n");
  if (c.replicates < 1) throw UsageError("--replicates must be >= 1");
  const SimSpec spec = sim_spec(c);
  KernelSpec kernel;
  try {
    kernel.shape = parse_kernel_shape(c.kernel);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto rule = parse_rule(c.bandwidth, scale_by_sd(c));
  MonteCarloOptions opt;
  opt.certify = !c.gap_only;
  const auto rep = run_monte_carlo(spec, rule, rule, kernel, c.replicates, opt);
  const std::string report = envelope(c, to_json(rep)).dump(2) + "\n";
  std::ostringstream rows;
  write_replicates_csv(rows, rep);
  write_file(c, "montecarlo.json", report);
  write_file(c, "replicates.csv", rows.str());
  out << report;
  if (c.require_certificate && rep.fraction_certified && *rep.fraction_certified < 1.0) {
    err << "not every replicate was certified\n";
    return kNotCertified;
  }
  return kOk;
}

inline int run_bound(const RunConfig& c, std::ostream& out) {
  if (!c.n) throw UsageError("bound needs --n");
  const auto b = gap_exceedance_bound(*c.n, c.h);
  Json r = to_json(b);
  const std::string report = envelope(c, std::move(r)).dump(2) + "\n";
  write_file(c, "bound.json", report);
  out << report;
  return kOk;
}

inline void add_common(CLI::App* sub, RunConfig& c, bool data_flags) {
  sub->add_option("--out", c.out, "Directory for report files");
  if (!data_flags) return;
  sub->add_option("--input", c.input, "CSV with header y,u,v");
  sub->add_option("--kernel", c.kernel, "uniform|epanechnikov|triangular|gaussian")
      ->capture_default_str();
  sub->add_option("--bandwidth", c.bandwidth, "<float>|rate:<delta>|knn:<k>")
      ->capture_default_str();
  sub->add_option("--scale", c.scale, "Scale rate bandwidths by the sample sd (sd|none)")
      ->capture_default_str();
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_flag("--require-certificate", c.require_certificate,
                "Fail with exit code 4 unless convergence is certified");
  sub->add_option("--n", c.n, "Simulate a dataset of this size instead of --input");
  sub->add_option("--design", c.design, "uniform|normal")->capture_default_str();
  sub->add_option("--rho", c.rho, "Correlation of the normal design")->capture_default_str();
  sub->add_option("--noise-sd", c.noise_sd, "Noise standard deviation")->capture_default_str();
  sub->add_option("--alpha", c.alpha, "Intercept")->capture_default_str();
  sub->add_option("--m1", c.m1, "zero|identity|sin|cubic")->capture_default_str();
  sub->add_option("--m2", c.m2, "zero|identity|sin|cubic")->capture_default_str();
}

/// Entry point; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bivariate additive models by kernel backfitting, with convergence certificates"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  RunConfig c;

  auto* fit = app.add_subcommand("fit", "Fit the additive model");
  add_common(fit, c, true);
  fit->add_option("--tol", c.tol, "Iteration tolerance")->capture_default_str();
  fit->add_option("--max-iter", c.max_iter, "Iteration cap (-1: 10 n + 1000)")
      ->capture_default_str();
  fit->add_option("--sweep", c.sweep, "gauss-seidel|jacobi")->capture_default_str();
  fit->add_option("--method", c.method, "iterative|direct")->capture_default_str();

  auto* cert = app.add_subcommand("certify", "Certify convergence of backfitting");
  add_common(cert, c, true);

  auto* sim = app.add_subcommand("simulate", "Monte Carlo over simulated datasets");
  add_common(sim, c, true);
  sim->add_option("--replicates", c.replicates, "Number of replicates")->capture_default_str();
  sim->add_flag("--gap-only", c.gap_only, "Skip spectral certification");

  auto* bound = app.add_subcommand("bound", "Analytic bounds on P(max uniform spacing >= h)");
  add_common(bound, c, false);
  bound->set_help_flag("--help", "Print this help message and exit");
  bound->add_option("--n", c.n, "Sample size")->required();
  bound->add_option("--h", c.h, "Bandwidth")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kParseError;
  }
  if (fit->parsed()) c.subcommand = "fit";
  if (cert->parsed()) c.subcommand = "certify";
  if (sim->parsed()) c.subcommand = "simulate";
  if (bound->parsed()) c.subcommand = "bound";

  try {
    if (c.subcommand == "fit") return run_fit(c, out, err);
    if (c.subcommand == "certify") return run_certify(c, out, err);
    if (c.subcommand == "simulate") return run_simulate(c, out, err);
    return run_bound(c, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kParseError;
  } catch (const CsvError& e) {
    err << "error: " << c.input << ": " << e.what() << '\n';
    return kParseError;
  } catch (const NonConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const SingularSystemError& e) {
    err << "error: " << e.what() << '\n';
    return kSingular;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kParseError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace addfit::cli
