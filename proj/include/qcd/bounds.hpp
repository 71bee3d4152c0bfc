#pragma once

// Closed-form bound calculators: finite-size AEP, the adaptive-to-parallel
// bounds and their channel-level constants, and second-order asymptotics.

#include "qcd/adaptive.hpp"
#include "qcd/divergences.hpp"
#include "qcd/hypothesis.hpp"
#include "qcd/linalg.hpp"
#include "qcd/random.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace qcd {

inline const double kLog3 = std::log2(3.0);
inline constexpr double kBerryEsseen = 0.4784;

struct BoundConstants {
  double K = 0.0;
  double K1 = 0.0;
  double K2 = 0.0;
};

inline BoundConstants bound_constants() {
  const double ln2 = std::log(2.0), ch = std::cosh(kLog3 / 2);
  return {ln2 * kLog3 * kLog3 / 8 * ch, 2 * std::sqrt(2 * ln2 * ch), 2 * std::sqrt(2 * ln2)};
}

/// Standard normal quantile.
inline double normal_quantile(double p) {
  if (!(p > 0 && p < 1)) throw std::domain_error("normal_quantile: p outside (0,1)");
  return -std::sqrt(2.0) * boost::math::erfc_inv(2 * p);
}

// ---------------------------------------------------------------------------
// State-level inequalities

/// Weak converse (D + h(eps)) / (1 - eps).
inline double lemma1_bound(double d, double eps) {
  if (!(eps >= 0 && eps < 1)) throw std::invalid_argument("lemma1_bound: eps outside [0,1)");
  return (d + binary_entropy(eps)) / (1 - eps);
}

struct Sandwich {
  double lower = 0.0;
  double mid = 0.0;
  double upper = 0.0;
};

/// Hypothesis-testing bounds around the smoothed max-divergence at eps.
inline Sandwich lemma2_sandwich(const DensityMatrix& rho, const DensityMatrix& sigma, double eps, double delta,
                                const HypothesisOptions& opt = {}) {
  if (!(eps > 0 && eps < 1)) throw std::invalid_argument("lemma2_sandwich: eps outside (0,1)");
  const double s = 1 - eps * eps;
  if (!(delta > 0 && delta < s)) throw std::invalid_argument("lemma2_sandwich: delta outside (0, 1 - eps^2)");
  Sandwich w;
  w.lower = dh_state(rho, sigma, s - delta, opt).dh - std::log2(4 * s / (delta * delta));
  w.mid = dmax_smoothed(rho, sigma, eps, {opt.spectral, opt.solver}).value;
  w.upper = dh_state(rho, sigma, s, opt).dh - std::log2(s);
  return w;
}

struct Lemma13Check {
  double c = 0.0;
  double upper_gap = 0.0;  // D + ln2 delta c^2 - D_{1+delta}
  double lower_gap = 0.0;  // D_{1-delta} - lower estimate
  bool cosh_constant = true;  // lower estimate uses the cosh(log 3 / 2) constant
};

/// Slacks of the Renyi continuity bounds around D. When delta exceeds
/// log 3 / (2c) the lower estimate keeps the cosh(ln2 delta c) factor.
inline Lemma13Check lemma13_check(const DensityMatrix& rho, const DensityMatrix& sigma, double gamma, double delta,
                                  const SpectralOptions& opt = {}) {
  if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("lemma13_check: gamma outside (0,1]");
  if (!(delta > 0 && delta <= gamma / 2)) throw std::invalid_argument("lemma13_check: delta outside (0, gamma/2]");
  const PositiveOperator s(sigma);
  Lemma13Check r;
  r.c = c_gamma(gamma, rho, s, opt);
  if (r.c == kInf) throw std::domain_error("lemma13_check: support of rho not contained in support of sigma");
  const double ln2 = std::log(2.0), d = relative_entropy(rho, s, opt);
  r.upper_gap = d + ln2 * delta * r.c * r.c - petz_renyi(1 + delta, rho, s, opt);
  r.cosh_constant = delta <= kLog3 / (2 * r.c);
  const double factor = r.cosh_constant ? std::cosh(kLog3 / 2) : std::cosh(ln2 * delta * r.c);
  r.lower_gap = petz_renyi(1 - delta, rho, s, opt) - (d - ln2 * factor * delta * r.c * r.c);
  return r;
}

struct AepBounds {
  double c = 0.0;
  double D = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::optional<double> lower_tight;
  std::optional<double> upper_tight;
};

/// Finite-n bracket for (1/n) D_max^eps(rho^n || sigma^n).
inline AepBounds aep_bounds(const DensityMatrix& rho, const DensityMatrix& sigma, int n, double eps, double gamma,
                            const SpectralOptions& opt = {}) {
  if (n < 1) throw std::invalid_argument("aep_bounds: n must be positive");
  if (!(eps > 0 && eps < 1)) throw std::invalid_argument("aep_bounds: eps outside (0,1)");
  const PositiveOperator s(sigma);
  const auto k = bound_constants();
  AepBounds b;
  b.c = c_gamma(gamma, rho, s, opt);
  b.D = relative_entropy(rho, s, opt);
  if (b.c == kInf) {
    b.lower = -kInf;
    b.upper = kInf;
    return b;
  }
  const double rn = std::sqrt(static_cast<double>(n)), tail = std::log2(1 / (1 - eps * eps)) / n;
  b.lower = b.D - 4 * b.c / rn * std::log2(2 / (1 - eps));
  b.upper = b.D + 4 * b.c / rn * std::log2(2 / eps) + tail;
  const double l1 = std::log2(1 / (1 - eps)), l2 = std::log2(1 / eps);
  if (n >= l1 * std::pow(8 / (kLog3 * k.K1), 2)) b.lower_tight = b.D - k.K1 * b.c / rn * std::sqrt(l1);
  if (n >= l2 * std::pow(8 / (gamma * b.c * k.K2), 2)) b.upper_tight = b.D + k.K2 * b.c / rn * std::sqrt(l2) + tail;
  return b;
}

// ---------------------------------------------------------------------------
// Channel-level constants

/// Geometric Renyi-2 channel divergence log lambda_max(Tr_B Gamma_E Gamma_F^{-1} Gamma_E);
/// +inf when supp Gamma_E is not inside supp Gamma_F.
inline double channel_geometric_d2(const Channel& e, const Channel& f, const SpectralOptions& opt = {}) {
  if (e.dim_in() != f.dim_in() || e.dim_out() != f.dim_out())
    throw std::invalid_argument("channel_geometric_d2: dimension mismatch");
  const CMatrix& ge = e.choi().matrix();
  const CMatrix& gf = f.choi().matrix();
  Spectrum s = eigh(gf);
  const auto keep = retained(s.values, opt.cutoff);
  CMatrix inv = CMatrix::Zero(gf.rows(), gf.cols());
  CMatrix proj = CMatrix::Zero(gf.rows(), gf.cols());
  for (auto k : keep) {
    const CVector v = s.vectors.col(static_cast<Index>(k));
    inv += v * v.adjoint() / s.values[static_cast<Index>(k)];
    proj += v * v.adjoint();
  }
  const double leak = (ge * (CMatrix::Identity(gf.rows(), gf.cols()) - proj)).trace().real();
  if (leak > opt.leak * static_cast<double>(e.dim_in())) return kInf;
  CMatrix m = partial_trace<Complex>(ge * inv * ge, {e.dim_in(), e.dim_out()}, {0});
  return std::log2(eigh((m + m.adjoint()) * 0.5).values.maxCoeff());
}

struct HeuristicOptions {
  int starts = 8;
  int steps = 60;
  std::uint64_t seed = 7;
  SpectralOptions spectral;
};

/// Lower estimate of the geometric channel divergence of order 1 + gamma by
/// hill climbing over pure inputs on R (x) A with R ~ A.
inline double channel_geometric_heuristic(const Channel& e, const Channel& f, double gamma,
                                          const HeuristicOptions& opt = {}) {
  const Index d = e.dim_in();
  Rng rng(opt.seed);
  auto value = [&](const CVector& psi) {
    DensityMatrix in = PureState(psi, {{"R", d}, {"A", d}}).density();
    return geometric_renyi(1 + gamma, apply_channel(e, in, "A"), PositiveOperator(apply_channel(f, in, "A")),
                           opt.spectral);
  };
  double best = -kInf;
  for (int s = 0; s < opt.starts; ++s) {
    CVector psi = random_pure(d * d, rng).amplitudes();
    double v = value(psi), step = 0.5;
    for (int k = 0; k < opt.steps && v < kInf; ++k) {
      CVector trial = psi + step * ginibre(d * d, 1, rng).col(0);
      trial /= trial.norm();
      const double tv = value(trial);
      if (tv > v) {
        psi = trial;
        v = tv;
      } else {
        step *= 0.85;
      }
    }
    best = std::max(best, v);
  }
  return best;
}

struct ChannelConstant {
  double gamma = 1.0;
  double value = 0.0;      // from the rigorous upper estimate of the channel divergence
  double heuristic = 0.0;  // from the hill-climbing lower estimate
  double dhat_upper = 0.0;
  double dhat_heuristic = 0.0;
};

inline double chat_formula(double gamma, double dhat) {
  if (dhat == kInf) return kInf;
  return std::log2(std::exp2(gamma * dhat) + 2) / gamma;
}

/// (1/gamma) log(2^{gamma D} + 2) with D the geometric channel divergence of
/// order 1 + gamma. The reported value uses the order-2 closed form, an upper
/// estimate for every gamma in (0,1] and exact at gamma = 1.
inline ChannelConstant chat_gamma(const Channel& e, const Channel& f, double gamma, const HeuristicOptions& opt = {}) {
  if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("chat_gamma: gamma outside (0,1]");
  ChannelConstant c;
  c.gamma = gamma;
  c.dhat_upper = channel_geometric_d2(e, f, opt.spectral);
  c.value = chat_formula(gamma, c.dhat_upper);
  if (c.value == kInf) {
    c.heuristic = c.dhat_heuristic = kInf;
    return c;
  }
  c.dhat_heuristic = std::min(channel_geometric_heuristic(e, f, gamma, opt), c.dhat_upper);
  c.heuristic = chat_formula(gamma, c.dhat_heuristic);
  return c;
}

struct GammaInfimum {
  double gamma = 1.0;
  double value = kInf;
};

/// Minimum over gamma in [lo, 1]: log-spaced grid, then golden section around
/// the best grid point.
inline GammaInfimum gamma_infimum(const std::function<double(double)>& f, int grid = 40, double lo = 1e-3,
                                  double tol = 1e-6) {
  std::vector<double> g(static_cast<std::size_t>(grid));
  GammaInfimum best;
  std::size_t at = 0;
  for (int k = 0; k < grid; ++k) {
    g[static_cast<std::size_t>(k)] = lo * std::pow(1 / lo, static_cast<double>(k) / (grid - 1));
    const double v = f(g[static_cast<std::size_t>(k)]);
    if (v < best.value) {
      best = {g[static_cast<std::size_t>(k)], v};
      at = static_cast<std::size_t>(k);
    }
  }
  if (best.value == kInf) return best;
  double a = g[at == 0 ? 0 : at - 1], b = g[std::min(at + 1, g.size() - 1)];
  const double r = (std::sqrt(5.0) - 1) / 2;
  double x1 = b - r * (b - a), x2 = a + r * (b - a), f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  for (auto [x, v] : {std::pair{x1, f1}, std::pair{x2, f2}})
    if (v < best.value) best = {x, v};
  return best;
}

// ---------------------------------------------------------------------------
// Adaptive versus parallel

struct BoundReport {
  std::size_t ell = 1;
  double c_ell = 0.0;
  double c_prime_ell = 0.0;
  std::pair<double, double> gamma_star{1.0, 1.0};
  double rhs_eq31 = 0.0;
  std::optional<double> rhs_eq39;
  double rhs_eq28 = 0.0;
  bool condition_eq38 = false;
  double C_corollary = 0.0;
  double chat_inf = 0.0;
  double cap_c_prime = 0.0;  // 8 ell / log 3 * inf chat
  double cap_c = 0.0;        // ell (K1 + K2) * inf chat
  double channel_dmax = 0.0;
  double channel_d2 = 0.0;
};

struct BoundOptions {
  SpectralOptions spectral;
  HeuristicOptions heuristic;
};

/// Sample-size threshold above which the square-root form of the bound applies.
inline double eq38_threshold(double alpha_p) {
  return std::log2(4 / alpha_p) * std::pow(4 / (kLog3 * std::sqrt(2 * std::log(2.0))), 2);
}

inline double corollary4_constant(double d2) { return 7 * std::log2(std::exp2(d2) + 2); }

/// -(1-alpha_a)/n log beta_a - C n / sqrt(m) log(8/alpha_p) - 1/n.
inline double corollary4_rhs(int n, double m, double alpha_p, double alpha_a, double dh_adaptive, double c) {
  if (n < 1 || !(m >= 1)) throw std::invalid_argument("corollary4_rhs: n and m must be positive");
  if (!(alpha_p > 0 && alpha_p <= 1) || !(alpha_a >= 0 && alpha_a <= 1))
    throw std::invalid_argument("corollary4_rhs: error probabilities out of range");
  return (1 - alpha_a) / n * dh_adaptive - c * n / std::sqrt(m) * std::log2(8 / alpha_p) - 1.0 / n;
}

/// Lower bounds on the parallel rate (1/m) D_H^{alpha_p} reachable from an
/// adaptive protocol whose final step has D_H^{alpha_a} = dh_adaptive.
/// Throws std::domain_error when D_max(E||F) is infinite.
inline BoundReport theorem7_rhs(const Channel& e, const Channel& f, const ProtocolTrace& t, double m, double alpha_p,
                                double alpha_a, double dh_adaptive, const BoundOptions& opt = {}) {
  if (!(m >= 1)) throw std::invalid_argument("theorem7_rhs: m must be at least 1");
  if (!(alpha_p > 0 && alpha_p <= 1)) throw std::invalid_argument("theorem7_rhs: alpha_p outside (0,1]");
  if (!(alpha_a >= 0 && alpha_a <= 1)) throw std::invalid_argument("theorem7_rhs: alpha_a outside [0,1]");
  BoundReport r;
  r.channel_dmax = channel_dmax(e, f, opt.spectral);
  if (r.channel_dmax == kInf)
    throw std::domain_error("theorem7_rhs: D_max(E||F) is infinite, no parallel bound applies");
  const auto k = bound_constants();
  const int n = t.n();
  r.ell = t.ell;
  const DensityMatrix& rl = t.rho.at(r.ell - 1);
  const PositiveOperator sl(t.sigma.at(r.ell - 1));
  const DensityMatrix& el = t.e_out.at(r.ell - 1);
  const PositiveOperator fl(t.f_out.at(r.ell - 1));
  auto out = gamma_infimum([&](double g) { return c_gamma(g, el, fl, opt.spectral); });
  auto in = gamma_infimum([&](double g) { return c_gamma(g, rl, sl, opt.spectral); });
  r.gamma_star = {out.gamma, in.gamma};
  r.c_prime_ell = 4 / kLog3 * (out.value + in.value);
  r.c_ell = k.K1 * out.value + k.K2 * in.value;

  const double rm = std::sqrt(m), lead = (1 - alpha_a) / n * dh_adaptive - binary_entropy(alpha_a) / n;
  const double tail = (std::log2(1 / alpha_p) - std::log2(1 - alpha_p / 4)) / m;
  if (r.c_ell == kInf) {
    r.rhs_eq31 = -kInf;
  } else {
    r.rhs_eq31 = lead - r.c_prime_ell / rm * (std::log2(4 / alpha_p) + k.K) - tail;
    r.condition_eq38 = m >= eq38_threshold(alpha_p);
    if (r.condition_eq38) r.rhs_eq39 = lead - r.c_ell / rm * std::sqrt(std::log2(4 / alpha_p)) - tail;
  }

  r.channel_d2 = channel_geometric_d2(e, f, opt.spectral);
  auto chat = gamma_infimum([&](double g) { return chat_formula(g, r.channel_d2); });
  r.chat_inf = chat.value;
  r.cap_c_prime = 8.0 * static_cast<double>(r.ell) / kLog3 * r.chat_inf;
  r.cap_c = static_cast<double>(r.ell) * (k.K1 + k.K2) * r.chat_inf;
  r.C_corollary = corollary4_constant(r.channel_d2 < kInf ? r.channel_d2 : r.channel_dmax);
  r.rhs_eq28 = corollary4_rhs(n, m, alpha_p, alpha_a, dh_adaptive, r.C_corollary);
  return r;
}

// ---------------------------------------------------------------------------
// Second order

struct SecondOrderResult {
  double lower = 0.0;
  double upper = 0.0;
  StatePairStats params;
  double C_berry = kBerryEsseen;
};

/// Berry-Esseen bracket for (1/m) D_H^alpha(rho^m || sigma^m); lower is -inf
/// and upper +inf when the quantile argument leaves (0,1).
inline SecondOrderResult second_order_dh(const DensityMatrix& rho, const DensityMatrix& sigma, double m, double alpha,
                                         const SpectralOptions& opt = {}) {
  if (!(m >= 1)) throw std::invalid_argument("second_order_dh: m must be at least 1");
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("second_order_dh: alpha outside (0,1)");
  SecondOrderResult r;
  r.params = state_pair_stats(rho, PositiveOperator(sigma), opt);
  const auto& p = r.params;
  if (p.V <= 1e-14 * std::max(1.0, p.D * p.D)) {
    r.lower = r.upper = p.D;
    return r;
  }
  const double rm = std::sqrt(m), width = std::sqrt(p.V / m), skew = p.T3 / std::pow(p.V, 1.5);
  const double lo = alpha - r.C_berry * skew / rm, hi = alpha + (r.C_berry * skew + 2) / rm;
  r.lower = lo > 0 ? p.D + width * normal_quantile(lo) : -kInf;
  r.upper = hi < 1 ? p.D + width * normal_quantile(hi) : kInf;
  return r;
}

}  // namespace qcd
