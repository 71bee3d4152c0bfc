#pragma once

// Hypothesis-testing relative entropy for states and for parallel channel uses.

#include "qcd/divergences.hpp"
#include "qcd/linalg.hpp"
#include "qcd/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcd {

struct TestResult {
  HermitianOperator pi;
  double alpha = 0.0;  // Tr((1 - pi) rho)
  double beta = 0.0;   // Tr(pi sigma)
  double dh = 0.0;     // -log beta, +inf when beta = 0
};

struct HypothesisOptions {
  SpectralOptions spectral;
  sdp::Options solver;
  /// Optimal values below this are reported as an exact zero.
  double zero_beta = 1e-12;
};

namespace detail {

inline TestResult certify(const CMatrix& pi_raw, const CMatrix& rho, const CMatrix& sigma, double zero_beta,
                          const SystemLayout& layout) {
  // clamp the spectrum into [0, 1] before evaluating the errors
  CMatrix pi = mat_func(pi_raw, [](double v) { return std::clamp(v, 0.0, 1.0); }, 0.0);
  TestResult r{HermitianOperator(pi, layout), 0.0, 0.0, 0.0};
  r.alpha = std::clamp(1.0 - (pi * rho).trace().real(), 0.0, 1.0);
  r.beta = std::clamp((pi * sigma).trace().real(), 0.0, 1.0);
  if (r.beta < zero_beta) r.beta = 0.0;
  r.dh = r.beta > 0 ? -std::log2(r.beta) : kInf;
  return r;
}

// Projector onto ker(sigma); the test supported there has zero type II error.
inline CMatrix kernel_projector(const CMatrix& sigma, double cutoff) {
  return CMatrix::Identity(sigma.rows(), sigma.cols()) - support_projector(sigma, cutoff);
}

}  // namespace detail

/// Optimal type II error at type I error at most eps, by semidefinite programming.
inline TestResult dh_state(const DensityMatrix& rho, const DensityMatrix& sigma, double eps,
                           const HypothesisOptions& opt = {}) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("dh_state: eps outside [0,1]");
  const Index d = rho.dim();
  if (sigma.dim() != d) throw std::invalid_argument("dh_state: dimension mismatch");
  const CMatrix& r = rho.matrix();
  const CMatrix& s = sigma.matrix();

  if (eps == 1.0) return detail::certify(CMatrix::Zero(d, d), r, s, opt.zero_beta, rho.layout());
  if (eps == 0.0) return detail::certify(support_projector(r, opt.spectral.cutoff), r, s, opt.zero_beta, rho.layout());

  CMatrix ker = detail::kernel_projector(s, opt.spectral.cutoff);
  if ((ker * r).trace().real() >= 1.0 - eps) return detail::certify(ker, r, s, opt.zero_beta, rho.layout());

  sdp::Problem prob;
  auto pi = prob.add_hermitian(d);
  sdp::AffineMatrix lower(d), upper(d);
  pi.add_to(lower, 1.0);
  upper.constant() = CMatrix::Identity(d, d);
  pi.add_to(upper, -1.0);
  prob.add_psd(std::move(lower));
  prob.add_psd(std::move(upper));
  auto accept = pi.trace_with(r);
  accept.constant = -(1.0 - eps);
  prob.add_nonneg(accept);
  prob.minimize(pi.trace_with(s));
  auto sol = prob.solve_or_throw(opt.solver, "dh_state");
  return detail::certify(pi.value(sol.y), r, s, opt.zero_beta, rho.layout());
}

/// Neyman-Pearson construction: threshold tests Pi_t = P_{>0}(rho - t sigma).
/// The acceptance Tr(Pi_t rho) is non-increasing in t; the threshold meeting
/// 1 - eps is bracketed by bisection on [0, lambda_max(sigma^{-1/2} rho sigma^{-1/2})]
/// and the two bracketing tests are mixed to hit the target exactly.
inline TestResult dh_neyman_pearson(const DensityMatrix& rho, const DensityMatrix& sigma, double eps,
                                    const HypothesisOptions& opt = {}) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("dh_neyman_pearson: eps outside [0,1]");
  const Index d = rho.dim();
  if (sigma.dim() != d) throw std::invalid_argument("dh_neyman_pearson: dimension mismatch");
  const CMatrix& r = rho.matrix();
  CMatrix s = sigma.matrix();
  RVector sv = eigh(s).values;
  if (sv.minCoeff() <= opt.spectral.cutoff * sv.maxCoeff()) {
    s += 1e-12 * CMatrix::Identity(d, d);
    s /= s.trace().real();
  }
  const double target = 1.0 - eps;
  if (target <= 0.0) return detail::certify(CMatrix::Zero(d, d), r, sigma.matrix(), opt.zero_beta, rho.layout());
  if (eps == 0.0)
    return detail::certify(support_projector(r, opt.spectral.cutoff), r, sigma.matrix(), opt.zero_beta, rho.layout());

  auto positive_part = [&](double t) {
    Spectrum pencil = eigh(r - t * s);
    CMatrix plus = CMatrix::Zero(d, d);
    for (Index k = 0; k < d; ++k)
      if (pencil.values[k] > 0) plus += pencil.vectors.col(k) * pencil.vectors.col(k).adjoint();
    return plus;
  };
  auto acceptance = [&](const CMatrix& pi) { return (pi * r).trace().real(); };

  CMatrix root_inv = mat_func(s, [](double v) { return 1.0 / std::sqrt(v); }, 0.0);
  double lo = 0.0, hi = eigh(root_inv * r * root_inv).values.maxCoeff() * (1 + 1e-12) + 1e-300;
  CMatrix p_lo = positive_part(lo), p_hi = positive_part(hi);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    CMatrix p_mid = positive_part(mid);
    if (acceptance(p_mid) >= target) {
      lo = mid;
      p_lo = std::move(p_mid);
    } else {
      hi = mid;
      p_hi = std::move(p_mid);
    }
  }
  const double a_lo = acceptance(p_lo), a_hi = acceptance(p_hi);
  const double lambda = a_lo > a_hi ? std::clamp((target - a_hi) / (a_lo - a_hi), 0.0, 1.0) : 1.0;
  return detail::certify(lambda * p_lo + (1 - lambda) * p_hi, r, sigma.matrix(), opt.zero_beta, rho.layout());
}

/// Max channel divergence evaluated on the normalized Choi states.
inline double channel_dmax(const Channel& e, const Channel& f, const SpectralOptions& opt = {}) {
  if (e.dim_in() != f.dim_in() || e.dim_out() != f.dim_out()) throw std::invalid_argument("channel_dmax: dimension mismatch");
  DensityMatrix je = DensityMatrix::project(e.choi_state()), jf = DensityMatrix::project(f.choi_state());
  return dmax(je, PositiveOperator(jf), opt);
}

struct ChannelTestResult {
  int n = 0;
  double value = 0.0;  // -log beta
  double beta = 0.0;
  double alpha_achieved = 0.0;
  DensityMatrix input_state;  // rho on R^n
  CMatrix omega;
  sdp::Solution solution;
};

struct ChannelTestOptions {
  sdp::Options solver;
  /// Upper limit on the number of entries of the test operator.
  Index cap = 4096;
  double zero_beta = 1e-12;
};

namespace detail {

// Gamma^{(x)n} in copy-major order (R1 B1 R2 B2 ...).
inline CMatrix choi_power(const Channel& ch, int n) { return kron_power<Complex>(ch.choi().matrix(), n); }

}  // namespace detail

/// Best parallel strategy with n uses: min Tr(Omega Gamma_F^n) subject to
/// Tr(Omega Gamma_E^n) >= 1 - eps and 0 <= Omega <= rho_{R^n} (x) 1_{B^n}.
inline ChannelTestResult channel_dh_parallel(const Channel& e, const Channel& f, int n, double eps,
                                             const ChannelTestOptions& opt = {}) {
  if (n < 1) throw std::invalid_argument("channel_dh_parallel: n must be positive");
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("channel_dh_parallel: eps outside [0,1)");
  if (e.dim_in() != f.dim_in() || e.dim_out() != f.dim_out())
    throw std::invalid_argument("channel_dh_parallel: dimension mismatch");
  const Index dr = e.dim_in(), db = e.dim_out();
  Index big = 1, rdim = 1;
  for (int k = 0; k < n; ++k) {
    big *= dr * db;
    rdim *= dr;
  }
  if (big * big > opt.cap)
    throw std::invalid_argument("channel_dh_parallel: test operator has " + std::to_string(big * big) +
                                " entries, above the cap of " + std::to_string(opt.cap) +
                                "; use the symmetry-reduced program");

  const CMatrix ge = detail::choi_power(e, n), gf = detail::choi_power(f, n);

  // copy-major index (r1 b1 r2 b2 ...) -> (R index, B index)
  std::vector<Index> r_of(big), b_of(big);
  for (Index x = 0; x < big; ++x) {
    Index rest = x, ri = 0, bi = 0, rmul = 1, bmul = 1;
    for (int k = n - 1; k >= 0; --k) {
      const Index b = rest % db;
      rest /= db;
      const Index rr = rest % dr;
      rest /= dr;
      ri += rr * rmul;
      bi += b * bmul;
      rmul *= dr;
      bmul *= db;
    }
    r_of[x] = ri;
    b_of[x] = bi;
  }

  sdp::Problem prob;
  auto omega = prob.add_hermitian(big);
  auto rho = prob.add_hermitian(rdim);

  sdp::AffineMatrix pos(big), dom(big);
  omega.add_to(pos, 1.0);
  omega.add_to(dom, -1.0);
  for (Index x = 0; x < big; ++x)
    for (Index y = 0; y < big; ++y) {
      if (b_of[x] != b_of[y]) continue;
      const Index a = r_of[x], c = r_of[y];
      if (a == c) dom.add_term(rho.diag(a), x, y, 1.0);
      else if (a < c) {
        dom.add_term(rho.re(a, c), x, y, 1.0);
        dom.add_term(rho.im(a, c), x, y, Complex(0, 1));
      } else {
        dom.add_term(rho.re(c, a), x, y, 1.0);
        dom.add_term(rho.im(c, a), x, y, Complex(0, -1));
      }
    }
  prob.add_psd(std::move(pos));
  prob.add_psd(std::move(dom));
  auto accept = omega.trace_with(ge);
  accept.constant = -(1.0 - eps);
  prob.add_nonneg(accept);
  auto tr = rho.trace_with(CMatrix::Identity(rdim, rdim));
  tr.constant = -1.0;
  prob.add_equality(tr);
  prob.minimize(omega.trace_with(gf));

  ChannelTestResult out;
  out.n = n;
  out.solution = prob.solve_or_throw(opt.solver, "channel_dh_parallel");
  out.omega = omega.value(out.solution.y);
  out.beta = std::max(0.0, (out.omega * gf).trace().real());
  if (out.beta < opt.zero_beta) out.beta = 0.0;
  out.alpha_achieved = std::clamp(1.0 - (out.omega * ge).trace().real(), 0.0, 1.0);
  out.value = out.beta > 0 ? -std::log2(out.beta) : kInf;
  std::vector<SystemLayout::Subsystem> parts;
  for (int k = 0; k < n; ++k) parts.push_back({"R" + std::to_string(k + 1), dr});
  out.input_state = DensityMatrix::project(rho.value(out.solution.y), SystemLayout(parts));
  return out;
}

}  // namespace qcd
