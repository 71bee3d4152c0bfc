#pragma once

// State divergences in bits. Support violations are values (+inf), not errors.

#include "qcd/linalg.hpp"
#include "qcd/sdp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qcd {

struct SpectralOptions {
  double cutoff = kDefaultCutoff;
  /// Tr(rho Pi_sigma^perp) above this counts as a support violation.
  double leak = 1e-9;
};

struct StatePairStats {
  double D = 0.0;
  double V = 0.0;
  double T3 = 0.0;
};

struct SmoothingResult {
  double value = 0.0;
  DensityMatrix optimizer;
  double achieved_distance = 0.0;
};

namespace detail {

// Joint spectral data of (rho, sigma): retained eigenvalues and squared
// overlaps w(i, j) = |<x_i|y_j>|^2 on the retained parts.
struct PairSpectra {
  RVector lam, mu;
  Eigen::MatrixXd w;
  double leak = 0.0;
};

inline PairSpectra pair_spectra(const CMatrix& rho, const CMatrix& sigma, const SpectralOptions& opt) {
  Spectrum r = eigh(rho), s = eigh(sigma);
  auto ri = retained(r.values, opt.cutoff), si = retained(s.values, opt.cutoff);
  PairSpectra p;
  p.lam.resize(static_cast<Index>(ri.size()));
  p.mu.resize(static_cast<Index>(si.size()));
  for (std::size_t a = 0; a < ri.size(); ++a) {
    if (r.values[ri[a]] < 0) throw std::domain_error("first argument has a negative retained eigenvalue");
    p.lam[static_cast<Index>(a)] = r.values[ri[a]];
  }
  for (std::size_t b = 0; b < si.size(); ++b) {
    if (s.values[si[b]] < 0) throw std::domain_error("second argument has a negative retained eigenvalue");
    p.mu[static_cast<Index>(b)] = s.values[si[b]];
  }
  CMatrix ov = r.vectors.adjoint() * s.vectors;
  p.w.resize(p.lam.size(), p.mu.size());
  for (std::size_t a = 0; a < ri.size(); ++a) {
    double in_support = 0.0;
    for (std::size_t b = 0; b < si.size(); ++b) {
      const double v = std::norm(ov(ri[a], si[b]));
      p.w(static_cast<Index>(a), static_cast<Index>(b)) = v;
      in_support += v;
    }
    p.leak += p.lam[static_cast<Index>(a)] * std::max(0.0, 1.0 - in_support);
  }
  return p;
}

// Tr(rho^alpha sigma^(1-alpha)) from the joint spectra.
inline double petz_q(const PairSpectra& p, double alpha) {
  double q = 0.0;
  for (Index i = 0; i < p.lam.size(); ++i) {
    const double la = std::pow(p.lam[i], alpha);
    for (Index j = 0; j < p.mu.size(); ++j) q += la * std::pow(p.mu[j], 1.0 - alpha) * p.w(i, j);
  }
  return q;
}

inline void check_order(double alpha, double lo, bool lo_open, double hi, const char* name) {
  const bool below = lo_open ? alpha <= lo : alpha < lo;
  if (!std::isfinite(alpha) || below || alpha > hi || std::abs(alpha - 1.0) < 1e-6)
    throw std::invalid_argument(std::string(name) + ": Renyi order " + std::to_string(alpha) + " outside admissible range");
}

// sigma^{-1/2} rho sigma^{-1/2} restricted to supp(sigma), in sigma's eigenbasis,
// along with the retained eigenvalues of sigma.
struct Whitened {
  CMatrix g;
  RVector mu;
  double leak = 0.0;
};

inline Whitened whiten(const CMatrix& rho, const CMatrix& sigma, const SpectralOptions& opt) {
  Spectrum s = eigh(sigma);
  auto si = retained(s.values, opt.cutoff);
  Whitened out;
  const auto r = static_cast<Index>(si.size());
  CMatrix y(sigma.rows(), r);
  out.mu.resize(r);
  for (Index b = 0; b < r; ++b) {
    if (s.values[si[b]] < 0) throw std::domain_error("second argument has a negative retained eigenvalue");
    y.col(b) = s.vectors.col(si[b]);
    out.mu[b] = s.values[si[b]];
  }
  CMatrix inside = y.adjoint() * rho * y;
  out.leak = std::max(0.0, rho.trace().real() - inside.trace().real());
  RVector scale = out.mu.cwiseSqrt().cwiseInverse();
  out.g = scale.asDiagonal() * inside * scale.asDiagonal();
  out.g = (out.g + out.g.adjoint()) * 0.5;
  return out;
}

}  // namespace detail

inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binary_entropy: p outside [0,1]");
  auto term = [](double x) { return x > 0 ? -x * std::log2(x) : 0.0; };
  return term(p) + term(1.0 - p);
}

/// Umegaki relative entropy D(rho||sigma) in bits.
inline double relative_entropy(const DensityMatrix& rho, const PositiveOperator& sigma, const SpectralOptions& opt = {}) {
  auto p = detail::pair_spectra(rho.matrix(), sigma.matrix(), opt);
  if (p.leak > opt.leak) return kInf;
  double d = 0.0;
  for (Index i = 0; i < p.lam.size(); ++i) {
    d += p.lam[i] * std::log2(p.lam[i]);
    for (Index j = 0; j < p.mu.size(); ++j) d -= p.lam[i] * p.w(i, j) * std::log2(p.mu[j]);
  }
  return d;
}

/// Root fidelity Tr sqrt(sqrt(sigma) rho sqrt(sigma)), clipped to [0,1]. Evaluated
/// as the trace norm of sqrt(rho) sqrt(sigma); eigenvalues at round-off level
/// are dropped since their square roots would dominate the error.
inline double fidelity(const CMatrix& rho, const CMatrix& sigma) {
  auto root = [](const CMatrix& m) { return mat_func(m, [](double v) { return std::sqrt(std::max(v, 0.0)); }, 1e-14); };
  Eigen::JacobiSVD<CMatrix> svd(root(rho) * root(sigma));
  return std::clamp(svd.singularValues().sum(), 0.0, 1.0);
}

inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  return fidelity(rho.matrix(), sigma.matrix());
}

inline double sine_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  const double f = fidelity(rho, sigma);
  return std::sqrt(std::max(0.0, 1.0 - f * f));
}

/// D_max(rho||sigma) = log lambda_max(sigma^{-1/2} rho sigma^{-1/2}) on supp(sigma).
inline double dmax(const DensityMatrix& rho, const PositiveOperator& sigma, const SpectralOptions& opt = {}) {
  auto w = detail::whiten(rho.matrix(), sigma.matrix(), opt);
  if (w.leak > opt.leak) return kInf;
  if (w.g.rows() == 0) return kInf;
  return std::log2(eigh(w.g).values.maxCoeff());
}

inline double petz_renyi(double alpha, const DensityMatrix& rho, const PositiveOperator& sigma,
                         const SpectralOptions& opt = {}) {
  detail::check_order(alpha, 0.0, false, 2.0, "petz_renyi");
  auto p = detail::pair_spectra(rho.matrix(), sigma.matrix(), opt);
  if (alpha > 1.0 && p.leak > opt.leak) return kInf;
  const double q = detail::petz_q(p, alpha);
  if (!(q > 0)) return kInf;
  return std::log2(q) / (alpha - 1.0);
}

inline double geometric_renyi(double alpha, const DensityMatrix& rho, const PositiveOperator& sigma,
                              const SpectralOptions& opt = {}) {
  detail::check_order(alpha, 0.0, true, 2.0, "geometric_renyi");
  auto w = detail::whiten(rho.matrix(), sigma.matrix(), opt);
  if (alpha > 1.0 && w.leak > opt.leak) return kInf;
  CMatrix ga = mat_func(w.g, [alpha](double v) { return std::pow(std::max(v, 0.0), alpha); }, 0.0);
  double q = 0.0;
  for (Index k = 0; k < w.mu.size(); ++k) q += w.mu[k] * ga(k, k).real();
  if (!(q > 0)) return kInf;
  return std::log2(q) / (alpha - 1.0);
}

/// c_gamma = (1/gamma) log(2^{gamma D_{1+gamma}} + 2^{-gamma D_{1-gamma}} + 1).
inline double c_gamma(double gamma, const DensityMatrix& rho, const PositiveOperator& sigma,
                      const SpectralOptions& opt = {}) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("c_gamma: gamma outside (0,1]");
  auto p = detail::pair_spectra(rho.matrix(), sigma.matrix(), opt);
  if (p.leak > opt.leak) return kInf;
  return std::log2(detail::petz_q(p, 1.0 + gamma) + detail::petz_q(p, 1.0 - gamma) + 1.0) / gamma;
}

/// Relative entropy, its variance and the third absolute moment of the
/// log-likelihood ratio, via the double sum over eigenpairs.
inline StatePairStats state_pair_stats(const DensityMatrix& rho, const PositiveOperator& sigma,
                                       const SpectralOptions& opt = {}) {
  auto p = detail::pair_spectra(rho.matrix(), sigma.matrix(), opt);
  if (p.leak > opt.leak) throw std::domain_error("state_pair_stats: support of rho not contained in support of sigma");
  StatePairStats st;
  for (Index i = 0; i < p.lam.size(); ++i)
    for (Index j = 0; j < p.mu.size(); ++j) st.D += p.lam[i] * p.w(i, j) * (std::log2(p.lam[i]) - std::log2(p.mu[j]));
  for (Index i = 0; i < p.lam.size(); ++i)
    for (Index j = 0; j < p.mu.size(); ++j) {
      const double dev = std::log2(p.lam[i]) - std::log2(p.mu[j]) - st.D;
      const double weight = p.lam[i] * p.w(i, j);
      st.V += weight * dev * dev;
      st.T3 += weight * std::abs(dev) * dev * dev;
    }
  return st;
}

struct SmoothingOptions {
  SpectralOptions spectral;
  sdp::Options solver;
};

/// Smoothed max-divergence over normalized states in the sine-distance ball.
inline SmoothingResult dmax_smoothed(const DensityMatrix& rho, const PositiveOperator& sigma, double eps,
                                     const SmoothingOptions& opt = {}) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("dmax_smoothed: eps outside [0,1]");
  const Index d = rho.dim();
  if (sigma.dim() != d) throw std::invalid_argument("dmax_smoothed: dimension mismatch");
  if (eps == 0.0) return {dmax(rho, sigma, opt.spectral), rho, 0.0};

  Spectrum s = eigh(sigma.matrix());
  auto si = retained(s.values, opt.spectral.cutoff);
  const auto ns = static_cast<Index>(si.size());
  CMatrix ys(d, ns);
  RVector mu(ns);
  for (Index b = 0; b < ns; ++b) {
    ys.col(b) = s.vectors.col(si[b]);
    mu[b] = s.values[si[b]];
  }

  if (eps == 1.0) {
    Index top = 0;
    mu.maxCoeff(&top);
    CVector v = ys.col(top);
    DensityMatrix nu = DensityMatrix::project(v * v.adjoint(), rho.layout());
    return {-std::log2(mu[top]), nu, sine_distance(rho, nu)};
  }

  // Restrict to supp(sigma); the best reachable fidelity is sqrt(Tr(P rho P)).
  CMatrix rho_s = ys.adjoint() * rho.matrix() * ys;
  rho_s = (rho_s + rho_s.adjoint()) * 0.5;
  const double target = std::sqrt(1.0 - eps * eps);
  if (std::sqrt(std::max(0.0, rho_s.trace().real())) < target) {
    return {kInf, rho, sine_distance(rho, rho)};
  }
  Spectrum rs = eigh(rho_s);
  auto ri = retained(rs.values, opt.spectral.cutoff);
  const auto nr = static_cast<Index>(ri.size());
  CMatrix v(ns, nr);
  RVector dvals(nr);
  for (Index a = 0; a < nr; ++a) {
    v.col(a) = rs.vectors.col(ri[a]);
    dvals[a] = rs.values[ri[a]];
  }

  // lam = scale * t; the normalized restriction of rho is feasible, so t <= 1 at the optimum
  RVector inv_sqrt_mu = mu.cwiseSqrt().cwiseInverse();
  const CMatrix whitened = inv_sqrt_mu.asDiagonal() * rho_s * inv_sqrt_mu.asDiagonal();
  const double scale = eigh((whitened + whitened.adjoint()) * 0.5).values.maxCoeff() / rho_s.trace().real();

  sdp::Problem prob;
  const Index lam = prob.add_variable();
  auto nu = prob.add_hermitian(ns);
  const Index y0 = prob.add_variables(2 * nr * ns);
  auto yre = [&](Index a, Index k) { return y0 + 2 * (a * ns + k); };

  sdp::AffineMatrix dom(ns);  // scale * t * diag(mu) - nu
  for (Index b = 0; b < ns; ++b) dom.add_term(lam, b, b, scale * mu[b]);
  nu.add_to(dom, -1.0);
  prob.add_psd(std::move(dom));

  sdp::AffineMatrix fid(nr + ns);  // [[D, Y], [Y^dag, nu]]
  for (Index a = 0; a < nr; ++a) fid.constant()(a, a) = dvals[a];
  nu.add_to(fid, 1.0, nr, nr);
  sdp::LinearExpr overlap;  // Re Tr(V Y)
  for (Index a = 0; a < nr; ++a)
    for (Index k = 0; k < ns; ++k) {
      fid.add_term(yre(a, k), a, nr + k, 1.0);
      fid.add_term(yre(a, k), nr + k, a, 1.0);
      fid.add_term(yre(a, k) + 1, a, nr + k, Complex(0, 1));
      fid.add_term(yre(a, k) + 1, nr + k, a, Complex(0, -1));
      overlap.add(yre(a, k), v(k, a).real());
      overlap.add(yre(a, k) + 1, -v(k, a).imag());
    }
  prob.add_psd(std::move(fid));
  overlap.constant = -target;
  prob.add_nonneg(overlap);
  auto tr = nu.trace_with(CMatrix::Identity(ns, ns));
  tr.constant = -1.0;
  prob.add_equality(tr);
  sdp::LinearExpr obj;
  obj.add(lam, 1.0);
  prob.minimize(obj);

  auto sol = prob.solve_or_throw(opt.solver, "dmax_smoothed");
  CMatrix nu_full = ys * nu.value(sol.y) * ys.adjoint();
  DensityMatrix opt_state = DensityMatrix::project(nu_full, rho.layout());
  return {std::log2(scale * sol.y[lam]), opt_state, sine_distance(rho, opt_state)};
}

}  // namespace qcd
