#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the library's numerical routines.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

/// Tr over every subsystem except `keep`, by explicit index contraction.
inline CMatrix partial_trace(const CMatrix& x, const std::vector<long>& dims, long keep) {
  long total = 1;
  for (long d : dims) total *= d;
  const long dk = dims[keep];
  CMatrix out = CMatrix::Zero(dk, dk);
  auto digits = [&](long idx) {
    std::vector<long> dg(dims.size());
    for (long k = static_cast<long>(dims.size()) - 1; k >= 0; --k) {
      dg[k] = idx % dims[k];
      idx /= dims[k];
    }
    return dg;
  };
  for (long i = 0; i < total; ++i) {
    auto di = digits(i);
    for (long j = 0; j < total; ++j) {
      auto dj = digits(j);
      bool match = true;
      for (std::size_t k = 0; k < dims.size(); ++k)
        if (static_cast<long>(k) != keep && di[k] != dj[k]) match = false;
      if (match) out(di[keep], dj[keep]) += x(i, j);
    }
  }
  return out;
}

inline CMatrix kraus_apply(const std::vector<CMatrix>& ks, const CMatrix& x) {
  CMatrix out = CMatrix::Zero(ks.front().rows(), ks.front().rows());
  for (const auto& k : ks) out += k * x * k.adjoint();
  return out;
}

/// Hermitian matrix function in plain double precision.
inline CMatrix herm_func(const CMatrix& h, const std::function<double(double)>& f) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es((h + h.adjoint()) * 0.5);
  return es.eigenvectors() * es.eigenvalues().unaryExpr(f).cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

inline RVector herm_eigenvalues(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es((h + h.adjoint()) * 0.5, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

// Classical divergences on probability vectors, in bits.

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double d = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) d += p[i] * std::log2(p[i] / q[i]);
  return d;
}

inline double renyi(double a, const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += std::pow(p[i], a) * std::pow(q[i], 1 - a);
  return std::log2(s) / (a - 1);
}

inline double max_ratio(const std::vector<double>& p, const std::vector<double>& q) {
  double m = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) m = std::max(m, p[i] / q[i]);
  return std::log2(m);
}

inline double llr_variance(const std::vector<double>& p, const std::vector<double>& q) {
  const double mean = kl(p, q);
  double v = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) {
      const double z = std::log2(p[i] / q[i]) - mean;
      v += p[i] * z * z;
    }
  return v;
}

inline double llr_third_abs(const std::vector<double>& p, const std::vector<double>& q) {
  const double mean = kl(p, q);
  double t = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) t += p[i] * std::pow(std::abs(std::log2(p[i] / q[i]) - mean), 3);
  return t;
}

/// Classical optimal type II error at type I error eps: fill outcomes in
/// decreasing likelihood ratio order until the acceptance mass 1 - eps is met.
inline double classical_beta(const std::vector<double>& p, const std::vector<double>& q, double eps) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] * q[b] > p[b] * q[a]; });
  double need = 1 - eps, beta = 0;
  for (auto i : order) {
    if (need <= 0) break;
    const double take = std::min(1.0, need / p[i]);
    need -= take * p[i];
    beta += take * q[i];
  }
  return beta;
}

inline double binary_entropy(double p) {
  auto t = [](double x) { return x > 0 ? -x * std::log2(x) : 0.0; };
  return t(p) + t(1 - p);
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Inverse normal CDF by bisection on erfc; the upper half goes through symmetry.
inline double std_normal_quantile(double p) {
  if (p > 0.5) return -std_normal_quantile(1 - p);
  double lo = -40, hi = 40;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (std_normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double binomial(long n, long k) {
  double r = 1;
  for (long i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

/// Tr rho (log rho - log sigma) in bits; both full rank.
inline double quantum_relative_entropy(const CMatrix& rho, const CMatrix& sigma) {
  auto lg = [](double v) { return std::log2(v); };
  return (rho * (herm_func(rho, lg) - herm_func(sigma, lg))).trace().real();
}

/// || sqrt(rho) sqrt(sigma) ||_1 from the singular values.
inline double root_fidelity(const CMatrix& rho, const CMatrix& sigma) {
  auto sq = [](double v) { return std::sqrt(std::max(v, 0.0)); };
  Eigen::JacobiSVD<CMatrix> svd(herm_func(rho, sq) * herm_func(sigma, sq));
  return svd.singularValues().sum();
}

/// Commuting pair given by entry values with multiplicities w_i.
struct WeightedPair {
  std::vector<double> p, s, w;
};

/// Largest sum_i w_i sqrt(p_i q_i) over q >= 0 with sum_i w_i q_i = 1 and q <= lam s.
/// Stationarity gives q_i = min(lam s_i, p_i / (4 t^2)); bisect on t.
inline double best_overlap(const WeightedPair& x, double lam) {
  const std::size_t n = x.p.size();
  double cap = 0;
  for (std::size_t i = 0; i < n; ++i) cap += x.w[i] * lam * x.s[i];
  if (cap < 1) return -1;  // infeasible
  auto fill = [&](double t) {
    double tot = 0;
    for (std::size_t i = 0; i < n; ++i) tot += x.w[i] * std::min(lam * x.s[i], x.p[i] / (4 * t * t));
    return tot;
  };
  auto overlap = [&](double t) {
    double f = 0;
    for (std::size_t i = 0; i < n; ++i) f += x.w[i] * std::sqrt(x.p[i] * std::min(lam * x.s[i], x.p[i] / (4 * t * t)));
    return f;
  };
  double lo = 1e-150, hi = 1e150;
  // leftover mass outside the support of p carries no overlap
  if (fill(lo) < 1) return overlap(lo);
  for (int it = 0; it < 400; ++it) {
    const double mid = std::sqrt(lo * hi);
    (fill(mid) > 1 ? lo : hi) = mid;
  }
  return overlap(hi);
}

/// Smoothed max-divergence of a commuting pair: smallest lam for which some
/// q <= lam s reaches root fidelity sqrt(1 - eps^2); bisection on log lam.
inline double classical_dmax_smoothed(const WeightedPair& x, double eps) {
  const double target = std::sqrt(1 - eps * eps);
  double lo = -500, hi = 500;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (best_overlap(x, std::exp2(mid)) >= target ? hi : lo) = mid;
  }
  return hi;
}

inline double classical_dmax_smoothed(const std::vector<double>& p, const std::vector<double>& s, double eps) {
  return classical_dmax_smoothed(WeightedPair{p, s, std::vector<double>(p.size(), 1.0)}, eps);
}

/// n-fold power of a two-outcome pair grouped by type: entry k has k ones.
inline WeightedPair binary_power(double p1, double s1, int n) {
  WeightedPair x;
  for (int k = 0; k <= n; ++k) {
    x.p.push_back(std::pow(p1, k) * std::pow(1 - p1, n - k));
    x.s.push_back(std::pow(s1, k) * std::pow(1 - s1, n - k));
    x.w.push_back(binomial(n, k));
  }
  return x;
}

}  // namespace oracle
