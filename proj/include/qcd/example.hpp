#pragma once

// Two channels C^2 (x) C^2 -> C^2 that a two-step adaptive protocol tells
// apart almost perfectly while single parallel uses gain at most 2 bits.

#include "qcd/adaptive.hpp"
#include "qcd/bounds.hpp"
#include "qcd/hypothesis.hpp"
#include "qcd/linalg.hpp"
#include "qcd/random.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace qcd::example {

using Rational = boost::multiprecision::cpp_rational;

/// E(X) = |0><0| (X_00 + X_10 + X_01) + X_11 1/2, indices |ab> -> 2a + b.
template <class S>
Matrix<S> e_map(const Matrix<S>& x) {
  Matrix<S> out = zeros<S>(2, 2);
  out(0, 0) = x(0, 0) + x(1, 1) + x(2, 2) + x(3, 3) / S(2);
  out(1, 1) = x(3, 3) / S(2);
  return out;
}

/// F(X) = (1-k)[|+><+|(X_00 + X_10) + |1><1| <+1|X|+1> + 1/2 <-1|X|-1>] + k Tr(X) 1/2.
template <class S>
Matrix<S> f_map(const Matrix<S>& x, const S& kappa) {
  const S half(S(1) / S(2));
  const S p = x(0, 0) + x(2, 2);
  const S plus1 = half * (x(1, 1) + x(1, 3) + x(3, 1) + x(3, 3));
  const S minus1 = half * (x(1, 1) - x(1, 3) - x(3, 1) + x(3, 3));
  const S tr = x(0, 0) + x(1, 1) + x(2, 2) + x(3, 3);
  const S w = S(1) - kappa;
  Matrix<S> out(2, 2);
  out(0, 0) = w * (half * p + half * minus1) + kappa * tr * half;
  out(1, 1) = w * (half * p + plus1 + half * minus1) + kappa * tr * half;
  out(0, 1) = w * half * p;
  out(1, 0) = w * half * p;
  return out;
}

/// X on B -> X (x) |1><1| on A.
template <class S>
Matrix<S> prep_map(const Matrix<S>& x) {
  Matrix<S> one = zeros<S>(2, 2);
  one(1, 1) = S(1);
  return kron<S>(x, one);
}

inline void check_kappa(double kappa) {
  if (!(kappa >= 0 && kappa <= 1)) throw std::invalid_argument("example: kappa outside [0,1]");
}

struct ExampleChannels {
  double kappa = 0.0;
  Channel E, F;
};

inline ExampleChannels build_channels(double kappa) {
  check_kappa(kappa);
  const Complex k(kappa);
  ExampleChannels c;
  c.kappa = kappa;
  c.E = Channel::from_choi(choi_from_map<Complex>(4, 2, [](const CMatrix& x) { return e_map<Complex>(x); }), 4, 2);
  c.F = Channel::from_choi(choi_from_map<Complex>(4, 2, [&](const CMatrix& x) { return f_map<Complex>(x, k); }), 4, 2);
  return c;
}

inline Channel prep_channel() {
  CMatrix k = CMatrix::Zero(4, 2);
  k(1, 0) = k(3, 1) = 1.0;
  return Channel::from_kraus({k});
}

/// Relative cutoff that keeps eigenvalues of order kappa and drops round-off.
inline SpectralOptions example_spectral(double kappa) {
  SpectralOptions s;
  if (kappa > 0) s.cutoff = std::min(kDefaultCutoff, kappa / 16);
  return s;
}

/// Test options whose zero threshold sits below type II errors of order kappa.
inline HypothesisOptions example_hypothesis(double kappa) {
  HypothesisOptions o;
  o.spectral = example_spectral(kappa);
  if (kappa > 0) o.zero_beta = std::min(o.zero_beta, kappa / 16);
  return o;
}

/// (3 kappa - kappa^2) / 4.
inline Rational delta_exact(const Rational& kappa) { return (3 * kappa - kappa * kappa) / 4; }

inline double black_line(double kappa) {
  if (!(kappa > 0 && kappa <= 1)) throw std::invalid_argument("black_line: kappa outside (0,1]");
  return -0.5 * std::log2(delta_exact(Rational(kappa)).convert_to<double>());
}

/// Both branches of the two-step protocol in exact arithmetic.
struct ExactTrace {
  Matrix<Rational> e_out1, f_out1;  // E(rho_1), F(rho_1)
  Matrix<Rational> rho2, sigma2;
  Matrix<Rational> e_out2, f_out2;
  Rational delta;  // <0|F(sigma_2)|0>, read off the simulated output
};

inline ExactTrace exact_two_step(double kappa) {
  check_kappa(kappa);
  const Rational k(kappa);
  auto ce = choi_from_map<Rational>(4, 2, [](const Matrix<Rational>& x) { return e_map<Rational>(x); });
  auto cf = choi_from_map<Rational>(4, 2, [&](const Matrix<Rational>& x) { return f_map<Rational>(x, k); });
  auto cl = choi_from_map<Rational>(2, 4, [](const Matrix<Rational>& x) { return prep_map<Rational>(x); });
  Matrix<Rational> rho1 = zeros<Rational>(4, 4);
  rho1(0, 0) = 1;
  ExactTrace t;
  t.e_out1 = apply_choi<Rational>(ce, 4, 2, rho1, {4}, 0);
  t.f_out1 = apply_choi<Rational>(cf, 4, 2, rho1, {4}, 0);
  t.rho2 = apply_choi<Rational>(cl, 2, 4, t.e_out1, {2}, 0);
  t.sigma2 = apply_choi<Rational>(cl, 2, 4, t.f_out1, {2}, 0);
  t.e_out2 = apply_choi<Rational>(ce, 4, 2, t.rho2, {4}, 0);
  t.f_out2 = apply_choi<Rational>(cf, 4, 2, t.sigma2, {4}, 0);
  t.delta = t.f_out2(0, 0);
  return t;
}

inline CMatrix to_complex(const Matrix<Rational>& m) {
  CMatrix out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out(i, j) = m(i, j).convert_to<double>();
  return out;
}

/// rho_1 = |00><00| followed by n - 1 uses of X -> X (x) |1><1|.
inline AdaptiveStrategy repeated_strategy(int n) {
  AdaptiveStrategy s;
  s.n = n;
  s.rho1 = DensityMatrix::basis(4, 0).with_layout({{"R", 1}, {"A", 4}});
  for (int k = 1; k < n; ++k) s.preps.push_back(prep_channel());
  return s;
}

struct TwoStep {
  ExampleChannels channels;
  AdaptiveStrategy strategy;
  double delta = 0.0;
  double black = 0.0;  // (1/2) D_H^0(E(rho_2) || F(sigma_2))
  double g1 = 0.0;
  double g2 = 0.0;
};

inline double gain1_closed(double kappa) { return -0.5 * (std::log2(kappa / 2) + std::log2(1 - kappa / 2)); }

inline double gain2_closed(double kappa) {
  return -std::log2(delta_exact(Rational(kappa)).convert_to<double>()) - gain1_closed(kappa);
}

inline TwoStep two_step_strategy(double kappa) {
  if (!(kappa > 0 && kappa <= 1)) throw std::invalid_argument("two_step_strategy: kappa outside (0,1]");
  TwoStep t;
  t.channels = build_channels(kappa);
  t.strategy = repeated_strategy(2);
  t.delta = delta_exact(Rational(kappa)).convert_to<double>();
  t.black = black_line(kappa);
  t.g1 = gain1_closed(kappa);
  t.g2 = gain2_closed(kappa);
  return t;
}

struct ParallelCaps {
  double product_zero = 0.0;  // D_H^0 at rho (x) |0><0|
  double corner = 0.0;        // D_H^0 at |0><0| (x) |1><1|
  double corner_closed = 0.0;
  double max_sampled = 0.0;   // over random inputs entangled with a qubit reference
  int samples = 0;
};

inline ParallelCaps parallel_caps(double kappa, int samples = 200, std::uint64_t seed = 1) {
  check_kappa(kappa);
  auto ch = build_channels(kappa);
  const HypothesisOptions opt = example_hypothesis(kappa);
  auto dh0 = [&](const DensityMatrix& in, const std::string& target) {
    return dh_state(apply_channel(ch.E, in, target), apply_channel(ch.F, in, target), 0.0, opt).dh;
  };
  Rng rng(seed);
  ParallelCaps c;
  c.product_zero = dh0(DensityMatrix(kron<Complex>(random_density(2, rng).matrix(), DensityMatrix::basis(2, 0).matrix())), "A");
  c.corner = dh0(DensityMatrix::basis(4, 1), "A");
  c.corner_closed = -std::log2((1 + kappa) / 4);
  c.samples = samples;
  for (int k = 0; k < samples; ++k) {
    auto nu = random_pure(8, rng).density().with_layout({{"R", 2}, {"A", 4}});
    c.max_sampled = std::max(c.max_sampled, dh0(nu, "A"));
  }
  return c;
}

struct Figure3Row {
  long long m = 0;
  double black = 0.0;
  std::optional<double> yellow;
  double red = 0.0;
  double green = 0.0;  // -inf when the quantile argument is not positive
  bool eq38_ok = false;
};

inline std::vector<long long> log_grid(double lo, double hi, int points) {
  if (!(lo >= 1 && hi >= lo) || points < 1) throw std::invalid_argument("log_grid: need 1 <= lo <= hi and points >= 1");
  std::vector<long long> g;
  for (int k = 0; k < points; ++k) {
    const double t = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
    g.push_back(std::llround(lo * std::pow(hi / lo, t)));
  }
  return g;
}

/// Per-use rates of the two-step adaptive protocol (black), the guaranteed
/// parallel rate (yellow), and the second-order bracket of the product
/// parallel strategy (red above, green below).
inline std::vector<Figure3Row> figure3_data(double kappa, double alpha_p, const std::vector<long long>& m_grid) {
  if (!(kappa > 0 && kappa <= 1)) throw std::invalid_argument("figure3_data: kappa outside (0,1]");
  if (!(alpha_p > 0 && alpha_p <= 1)) throw std::invalid_argument("figure3_data: alpha_p outside (0,1]");
  const auto two = two_step_strategy(kappa);
  const auto spectral = example_spectral(kappa);
  const auto trace = simulate(two.strategy, two.channels.E, two.channels.F, spectral);
  const auto exact = exact_two_step(kappa);
  const DensityMatrix e1(to_complex(exact.e_out1)), f1(to_complex(exact.f_out1));
  const double dh_adaptive = 2 * two.black;
  BoundOptions bopt;
  bopt.spectral = spectral;

  std::vector<Figure3Row> rows;
  for (long long m : m_grid) {
    Figure3Row r;
    r.m = m;
    r.black = two.black;
    auto rep = theorem7_rhs(two.channels.E, two.channels.F, trace, static_cast<double>(m), alpha_p, 0.0, dh_adaptive, bopt);
    r.eq38_ok = rep.condition_eq38;
    r.yellow = rep.rhs_eq39;
    auto so = second_order_dh(e1, f1, static_cast<double>(m), alpha_p, spectral);
    r.red = so.upper;
    r.green = so.lower;
    rows.push_back(r);
  }
  return rows;
}

inline std::string csv_number(double v) {
  if (!std::isfinite(v)) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void write_figure3_csv(std::ostream& os, const std::vector<Figure3Row>& rows) {
  os << "m,black,yellow,red,green,eq38_ok\n";
  for (const auto& r : rows)
    os << r.m << ',' << csv_number(r.black) << ',' << (r.yellow ? csv_number(*r.yellow) : std::string()) << ','
       << csv_number(r.red) << ',' << csv_number(r.green) << ',' << (r.eq38_ok ? "true" : "false") << '\n';
}

}  // namespace qcd::example
