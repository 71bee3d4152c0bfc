#pragma once

// Adaptive protocols: simulation of both hypotheses, divergence gains per
// step, the one-shot chain rule and the parallel input built from the best step.

#include "qcd/divergences.hpp"
#include "qcd/linalg.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcd {

/// rho1 lives on R (x) A; preps[i] maps R (x) B to R (x) A. A one-part layout
/// for rho1 means a trivial reference.
struct AdaptiveStrategy {
  int n = 1;
  DensityMatrix rho1;
  std::vector<Channel> preps;
  std::optional<HermitianOperator> final_test;
};

struct ProtocolTrace {
  std::vector<DensityMatrix> rho, sigma;  // channel inputs on R (x) A
  std::vector<DensityMatrix> e_out, f_out;  // E(rho_k), F(sigma_k) on R (x) B
  std::vector<double> gains;
  std::size_t ell = 1;  // 1-based step with the largest gain
  double final_divergence = 0.0;

  int n() const { return static_cast<int>(rho.size()); }
  double best_gain() const { return gains.at(ell - 1); }
};

namespace detail {

inline DensityMatrix with_reference(const DensityMatrix& rho, Index d_in) {
  const auto& l = rho.layout();
  if (l.size() == 1) return rho.with_layout({{"R", 1}, {"A", rho.dim()}});
  if (l.size() != 2) throw std::invalid_argument("strategy: initial state must live on R (x) A");
  if (l[1].dim != d_in)
    throw std::invalid_argument("strategy: input register has dimension " + std::to_string(l[1].dim) +
                                " but the channels expect " + std::to_string(d_in));
  return rho.with_layout({{"R", l[0].dim}, {"A", l[1].dim}});
}

inline DensityMatrix on_output(const Channel& ch, const DensityMatrix& x) { return apply_channel(ch, x, "A", "B"); }

// Divergence gain; +inf marks a support violation at the output.
inline double gain(double out, double in) {
  if (out == kInf) return kInf;
  if (in == kInf) return -kInf;
  return out - in;
}

}  // namespace detail

inline ProtocolTrace simulate(const AdaptiveStrategy& s, const Channel& e, const Channel& f,
                              const SpectralOptions& opt = {}) {
  if (s.n < 1) throw std::invalid_argument("simulate: n must be positive");
  if (e.dim_in() != f.dim_in() || e.dim_out() != f.dim_out()) throw std::invalid_argument("simulate: channel dimensions differ");
  if (static_cast<int>(s.preps.size()) != s.n - 1)
    throw std::invalid_argument("simulate: expected " + std::to_string(s.n - 1) + " preparation maps, got " +
                                std::to_string(s.preps.size()));
  DensityMatrix r = detail::with_reference(s.rho1, e.dim_in());
  const Index dr = r.layout()[0].dim;
  const SystemLayout in_layout{{"R", dr}, {"A", e.dim_in()}};

  ProtocolTrace t;
  DensityMatrix sg = r;
  for (int k = 1; k <= s.n; ++k) {
    if (k > 1) {
      const Channel& prep = s.preps[static_cast<std::size_t>(k - 2)];
      if (prep.dim_in() != dr * e.dim_out() || prep.dim_out() != dr * e.dim_in())
        throw std::invalid_argument("simulate: preparation map at step " + std::to_string(k) + " has shape " +
                                    std::to_string(prep.dim_in()) + " -> " + std::to_string(prep.dim_out()) +
                                    ", expected " + std::to_string(dr * e.dim_out()) + " -> " +
                                    std::to_string(dr * e.dim_in()));
      r = DensityMatrix::project(prep.apply(t.e_out.back().matrix()), in_layout);
      sg = DensityMatrix::project(prep.apply(t.f_out.back().matrix()), in_layout);
    }
    t.rho.push_back(r);
    t.sigma.push_back(sg);
    t.e_out.push_back(detail::on_output(e, r));
    t.f_out.push_back(detail::on_output(f, sg));
    const double out = relative_entropy(t.e_out.back(), t.f_out.back(), opt);
    const double in = k == 1 ? 0.0 : relative_entropy(r, sg, opt);
    t.gains.push_back(detail::gain(out, in));
    if (k == s.n) t.final_divergence = out;
  }
  // gains equal up to round-off count as ties; the earliest step wins
  for (std::size_t k = 1; k < t.gains.size(); ++k)
    if (t.gains[k] > t.gains[t.ell - 1] + 1e-10) t.ell = k + 1;
  return t;
}

struct AmortizationReport {
  double sum_gains = 0.0;
  double final_divergence = 0.0;
  double n_times_best = 0.0;
  bool chain_holds = true;
};

inline AmortizationReport amortization_report(const ProtocolTrace& t, double tol = 1e-7) {
  AmortizationReport a;
  a.final_divergence = t.final_divergence;
  bool infinite = false;
  for (double g : t.gains) {
    if (g == kInf) infinite = true;
    else a.sum_gains += g;
  }
  if (infinite) {
    a.sum_gains = a.n_times_best = kInf;
    return a;
  }
  a.n_times_best = t.n() * t.best_gain();
  a.chain_holds = a.final_divergence <= a.sum_gains + tol && a.sum_gains <= a.n_times_best + tol;
  return a;
}

/// Sum of the per-step gains; throws std::logic_error if the amortization
/// chain final <= sum <= n * g_ell is violated.
inline double amortization_bound(const ProtocolTrace& t, double tol = 1e-7) {
  auto a = amortization_report(t, tol);
  if (!a.chain_holds)
    throw std::logic_error("amortization chain violated: final " + std::to_string(a.final_divergence) + ", sum " +
                           std::to_string(a.sum_gains) + ", n*g_ell " + std::to_string(a.n_times_best));
  return a.sum_gains;
}

struct ChainSmoothing {
  DensityMatrix nu;
  double lhs = 0.0;     // D_max^{eps+eps'}(E(rho) || F(sigma))
  double first = 0.0;   // D_max^eps(rho || sigma)
  double second = 0.0;  // D_max^{eps'}(E(nu) || F(nu))
  double rhs() const { return first + second; }
};

/// Both channels act on the last subsystem of rho and sigma.
inline ChainSmoothing chain_smoothing(const DensityMatrix& rho, const DensityMatrix& sigma, const Channel& e,
                                      const Channel& f, double eps, double eps2, const SmoothingOptions& opt = {}) {
  if (!(eps >= 0 && eps <= 1 && eps2 >= 0 && eps2 <= 1 && eps + eps2 <= 1))
    throw std::invalid_argument("chain_smoothing: need eps, eps' in [0,1] with eps + eps' <= 1");
  if (rho.layout() != sigma.layout()) throw std::invalid_argument("chain_smoothing: rho and sigma layouts differ");
  const std::string target = rho.layout()[rho.layout().size() - 1].label;
  auto out = [&](const Channel& ch, const DensityMatrix& x) { return apply_channel(ch, x, target); };
  ChainSmoothing c;
  auto s = dmax_smoothed(rho, sigma, eps, opt);
  c.nu = s.optimizer;
  c.first = s.value;
  c.lhs = dmax_smoothed(out(e, rho), out(f, sigma), eps + eps2, opt).value;
  c.second = dmax_smoothed(out(e, c.nu), out(f, c.nu), eps2, opt).value;
  return c;
}

enum class ParallelChoice { smoothed, purified };

struct ParallelInput {
  std::size_t ell = 1;
  double eps = 0.0;
  bool product_proxy = false;
  DensityMatrix nu_tilde;                // on (R A)^m
  std::optional<PureState> purification;  // of the A^m marginal, choice 2
  DensityMatrix marginal;                // A^m marginal of nu_tilde
};

struct ParallelInputOptions {
  SmoothingOptions smoothing;
  /// Largest m-fold dimension for which the smoothing program is solved.
  Index cap = 64;
};

/// Input state for m parallel uses from the smoothed m-fold best step, with
/// eps = (1 - sqrt(1 - alpha_p)) / 2.
inline ParallelInput parallel_input(const ProtocolTrace& t, int m, double alpha_p,
                                    ParallelChoice choice = ParallelChoice::smoothed,
                                    const ParallelInputOptions& opt = {}) {
  if (m < 1) throw std::invalid_argument("parallel_input: m must be positive");
  if (!(alpha_p > 0 && alpha_p <= 1)) throw std::invalid_argument("parallel_input: alpha_p outside (0,1]");
  ParallelInput p;
  p.ell = t.ell;
  p.eps = 0.5 * (1 - std::sqrt(1 - alpha_p));
  const DensityMatrix& rl = t.rho.at(t.ell - 1);
  const DensityMatrix& sl = t.sigma.at(t.ell - 1);

  Index big = 1;
  for (int k = 0; k < m && big <= opt.cap; ++k) big *= rl.dim();
  const DensityMatrix rm = tensor_power(rl, m);
  if (big > opt.cap) {
    p.product_proxy = true;
    p.nu_tilde = rm;
  } else {
    p.nu_tilde = dmax_smoothed(rm, tensor_power(sl, m), p.eps, opt.smoothing).optimizer.with_layout(rm.layout());
  }
  std::vector<std::string> keep;
  for (int k = 1; k <= m; ++k) keep.push_back("A" + std::to_string(k));
  p.marginal = partial_trace(p.nu_tilde, keep);
  if (choice == ParallelChoice::purified) p.purification = canonical_purification(p.marginal);
  return p;
}

}  // namespace qcd
