#include "qcd/example.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace qcd;
using example::Rational;

namespace {

CMatrix proj(Index d, Index k) {
  CMatrix m = CMatrix::Zero(d, d);
  m(k, k) = 1.0;
  return m;
}

double max_diff(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

const std::vector<double> kGrid{0.01, 0.05, 0.1, 0.2, 0.25, 0.4, 0.5, 0.7, 0.9, 1.0};

}  // namespace

TEST(Channels, TracePreservingAndRejectsBadKappa) {
  for (double kappa : {0.0, 0.3, 1.0}) {
    auto ch = example::build_channels(kappa);
    for (const Channel* c : {&ch.E, &ch.F}) {
      EXPECT_EQ(c->dim_in(), 4);
      EXPECT_EQ(c->dim_out(), 2);
      EXPECT_LT(max_diff(oracle::partial_trace(c->choi().matrix(), {4, 2}, 0), CMatrix::Identity(4, 4)), 1e-12);
      EXPECT_GE(oracle::herm_eigenvalues(c->choi().matrix()).minCoeff(), -1e-12);
    }
  }
  EXPECT_THROW(example::build_channels(-0.1), std::invalid_argument);
  EXPECT_THROW(example::build_channels(1.5), std::invalid_argument);
}

TEST(Channels, ActionOnBasisInputs) {
  const double kappa = 0.3;
  auto ch = example::build_channels(kappa);
  // E sends |00>, |01>, |10> to |0> and |11> to the maximally mixed state
  for (Index k = 0; k < 3; ++k) EXPECT_LT(max_diff(ch.E.apply(proj(4, k)), proj(2, 0)), 1e-14);
  EXPECT_LT(max_diff(ch.E.apply(proj(4, 3)), CMatrix::Identity(2, 2) / 2), 1e-14);
  // F sends |a0> to (1-k)|+><+| + k 1/2
  CMatrix plus = CMatrix::Constant(2, 2, 0.5);
  for (Index k : {0, 2}) EXPECT_LT(max_diff(ch.F.apply(proj(4, k)), (1 - kappa) * plus + kappa / 2 * CMatrix::Identity(2, 2)), 1e-14);
  // |+1> -> |1>, |-1> -> 1/2
  CVector p1 = CVector::Zero(4), m1 = CVector::Zero(4);
  p1(1) = p1(3) = m1(1) = 1 / std::sqrt(2.0);
  m1(3) = -1 / std::sqrt(2.0);
  EXPECT_LT(max_diff(ch.F.apply(p1 * p1.adjoint()), (1 - kappa) * proj(2, 1) + kappa / 2 * CMatrix::Identity(2, 2)), 1e-14);
  EXPECT_LT(max_diff(ch.F.apply(m1 * m1.adjoint()), CMatrix::Identity(2, 2) / 2), 1e-14);
}

TEST(TwoStep, ExactOutputs) {
  for (double kappa : kGrid) {
    auto t = example::exact_two_step(kappa);
    const Rational k(kappa), half(Rational(1) / 2);
    EXPECT_EQ(t.e_out2(0, 0), 1);
    EXPECT_EQ(t.e_out2(1, 1), 0);
    EXPECT_EQ(t.e_out2(0, 1), 0);
    EXPECT_EQ(t.rho2(1, 1), 1);  // |01><01|
    // sigma_2 = ((1 - k/2)|+><+| + k/2 |-><-|) (x) |1><1|
    EXPECT_EQ(t.sigma2(1, 1), half);
    EXPECT_EQ(t.sigma2(3, 3), half);
    EXPECT_EQ(t.sigma2(1, 3), half * (1 - k));
    EXPECT_EQ(t.sigma2(0, 0) + t.sigma2(2, 2), 0);
    EXPECT_EQ(t.delta, (3 * k - k * k) / 4);
    EXPECT_EQ(t.f_out2(1, 1), 1 - t.delta);
    EXPECT_EQ(t.f_out2(0, 1), 0);
  }
  EXPECT_EQ(example::exact_two_step(0.0).delta, 0);
}

TEST(TwoStep, SimulatedDeltaOnGrid) {
  for (double kappa : kGrid) {
    auto two = example::two_step_strategy(kappa);
    auto tr = simulate(two.strategy, two.channels.E, two.channels.F, example::example_spectral(kappa));
    const double expect = (3 * kappa - kappa * kappa) / 4;
    EXPECT_NEAR(tr.f_out[1].matrix()(0, 0).real(), expect, 1e-12) << kappa;
    EXPECT_NEAR(tr.f_out[1].matrix()(1, 1).real(), 1 - expect, 1e-12) << kappa;
    EXPECT_LT(max_diff(tr.e_out[1].matrix(), proj(2, 0)), 1e-12);
    EXPECT_EQ(tr.ell, 1u);
  }
}

TEST(TwoStep, BlackLine) {
  const double kappa = std::ldexp(1.0, -50);
  const double closed = -0.5 * std::log2((3 * kappa - kappa * kappa) / 4);
  EXPECT_NEAR(example::black_line(kappa), closed, 1e-12);
  EXPECT_NEAR(example::black_line(kappa), 25.2075187, 1e-6);
  for (double k : {kappa, 0.1, 0.5}) {
    auto two = example::two_step_strategy(k);
    const auto o = example::example_hypothesis(k);
    auto tr = simulate(two.strategy, two.channels.E, two.channels.F, o.spectral);
    EXPECT_NEAR(dh_state(tr.e_out[1], tr.f_out[1], 0.0, o).dh / 2, example::black_line(k), 1e-6) << k;
  }
  double prev = kInf;
  for (double k : kGrid) {
    const double v = example::black_line(k);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(TwoStep, GainsMatchClosedForms) {
  for (double kappa : {0.05, 0.1, 0.25, 0.5, 0.75, 0.95}) {
    auto two = example::two_step_strategy(kappa);
    auto tr = simulate(two.strategy, two.channels.E, two.channels.F);
    EXPECT_NEAR(tr.gains[0], -0.5 * (std::log2(kappa / 2) + std::log2(1 - kappa / 2)), 1e-9) << kappa;
    EXPECT_NEAR(tr.gains[0], two.g1, 1e-9);
    EXPECT_NEAR(tr.gains[1], two.g2, 1e-9) << kappa;
    EXPECT_GT(two.g1, two.g2);
    // the two-step rate falls short of a single use
    EXPECT_LT(tr.final_divergence / 2, tr.gains[0]);
  }
}

TEST(TwoStep, FirstGainExceedsSecondAcrossKappa) {
  for (int k = 1; k < 100; ++k) {
    const double kappa = k / 100.0;
    EXPECT_GT(example::gain1_closed(kappa), example::gain2_closed(kappa)) << kappa;
  }
}

TEST(TwoStep, TinyKappa) {
  const double kappa = std::ldexp(1.0, -50);
  auto two = example::two_step_strategy(kappa);
  EXPECT_NEAR(two.g1, 25.5, 1e-12);
  auto tr = simulate(two.strategy, two.channels.E, two.channels.F, example::example_spectral(kappa));
  EXPECT_EQ(tr.ell, 1u);
  EXPECT_NEAR(tr.gains[0], two.g1, 1e-4);
  EXPECT_NEAR(tr.gains[1], two.g2, 1e-4);
}

TEST(ParallelCaps, ProductCornerAndSampled) {
  auto c = example::parallel_caps(0.25, 200, 3);
  EXPECT_NEAR(c.product_zero, 1.0, 1e-9);
  EXPECT_NEAR(c.corner, c.corner_closed, 1e-9);
  EXPECT_NEAR(c.corner_closed, -std::log2(1.25 / 4), 1e-15);
  EXPECT_LE(c.corner, 2.0);
  EXPECT_LE(c.max_sampled, 2.0 + 1e-6);
  EXPECT_EQ(c.samples, 200);
}

TEST(InfiniteMaxDivergence, KappaZeroVersusSmallKappa) {
  auto zero = example::build_channels(0.0);
  EXPECT_EQ(channel_dmax(zero.E, zero.F), kInf);
  EXPECT_EQ(channel_geometric_d2(zero.E, zero.F), kInf);
  const double kappa = std::ldexp(1.0, -20);
  auto small = example::build_channels(kappa);
  const auto sp = example::example_spectral(kappa);
  EXPECT_TRUE(std::isfinite(channel_dmax(small.E, small.F, sp)));
  EXPECT_TRUE(std::isfinite(channel_geometric_d2(small.E, small.F, sp)));
}

TEST(RateCurves, LogGrid) {
  auto g = example::log_grid(100, 1e7, 60);
  ASSERT_EQ(g.size(), 60u);
  EXPECT_EQ(g.front(), 100);
  EXPECT_EQ(g.back(), 10000000);
  for (std::size_t k = 1; k < g.size(); ++k) EXPECT_GT(g[k], g[k - 1]);
  EXPECT_EQ(example::log_grid(5, 5, 1), std::vector<long long>{5});
  EXPECT_THROW(example::log_grid(0, 5, 3), std::invalid_argument);
}

TEST(RateCurves, RowsAndCsv) {
  const double kappa = std::ldexp(1.0, -50), ap = std::ldexp(1.0, -5);
  auto rows = example::figure3_data(kappa, ap, {10, 100, 10000, 10000000});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_FALSE(rows[0].eq38_ok);
  EXPECT_FALSE(rows[0].yellow.has_value());
  for (const auto& r : rows) {
    EXPECT_NEAR(r.black, 25.2075187, 1e-6);
    EXPECT_LE(r.green, r.red);
    if (r.yellow && std::isfinite(r.green)) EXPECT_LE(*r.yellow, r.green + 1e-6) << r.m;
  }
  EXPECT_NEAR(rows.back().red, 25.5, 0.1);
  EXPECT_NEAR(rows.back().green, 25.5, 0.1);

  std::ostringstream os;
  example::write_figure3_csv(os, rows);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "m,black,yellow,red,green,eq38_ok");
  std::getline(is, line);
  EXPECT_EQ(line.rfind("10,25.2075187,,", 0), 0u) << line;
  EXPECT_EQ(line.substr(line.size() - 5), "false");
  EXPECT_EQ(example::csv_number(-kInf), "");
  EXPECT_EQ(example::csv_number(0.1234567891234), "0.123456789");
}
