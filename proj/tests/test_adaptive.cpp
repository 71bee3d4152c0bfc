#include "qcd/adaptive.hpp"
#include "qcd/random.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/KroneckerProduct>

using namespace qcd;

namespace {

// Kraus operators of id_R (x) ch.
std::vector<CMatrix> lift_kraus(const Channel& ch, Index dr) {
  std::vector<CMatrix> out;
  for (const auto& k : ch.kraus()) out.push_back(Eigen::kroneckerProduct(CMatrix::Identity(dr, dr), k).eval());
  return out;
}

AdaptiveStrategy random_strategy(int n, Index dr, Rng& rng) {
  AdaptiveStrategy s;
  s.n = n;
  s.rho1 = random_density(dr * 2, rng).with_layout({{"R", dr}, {"A", 2}});
  for (int k = 1; k < n; ++k) s.preps.push_back(random_channel(dr * 2, dr * 2, rng));
  return s;
}

// Channel that discards its input and prepares omega.
Channel replacer(const CMatrix& omega, Index d_in) {
  Spectrum sp = eigh(omega);
  std::vector<CMatrix> ks;
  for (Index a = 0; a < omega.rows(); ++a) {
    if (sp.values[a] <= 0) continue;
    for (Index i = 0; i < d_in; ++i) {
      CMatrix k = CMatrix::Zero(omega.rows(), d_in);
      k.col(i) = std::sqrt(sp.values[a]) * sp.vectors.col(a);
      ks.push_back(k);
    }
  }
  return Channel::from_kraus(ks);
}

}  // namespace

TEST(Simulate, SingleStep) {
  Rng rng(1);
  auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
  AdaptiveStrategy s;
  s.rho1 = random_density(2, rng);
  auto t = simulate(s, e, f);
  ASSERT_EQ(t.n(), 1);
  EXPECT_EQ(t.ell, 1u);
  EXPECT_LT((t.rho[0].matrix() - t.sigma[0].matrix()).norm(), 1e-15);
  const CMatrix eo = oracle::kraus_apply(e.kraus(), s.rho1.matrix());
  const CMatrix fo = oracle::kraus_apply(f.kraus(), s.rho1.matrix());
  EXPECT_LT((t.e_out[0].matrix() - eo).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(t.gains[0], oracle::quantum_relative_entropy(eo, fo), 1e-8);
  EXPECT_NEAR(amortization_bound(t), t.gains[0], 1e-15);
}

TEST(Simulate, StatesFollowTheRecursion) {
  Rng rng(2);
  auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
  auto s = random_strategy(3, 2, rng);
  auto t = simulate(s, e, f);
  CMatrix r = s.rho1.matrix(), sg = r;
  for (int k = 0; k < 3; ++k) {
    if (k > 0) {
      r = oracle::kraus_apply(s.preps[k - 1].kraus(), oracle::kraus_apply(lift_kraus(e, 2), r));
      sg = oracle::kraus_apply(s.preps[k - 1].kraus(), oracle::kraus_apply(lift_kraus(f, 2), sg));
    }
    EXPECT_LT((t.rho[k].matrix() - r).cwiseAbs().maxCoeff(), 1e-10) << k;
    EXPECT_LT((t.sigma[k].matrix() - sg).cwiseAbs().maxCoeff(), 1e-10) << k;
    const CMatrix eo = oracle::kraus_apply(lift_kraus(e, 2), r), fo = oracle::kraus_apply(lift_kraus(f, 2), sg);
    const double in = k == 0 ? 0.0 : oracle::quantum_relative_entropy(r, sg);
    EXPECT_NEAR(t.gains[k], oracle::quantum_relative_entropy(eo, fo) - in, 1e-7) << k;
  }
}

TEST(Simulate, EllIsTheFirstLargestGain) {
  Rng rng(3);
  auto e = random_channel(2, 2, rng);
  auto t = simulate(random_strategy(3, 2, rng), e, e);
  for (double g : t.gains) EXPECT_NEAR(g, 0.0, 1e-8);
  EXPECT_EQ(t.ell, 1u);

  for (int trial = 0; trial < 5; ++trial) {
    auto f = random_channel(2, 2, rng);
    auto tr = simulate(random_strategy(4, 2, rng), e, f);
    std::size_t best = 0;
    for (std::size_t k = 1; k < tr.gains.size(); ++k)
      if (tr.gains[k] > tr.gains[best] + 1e-10) best = k;
    EXPECT_EQ(tr.ell, best + 1);
  }
}

TEST(Simulate, ReportsMismatchedStep) {
  Rng rng(4);
  auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
  auto s = random_strategy(3, 2, rng);
  s.preps[1] = random_channel(4, 2, rng);
  try {
    simulate(s, e, f);
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& ex) {
    EXPECT_NE(std::string(ex.what()).find("step 3"), std::string::npos) << ex.what();
  }
  s.preps.pop_back();
  EXPECT_THROW(simulate(s, e, f), std::invalid_argument);
  auto bad = random_strategy(2, 2, rng);
  bad.rho1 = random_density(6, rng).with_layout({{"R", 2}, {"A", 3}});
  EXPECT_THROW(simulate(bad, e, f), std::invalid_argument);
}

TEST(Amortization, ChainOnRandomStrategies) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 3;
    auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
    auto t = simulate(random_strategy(n, 2, rng), e, f);
    auto a = amortization_report(t);
    EXPECT_TRUE(a.chain_holds) << trial;
    EXPECT_LE(t.final_divergence, a.sum_gains + 1e-7);
    EXPECT_LE(a.sum_gains, n * t.best_gain() + 1e-7);
    EXPECT_LE(t.final_divergence / n, t.best_gain() + 1e-7);
  }
}

TEST(Amortization, ConstantPreparationIsTight) {
  // every step starts from the same fixed state, so the sum telescopes to n * g_1
  Rng rng(6);
  auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
  auto omega = random_density(2, rng);
  AdaptiveStrategy s;
  s.n = 3;
  s.rho1 = omega;
  for (int k = 1; k < 3; ++k) s.preps.push_back(replacer(omega.matrix(), 2));
  auto t = simulate(s, e, f);
  for (double g : t.gains) EXPECT_NEAR(g, t.gains[0], 1e-7);
  EXPECT_NEAR(amortization_bound(t), 3 * t.gains[0], 1e-7);
}

TEST(Amortization, InfiniteGainPropagatesAndViolationThrows) {
  Rng rng(7);
  auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
  auto t = simulate(random_strategy(2, 2, rng), e, f);
  auto inf = t;
  inf.gains[1] = kInf;
  EXPECT_EQ(amortization_bound(inf), kInf);
  auto broken = t;
  broken.final_divergence = amortization_report(t).sum_gains + 1.0;
  EXPECT_FALSE(amortization_report(broken).chain_holds);
  EXPECT_THROW(amortization_bound(broken), std::logic_error);
}

TEST(ChainSmoothing, NoSmoothing) {
  Rng rng(8);
  auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
  auto rho = random_density(2, rng), sigma = random_density(2, rng);
  auto c = chain_smoothing(rho, sigma, e, f, 0, 0);
  EXPECT_LT((c.nu.matrix() - rho.matrix()).norm(), 1e-15);
  EXPECT_LE(c.lhs, c.rhs() + 1e-9);
  const CMatrix w = oracle::herm_func(sigma.matrix(), [](double v) { return 1 / std::sqrt(v); });
  EXPECT_NEAR(c.first, std::log2(oracle::herm_eigenvalues(w * rho.matrix() * w).maxCoeff()), 1e-8);
}

TEST(ChainSmoothing, RandomInstances) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
    auto rho = random_density(2, rng), sigma = random_density(2, rng);
    auto c = chain_smoothing(rho, sigma, e, f, 0.1, 0.1);
    EXPECT_LE(c.lhs, c.rhs() + 1e-6) << trial;
    EXPECT_LE(std::sqrt(1 - std::pow(oracle::root_fidelity(c.nu.matrix(), rho.matrix()), 2)), 0.1 + 1e-6);
  }
}

TEST(ChainSmoothing, EqualInputs) {
  Rng rng(10);
  auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
  auto rho = random_density(2, rng);
  auto c = chain_smoothing(rho, rho, e, f, 0.2, 0.1);
  EXPECT_NEAR(c.first, 0.0, 1e-6);
  EXPECT_LE(c.lhs, c.second + 1e-6);
  EXPECT_THROW(chain_smoothing(rho, rho, e, f, 0.7, 0.5), std::invalid_argument);
}

TEST(ParallelInput, SmoothedSingleCopy) {
  Rng rng(11);
  auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
  auto t = simulate(random_strategy(2, 1, rng), e, f);
  auto p = parallel_input(t, 1, 0.3);
  EXPECT_FALSE(p.product_proxy);
  EXPECT_NEAR(p.eps, 0.5 * (1 - std::sqrt(0.7)), 1e-15);
  const CMatrix& rl = t.rho[t.ell - 1].matrix();
  EXPECT_LE(std::sqrt(1 - std::pow(oracle::root_fidelity(p.nu_tilde.matrix(), rl), 2)), p.eps + 1e-6);
  EXPECT_NEAR(p.marginal.trace(), 1.0, 1e-12);
}

TEST(ParallelInput, PurifiedMarginal) {
  Rng rng(12);
  auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
  auto t = simulate(random_strategy(2, 1, rng), e, f);
  auto p = parallel_input(t, 2, 0.2, ParallelChoice::purified);
  ASSERT_TRUE(p.purification.has_value());
  const Index d = p.marginal.dim();
  const CMatrix full = p.purification->density().matrix();
  EXPECT_LT((oracle::partial_trace(full, {d, d}, 1) - p.marginal.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  // marginal of nu_tilde over the A copies, contracted by hand
  const CMatrix a1a2 = p.nu_tilde.matrix();
  EXPECT_EQ(p.nu_tilde.layout().dims(), (std::vector<Index>{1, 2, 1, 2}));
  EXPECT_LT((a1a2 - p.marginal.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ParallelInput, ProductProxyBeyondCap) {
  Rng rng(13);
  auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
  auto t = simulate(random_strategy(2, 2, rng), e, f);
  auto p = parallel_input(t, 4, 0.1);
  EXPECT_TRUE(p.product_proxy);
  CMatrix rl = t.rho[t.ell - 1].matrix(), expect = rl;
  for (int k = 1; k < 4; ++k) expect = Eigen::kroneckerProduct(expect, rl).eval();
  EXPECT_LT((p.nu_tilde.matrix() - expect).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(p.marginal.dim(), 16);
  EXPECT_THROW(parallel_input(t, 0, 0.1), std::invalid_argument);
  EXPECT_THROW(parallel_input(t, 1, 0.0), std::invalid_argument);
}

TEST(ParallelInput, HalfErrorBallNeverRaisesDmax) {
  Rng rng(14);
  auto e = random_channel(2, 2, rng), f = random_channel(2, 2, rng);
  auto t = simulate(random_strategy(2, 1, rng), e, f);
  auto p = parallel_input(t, 1, 1.0);
  EXPECT_NEAR(p.eps, 0.5, 1e-15);
  const auto& rl = t.rho[t.ell - 1];
  const PositiveOperator sl(t.sigma[t.ell - 1]);
  EXPECT_LE(dmax(p.nu_tilde, sl), dmax(rl, sl) + 1e-6);
}
