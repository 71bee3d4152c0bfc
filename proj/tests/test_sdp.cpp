#include "qcd/random.hpp"
#include "qcd/sdp.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace qcd;

TEST(Solver, LargestEigenvalue) {
  Rng rng(1);
  CMatrix h = ginibre(5, 5, rng);
  h = (h + h.adjoint()).eval();
  sdp::Problem p;
  const Index t = p.add_variable();
  sdp::AffineMatrix m(5);
  m.constant() = -h;
  for (Index i = 0; i < 5; ++i) m.add_term(t, i, i, 1.0);
  p.add_psd(std::move(m));
  sdp::LinearExpr obj;
  obj.add(t, 1.0);
  p.minimize(obj);
  auto s = p.solve();
  ASSERT_TRUE(s.ok()) << s.summary();
  const double exact = oracle::herm_eigenvalues(h).maxCoeff();
  EXPECT_NEAR(s.value, exact, 1e-7);
  EXPECT_LE(s.lower_bound, exact + 1e-7);
}

TEST(Solver, TraceConstrainedMinimumIsSmallestEigenvalue) {
  Rng rng(2);
  CMatrix c = ginibre(4, 4, rng);
  c = (c + c.adjoint()).eval();
  sdp::Problem p;
  auto x = p.add_hermitian(4);
  sdp::AffineMatrix b(4);
  x.add_to(b);
  p.add_psd(std::move(b));
  auto tr = x.trace_with(CMatrix::Identity(4, 4));
  tr.constant = -1.0;
  p.add_equality(tr);
  p.minimize(x.trace_with(c));
  auto s = p.solve();
  ASSERT_TRUE(s.ok()) << s.summary();
  EXPECT_NEAR(s.value, oracle::herm_eigenvalues(c).minCoeff(), 1e-7);
  EXPECT_NEAR(x.value(s.y).trace().real(), 1.0, 1e-9);
}

TEST(Solver, ScalarLinearProgram) {
  // minimize x + 2y subject to x >= 1, y >= 0.5, x + y >= 2
  sdp::Problem p;
  const Index x = p.add_variable(), y = p.add_variable();
  sdp::LinearExpr c1, c2, c3, obj;
  c1.add(x, 1.0).constant = -1.0;
  c2.add(y, 1.0).constant = -0.5;
  c3.add(x, 1.0).add(y, 1.0).constant = -2.0;
  p.add_nonneg(c1);
  p.add_nonneg(c2);
  p.add_nonneg(c3);
  obj.add(x, 1.0).add(y, 2.0);
  p.minimize(obj);
  auto s = p.solve();
  ASSERT_TRUE(s.ok()) << s.summary();
  EXPECT_NEAR(s.value, 2.5, 1e-7);
  EXPECT_NEAR(s.y[x], 1.5, 1e-6);
}

TEST(Solver, HermitianVariableRoundTrip) {
  sdp::HermitianVar v{3, 0};
  RVector y = RVector::LinSpaced(9, 0.1, 0.9);
  CMatrix m = v.value(y);
  EXPECT_LT((m - m.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
  CMatrix w = CMatrix::Random(3, 3);
  w = (w + w.adjoint()).eval();
  EXPECT_NEAR(v.trace_with(w).eval(y), (m * w).trace().real(), 1e-12);
}
