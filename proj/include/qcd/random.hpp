#pragma once

// Seeded random quantum objects (Ginibre / Haar constructions).

#include "qcd/linalg.hpp"

#include <random>

namespace qcd {

using Rng = std::mt19937_64;

inline CMatrix ginibre(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      const double re = g(rng);
      const double im = g(rng);
      m(i, j) = Complex(re, im);
    }
  return m;
}

/// Haar-random unitary via QR with the phases of R's diagonal removed.
inline CMatrix random_unitary(Index d, Rng& rng) {
  Eigen::HouseholderQR<CMatrix> qr(ginibre(d, d, rng));
  CMatrix q = qr.householderQ();
  CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 0; k < d; ++k) {
    const double a = std::abs(r(k, k));
    if (a > 0) q.col(k) *= r(k, k) / a;
  }
  return q;
}

/// Density matrix of the given rank from the induced (Ginibre) measure.
inline DensityMatrix random_density(Index d, Rng& rng, Index rank = 0) {
  if (rank <= 0 || rank > d) rank = d;
  CMatrix g = ginibre(d, rank, rng);
  CMatrix m = g * g.adjoint();
  return DensityMatrix::project(m / m.trace().real());
}

inline PureState random_pure(Index d, Rng& rng) {
  CVector v = ginibre(d, 1, rng).col(0);
  return PureState(v / v.norm());
}

/// Channel from a random isometry d_in -> d_out * n_kraus.
inline Channel random_channel(Index d_in, Index d_out, Rng& rng, Index n_kraus = 0) {
  if (n_kraus <= 0) n_kraus = d_in * d_out;
  n_kraus = std::max(n_kraus, (d_in + d_out - 1) / d_out);
  CMatrix v = random_unitary(d_out * n_kraus, rng).leftCols(d_in);
  std::vector<CMatrix> ks;
  for (Index k = 0; k < n_kraus; ++k) ks.push_back(v.block(k * d_out, 0, d_out, d_in));
  return Channel::from_kraus(std::move(ks), 1e-8);
}

}  // namespace qcd
