#pragma once

// Permutation symmetry of n-fold tensor powers: orbits of index pairs under S_n,
// the orbit basis, tensor-power coefficients, group averaging and the
// orbit-coordinate form of the parallel channel test.

#include "qcd/hypothesis.hpp"
#include "qcd/linalg.hpp"
#include "qcd/sdp.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace qcd {

/// Row multi-index i and column multi-index j of a matrix entry on (C^d)^{(x)n}.
struct MultiIndexPair {
  std::vector<int> i, j;
  bool operator==(const MultiIndexPair&) const = default;
};

struct Orbit {
  std::vector<int> letters;  // sorted letters i_k * d + j_k
  MultiIndexPair rep;        // lexicographically smallest member
  std::uint64_t size = 0;
};

namespace detail {

inline std::uint64_t factorial(int n) {
  std::uint64_t f = 1;
  for (int k = 2; k <= n; ++k) f *= static_cast<std::uint64_t>(k);
  return f;
}

inline std::uint64_t multiset_count(std::uint64_t kinds, int n) {
  // C(kinds + n - 1, n), exact for the sizes used here
  std::uint64_t c = 1;
  for (int k = 1; k <= n; ++k) c = c * (kinds + static_cast<std::uint64_t>(k) - 1) / static_cast<std::uint64_t>(k);
  return c;
}

inline std::uint64_t multinomial(const std::vector<int>& sorted_letters) {
  const int n = static_cast<int>(sorted_letters.size());
  std::uint64_t out = factorial(n);
  for (std::size_t a = 0; a < sorted_letters.size();) {
    std::size_t b = a;
    while (b < sorted_letters.size() && sorted_letters[b] == sorted_letters[a]) ++b;
    out /= factorial(static_cast<int>(b - a));
    a = b;
  }
  return out;
}

inline std::vector<int> digits(Index x, int d, int n) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int k = n - 1; k >= 0; --k) {
    out[static_cast<std::size_t>(k)] = static_cast<int>(x % d);
    x /= d;
  }
  return out;
}

}  // namespace detail

inline std::uint64_t orbit_size(const MultiIndexPair& p, int d) {
  if (p.i.size() != p.j.size()) throw std::invalid_argument("orbit_size: index vectors differ in length");
  std::vector<int> letters;
  for (std::size_t k = 0; k < p.i.size(); ++k) {
    if (p.i[k] < 0 || p.i[k] >= d || p.j[k] < 0 || p.j[k] >= d) throw std::invalid_argument("orbit_size: index out of range");
    letters.push_back(p.i[k] * d + p.j[k]);
  }
  std::sort(letters.begin(), letters.end());
  return detail::multinomial(letters);
}

class OrbitBasis {
 public:
  int d = 0;
  int n = 0;
  std::vector<Orbit> orbits;

  std::size_t size() const { return orbits.size(); }
  Index dim() const {
    Index D = 1;
    for (int k = 0; k < n; ++k) D *= d;
    return D;
  }

  std::size_t id_of_letters(std::vector<int> letters) const {
    std::sort(letters.begin(), letters.end());
    auto it = lookup_.find(key(letters));
    if (it == lookup_.end()) throw std::out_of_range("orbit lookup failed");
    return it->second;
  }

  std::size_t id_of(const MultiIndexPair& p) const {
    std::vector<int> letters;
    for (std::size_t k = 0; k < p.i.size(); ++k) letters.push_back(p.i[k] * d + p.j[k]);
    return id_of_letters(std::move(letters));
  }

  /// Orbit of the matrix entry (row, col) in copy-major order.
  std::size_t id_of_entry(Index row, Index col) const {
    auto a = detail::digits(row, d, n), b = detail::digits(col, d, n);
    std::vector<int> letters(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < letters.size(); ++k) letters[k] = a[k] * d + b[k];
    return id_of_letters(std::move(letters));
  }

  /// Orbit of the transposed pairs (j, i).
  std::size_t transpose(std::size_t r) const {
    std::vector<int> letters;
    for (int l : orbits.at(r).letters) letters.push_back((l % d) * d + l / d);
    return id_of_letters(std::move(letters));
  }

  /// True when every letter has i_k = j_k (the orbit meets the diagonal).
  bool diagonal(std::size_t r) const {
    for (int l : orbits.at(r).letters)
      if (l / d != l % d) return false;
    return true;
  }

  /// Orbit id of every entry, row-major over the d^n x d^n matrix.
  std::vector<std::uint32_t> entry_map() const {
    const Index D = dim();
    std::vector<std::uint32_t> out(static_cast<std::size_t>(D * D));
    for (Index x = 0; x < D; ++x)
      for (Index y = 0; y < D; ++y) out[static_cast<std::size_t>(x * D + y)] = static_cast<std::uint32_t>(id_of_entry(x, y));
    return out;
  }

  void insert(Orbit o) {
    lookup_.emplace(key(o.letters), orbits.size());
    orbits.push_back(std::move(o));
  }

 private:
  std::uint64_t key(const std::vector<int>& sorted) const {
    std::uint64_t k = 0;
    for (int l : sorted) k = k * static_cast<std::uint64_t>(d * d) + static_cast<std::uint64_t>(l);
    return k;
  }

  std::unordered_map<std::uint64_t, std::size_t> lookup_;
};

/// All orbits of S_n acting on index pairs of (C^d)^{(x)n}.
inline OrbitBasis orbit_enumerate(int d, int n, std::uint64_t max_orbits = 2000000) {
  if (d < 1 || n < 1) throw std::invalid_argument("orbit_enumerate: d and n must be positive");
  const auto kinds = static_cast<std::uint64_t>(d) * static_cast<std::uint64_t>(d);
  if (static_cast<double>(n) * std::log2(static_cast<double>(kinds)) > 63.0)
    throw std::length_error("orbit_enumerate: letter keys exceed 64 bits");
  const std::uint64_t count = detail::multiset_count(kinds, n);
  if (count > max_orbits)
    throw std::length_error("orbit_enumerate: " + std::to_string(count) + " orbits exceed the cap of " +
                            std::to_string(max_orbits));
  OrbitBasis basis;
  basis.d = d;
  basis.n = n;
  basis.orbits.reserve(count);
  std::vector<int> letters(static_cast<std::size_t>(n), 0);
  const int top = d * d;
  while (true) {
    Orbit o;
    o.letters = letters;
    for (int l : letters) {
      o.rep.i.push_back(l / d);
      o.rep.j.push_back(l % d);
    }
    o.size = detail::multinomial(letters);
    basis.insert(std::move(o));
    // next non-decreasing sequence
    int k = n - 1;
    while (k >= 0 && letters[static_cast<std::size_t>(k)] == top - 1) --k;
    if (k < 0) break;
    const int v = letters[static_cast<std::size_t>(k)] + 1;
    for (int t = k; t < n; ++t) letters[static_cast<std::size_t>(t)] = v;
  }
  return basis;
}

/// gamma_r = prod_k A(i_k, j_k) on each orbit representative, so that
/// A^{(x)n} = sum_r gamma_r C_r.
inline std::vector<Complex> tensor_power_coeffs(const CMatrix& a, const OrbitBasis& basis) {
  if (a.rows() != basis.d || a.cols() != basis.d) throw std::invalid_argument("tensor_power_coeffs: dimension mismatch");
  std::vector<Complex> out;
  out.reserve(basis.size());
  for (const auto& o : basis.orbits) {
    Complex g = 1.0;
    for (int l : o.letters) g *= a(l / basis.d, l % basis.d);
    out.push_back(g);
  }
  return out;
}

/// sum_r coeffs[r] C_r as a dense matrix.
inline CMatrix reconstruct(const OrbitBasis& basis, const std::vector<Complex>& coeffs) {
  if (coeffs.size() != basis.size()) throw std::invalid_argument("reconstruct: coefficient count mismatch");
  const Index D = basis.dim();
  auto map = basis.entry_map();
  CMatrix out(D, D);
  for (Index x = 0; x < D; ++x)
    for (Index y = 0; y < D; ++y) out(x, y) = coeffs[map[static_cast<std::size_t>(x * D + y)]];
  return out;
}

/// Orbit coordinates of X: the mean of its entries over each orbit.
inline std::vector<Complex> orbit_coordinates(const CMatrix& x, const OrbitBasis& basis) {
  const Index D = basis.dim();
  if (x.rows() != D || x.cols() != D) throw std::invalid_argument("orbit_coordinates: dimension mismatch");
  auto map = basis.entry_map();
  std::vector<Complex> sum(basis.size(), 0.0);
  for (Index i = 0; i < D; ++i)
    for (Index j = 0; j < D; ++j) sum[map[static_cast<std::size_t>(i * D + j)]] += x(i, j);
  for (std::size_t r = 0; r < sum.size(); ++r) sum[r] /= static_cast<double>(basis.orbits[r].size);
  return sum;
}

/// Projection onto the permutation-invariant operators via orbit means.
inline CMatrix orbit_projection(const CMatrix& x, const OrbitBasis& basis) {
  return reconstruct(basis, orbit_coordinates(x, basis));
}

/// (1/n!) sum_pi P(pi) X P(pi)^dag over permutations of the n copies.
/// Enumerates the group when that is affordable, otherwise uses the orbit
/// projection, which is the same operator.
inline CMatrix group_average(const CMatrix& x, int d, int n) {
  Index D = 1;
  for (int k = 0; k < n; ++k) D *= d;
  if (x.rows() != D || x.cols() != D) throw std::invalid_argument("group_average: dimension mismatch");
  const double work = static_cast<double>(detail::factorial(std::min(n, 20))) * static_cast<double>(D) * static_cast<double>(D);
  if (n > 8 || work > 5e7) return orbit_projection(x, orbit_enumerate(d, n));

  std::vector<std::vector<int>> dig(static_cast<std::size_t>(D));
  for (Index a = 0; a < D; ++a) dig[static_cast<std::size_t>(a)] = detail::digits(a, d, n);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<Index> image(static_cast<std::size_t>(D));
  CMatrix acc = CMatrix::Zero(D, D);
  std::uint64_t count = 0;
  do {
    for (Index a = 0; a < D; ++a) {
      Index v = 0;
      for (int k = 0; k < n; ++k) v = v * d + dig[static_cast<std::size_t>(a)][static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
      image[static_cast<std::size_t>(a)] = v;
    }
    for (Index a = 0; a < D; ++a)
      for (Index b = 0; b < D; ++b) acc(a, b) += x(image[static_cast<std::size_t>(a)], image[static_cast<std::size_t>(b)]);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return acc / static_cast<double>(count);
}

/// For RB = R (x) B per copy, the R and B orbits obtained by splitting each
/// letter of an RB orbit. C^R_z (x) C^B_w equals the sum of the RB orbits
/// mapped to (z, w), and distinct RB orbits never share an entry.
struct ProductOrbitMap {
  std::vector<std::size_t> r_of, b_of;
};

inline ProductOrbitMap product_orbit_map(const OrbitBasis& rb, const OrbitBasis& r, const OrbitBasis& b) {
  if (rb.d != r.d * b.d || rb.n != r.n || rb.n != b.n) throw std::invalid_argument("product_orbit_map: incompatible bases");
  ProductOrbitMap m;
  for (const auto& o : rb.orbits) {
    std::vector<int> lr, lb;
    for (int l : o.letters) {
      const int x = l / rb.d, y = l % rb.d;
      lr.push_back((x / b.d) * r.d + (y / b.d));
      lb.push_back((x % b.d) * b.d + (y % b.d));
    }
    m.r_of.push_back(r.id_of_letters(std::move(lr)));
    m.b_of.push_back(b.id_of_letters(std::move(lb)));
  }
  return m;
}

struct ReducedProblem {
  int n = 0;
  Index d_r = 0, d_b = 0;
  OrbitBasis rb, r, b;
  std::vector<Complex> gamma_e, gamma_f;
  ProductOrbitMap product;
  std::vector<std::uint32_t> entry_orbit;  // RB entries, row-major, copy-major order
};

inline ReducedProblem build_reduced_problem(const Channel& e, const Channel& f, int n) {
  if (e.dim_in() != f.dim_in() || e.dim_out() != f.dim_out())
    throw std::invalid_argument("build_reduced_problem: dimension mismatch");
  ReducedProblem p;
  p.n = n;
  p.d_r = e.dim_in();
  p.d_b = e.dim_out();
  p.rb = orbit_enumerate(static_cast<int>(p.d_r * p.d_b), n);
  p.r = orbit_enumerate(static_cast<int>(p.d_r), n);
  p.b = orbit_enumerate(static_cast<int>(p.d_b), n);
  p.gamma_e = tensor_power_coeffs(e.choi().matrix(), p.rb);
  p.gamma_f = tensor_power_coeffs(f.choi().matrix(), p.rb);
  p.product = product_orbit_map(p.rb, p.r, p.b);
  p.entry_orbit = p.rb.entry_map();
  return p;
}

struct ReducedOptions {
  sdp::Options solver;
  /// Upper limit on the full-space dimension (d_R d_B)^n used for the PSD checks.
  Index max_dim = 256;
  double zero_beta = 1e-12;
};

namespace detail {

// Real parametrization of Hermitian combinations sum_r y_r C_r: one variable
// per self-transposed orbit, (real, imaginary) pairs for r < r^T.
struct OrbitVariables {
  std::vector<std::vector<std::pair<Index, Complex>>> terms;  // per orbit: coefficient = sum w * var
  Index count = 0;
};

inline OrbitVariables orbit_variables(const OrbitBasis& basis, sdp::Problem& prob) {
  OrbitVariables v;
  v.terms.resize(basis.size());
  for (std::size_t r = 0; r < basis.size(); ++r) {
    const std::size_t t = basis.transpose(r);
    if (t == r) {
      const Index u = prob.add_variable();
      v.terms[r].push_back({u, 1.0});
      ++v.count;
    } else if (r < t) {
      const Index u = prob.add_variables(2);
      v.terms[r] = {{u, 1.0}, {u + 1, Complex(0, 1)}};
      v.terms[t] = {{u, 1.0}, {u + 1, Complex(0, -1)}};
      v.count += 2;
    }
  }
  return v;
}

inline std::vector<Complex> orbit_values(const OrbitVariables& v, const RVector& y) {
  std::vector<Complex> out(v.terms.size(), 0.0);
  for (std::size_t r = 0; r < v.terms.size(); ++r)
    for (const auto& [var, w] : v.terms[r]) out[r] += w * y[var];
  return out;
}

// Re Tr(sum_r y_r C_r A) with A = sum_s gamma_s C_s: Tr(C_r C_s) = |O_r| [s = r^T].
inline sdp::LinearExpr orbit_trace(const OrbitBasis& basis, const OrbitVariables& v, const std::vector<Complex>& gamma) {
  std::unordered_map<Index, double> acc;
  for (std::size_t r = 0; r < basis.size(); ++r) {
    const Complex g = gamma[basis.transpose(r)] * static_cast<double>(basis.orbits[r].size);
    for (const auto& [var, w] : v.terms[r]) acc[var] += (w * g).real();
  }
  std::vector<std::pair<Index, double>> sorted(acc.begin(), acc.end());
  std::sort(sorted.begin(), sorted.end());
  sdp::LinearExpr e;
  for (const auto& [var, c] : sorted) e.add(var, c);
  return e;
}

}  // namespace detail

/// Parallel channel test in orbit coordinates. Omega = sum_r y_r C^{RB}_r and
/// rho = sum_z z_z C^R_z; positivity of Omega and rho (x) 1 - Omega is imposed
/// on the reconstructed full-space matrices.
inline ChannelTestResult reduced_channel_dh(const Channel& e, const Channel& f, int n, double eps,
                                            const ReducedOptions& opt = {}) {
  if (n < 1) throw std::invalid_argument("reduced_channel_dh: n must be positive");
  if (!(eps >= 0.0 && eps < 1.0)) throw std::invalid_argument("reduced_channel_dh: eps outside [0,1)");
  Index D = 1;
  for (int k = 0; k < n; ++k) D *= e.dim_in() * e.dim_out();
  if (D > opt.max_dim)
    throw std::invalid_argument("reduced_channel_dh: full-space dimension " + std::to_string(D) + " exceeds the cap of " +
                                std::to_string(opt.max_dim));
  const ReducedProblem p = build_reduced_problem(e, f, n);

  sdp::Problem prob;
  const auto yv = detail::orbit_variables(p.rb, prob);
  const auto zv = detail::orbit_variables(p.r, prob);

  std::vector<bool> b_diag(p.b.size());
  for (std::size_t w = 0; w < p.b.size(); ++w) b_diag[w] = p.b.diagonal(w);

  sdp::AffineMatrix pos(D), dom(D);
  for (Index x = 0; x < D; ++x)
    for (Index y = 0; y < D; ++y) {
      const std::size_t o = p.entry_orbit[static_cast<std::size_t>(x * D + y)];
      for (const auto& [var, w] : yv.terms[o]) {
        pos.add_term(var, x, y, w);
        dom.add_term(var, x, y, -w);
      }
      if (b_diag[p.product.b_of[o]])
        for (const auto& [var, w] : zv.terms[p.product.r_of[o]]) dom.add_term(var, x, y, w);
    }
  prob.add_psd(std::move(pos));
  prob.add_psd(std::move(dom));

  auto accept = detail::orbit_trace(p.rb, yv, p.gamma_e);
  accept.constant = -(1.0 - eps);
  prob.add_nonneg(accept);

  sdp::LinearExpr tr;
  for (std::size_t z = 0; z < p.r.size(); ++z)
    if (p.r.diagonal(z))
      for (const auto& [var, w] : zv.terms[z]) tr.add(var, w.real() * static_cast<double>(p.r.orbits[z].size));
  tr.constant = -1.0;
  prob.add_equality(tr);
  prob.minimize(detail::orbit_trace(p.rb, yv, p.gamma_f));

  ChannelTestResult out;
  out.n = n;
  out.solution = prob.solve_or_throw(opt.solver, "reduced_channel_dh");
  const auto ycoef = detail::orbit_values(yv, out.solution.y);
  const auto zcoef = detail::orbit_values(zv, out.solution.y);
  out.omega = reconstruct(p.rb, ycoef);
  double beta = 0.0, accepted = 0.0;
  for (std::size_t r = 0; r < p.rb.size(); ++r) {
    const double size = static_cast<double>(p.rb.orbits[r].size);
    beta += (ycoef[r] * p.gamma_f[p.rb.transpose(r)]).real() * size;
    accepted += (ycoef[r] * p.gamma_e[p.rb.transpose(r)]).real() * size;
  }
  out.beta = beta < opt.zero_beta ? 0.0 : beta;
  out.alpha_achieved = std::clamp(1.0 - accepted, 0.0, 1.0);
  out.value = out.beta > 0 ? -std::log2(out.beta) : kInf;
  std::vector<SystemLayout::Subsystem> parts;
  for (int k = 0; k < n; ++k) parts.push_back({"R" + std::to_string(k + 1), p.d_r});
  out.input_state = DensityMatrix::project(reconstruct(p.r, zcoef), SystemLayout(parts));
  return out;
}

}  // namespace qcd
