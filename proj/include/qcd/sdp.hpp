#pragma once

// Primal-dual interior-point solver for semidefinite programs over complex
// Hermitian blocks, plus a small modeling layer.
//
// Models are stated in "inequality form": real decision variables y,
//   minimize   c^T y + c0
//   subject to M_k(y) = C_k + sum_i y_i G_{k,i}  is PSD  for every block k,
//              linear equalities in y.
// Equalities are eliminated by substitution; the remaining problem is the
// dual of a standard-form SDP and is solved with the HKM search direction and
// Mehrotra's predictor-corrector scheme.

#include "qcd/linalg.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace qcd::sdp {

struct Entry {
  Index row = 0;
  Index col = 0;
  Complex value;
};

struct LinearExpr {
  double constant = 0.0;
  std::vector<std::pair<Index, double>> terms;

  LinearExpr& add(Index var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
    return *this;
  }
  LinearExpr& operator+=(const LinearExpr& o) {
    constant += o.constant;
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    return *this;
  }
  LinearExpr& operator*=(double s) {
    constant *= s;
    for (auto& t : terms) t.second *= s;
    return *this;
  }
  double eval(const RVector& y) const {
    double v = constant;
    for (const auto& [i, c] : terms) v += c * y[i];
    return v;
  }
};

/// Hermitian-valued affine expression C + sum_i y_i G_i with sparse G_i.
class AffineMatrix {
 public:
  explicit AffineMatrix(Index dim) : dim_(dim), constant_(CMatrix::Zero(dim, dim)) {}

  Index dim() const { return dim_; }
  const CMatrix& constant() const { return constant_; }
  CMatrix& constant() { return constant_; }
  const std::unordered_map<Index, std::vector<Entry>>& terms() const { return terms_; }

  void add_term(Index var, Index row, Index col, Complex value) {
    if (value != Complex(0.0)) terms_[var].push_back({row, col, value});
  }

  CMatrix eval(const RVector& y) const {
    CMatrix m = constant_;
    for (const auto& [var, entries] : terms_)
      for (const auto& e : entries) m(e.row, e.col) += y[var] * e.value;
    return m;
  }

 private:
  Index dim_;
  CMatrix constant_;
  std::unordered_map<Index, std::vector<Entry>> terms_;
};

/// A d x d Hermitian matrix variable occupying d^2 consecutive real variables:
/// one per diagonal entry, then (real, imaginary) pairs for each a < b.
struct HermitianVar {
  Index dim = 0;
  Index first = 0;

  Index count() const { return dim * dim; }
  Index diag(Index a) const { return first + a; }
  Index re(Index a, Index b) const { return first + dim + 2 * pair_index(a, b); }
  Index im(Index a, Index b) const { return re(a, b) + 1; }

  Index pair_index(Index a, Index b) const {
    // position of (a, b), a < b, in row-major upper-triangle order
    return a * dim - a * (a + 1) / 2 + (b - a - 1);
  }

  /// Calls f(var, entries) for every real parameter with its basis matrix.
  template <class F>
  void for_each_basis(F&& f) const {
    for (Index a = 0; a < dim; ++a) f(diag(a), std::vector<Entry>{{a, a, 1.0}});
    for (Index a = 0; a < dim; ++a)
      for (Index b = a + 1; b < dim; ++b) {
        f(re(a, b), std::vector<Entry>{{a, b, 1.0}, {b, a, 1.0}});
        f(im(a, b), std::vector<Entry>{{a, b, Complex(0, 1)}, {b, a, Complex(0, -1)}});
      }
  }

  CMatrix value(const RVector& y) const {
    CMatrix m(dim, dim);
    for (Index a = 0; a < dim; ++a) {
      m(a, a) = y[diag(a)];
      for (Index b = a + 1; b < dim; ++b) {
        m(a, b) = Complex(y[re(a, b)], y[im(a, b)]);
        m(b, a) = std::conj(m(a, b));
      }
    }
    return m;
  }

  /// Re Tr(H W) as a linear expression.
  LinearExpr trace_with(const CMatrix& w) const {
    LinearExpr e;
    for_each_basis([&](Index var, const std::vector<Entry>& basis) {
      double v = 0.0;
      for (const auto& b : basis) v += (b.value * w(b.col, b.row)).real();
      e.add(var, v);
    });
    return e;
  }

  /// Adds scale * H into the given affine matrix at offset (r0, c0).
  void add_to(AffineMatrix& m, double scale = 1.0, Index r0 = 0, Index c0 = 0) const {
    for_each_basis([&](Index var, const std::vector<Entry>& basis) {
      for (const auto& b : basis) m.add_term(var, r0 + b.row, c0 + b.col, scale * b.value);
    });
  }
};

enum class Status { optimal, near_optimal, max_iterations, numerical_failure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::near_optimal: return "near_optimal";
    case Status::max_iterations: return "max_iterations";
    case Status::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

struct Options {
  double tol = 1e-9;
  int max_iterations = 120;
  /// Accuracy accepted when progress stalls before `tol` is reached.
  double stall_tol = 1e-7;
  bool verbose = false;
};

struct Solution {
  Status status = Status::numerical_failure;
  RVector y;                       // values of the model variables
  double value = 0.0;              // c^T y + c0 at y
  double lower_bound = 0.0;        // certified by the multipliers
  std::vector<CMatrix> multipliers;  // one per PSD block (equalities excluded)
  int iterations = 0;
  double rel_gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;

  bool ok() const { return status == Status::optimal || status == Status::near_optimal; }

  std::string summary() const {
    std::ostringstream os;
    os << "status=" << to_string(status) << " iterations=" << iterations << " rel_gap=" << rel_gap
       << " pinf=" << primal_infeasibility << " dinf=" << dual_infeasibility;
    return os.str();
  }
};

class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const Solution& s, const std::string& what)
      : std::runtime_error(what + " (" + s.summary() + ")"), status_(s.status) {}
  Status status() const { return status_; }

 private:
  Status status_;
};

namespace detail {

struct Block {
  Index n = 0;
  CMatrix c;                               // Z = C - sum y_i A_i
  std::vector<Index> vars;                 // solver variables touching the block
  std::vector<std::vector<Entry>> coeffs;  // A_i entries, aligned with vars
};

inline double inner(const std::vector<Entry>& a, const CMatrix& m) {
  double s = 0.0;
  for (const auto& e : a) s += (e.value * m(e.col, e.row)).real();
  return s;
}

inline void accumulate(CMatrix& m, const std::vector<Entry>& a, double scale) {
  for (const auto& e : a) m(e.row, e.col) += scale * e.value;
}

inline CMatrix herm(const CMatrix& m) { return (m + m.adjoint()) * 0.5; }

// Largest alpha with x + alpha dx PSD (x PD), or +inf.
inline double max_step(const CMatrix& x, const CMatrix& dx) {
  if (x.rows() == 1) {
    const double d = dx(0, 0).real();
    return d >= 0 ? kInf : -x(0, 0).real() / d;
  }
  Eigen::LLT<CMatrix> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  CMatrix linv_dx = llt.matrixL().solve(dx);
  CMatrix s = llt.matrixL().solve(linv_dx.adjoint()).adjoint();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(herm(s), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin >= 0 ? kInf : -1.0 / lmin;
}

class InteriorPoint {
 public:
  InteriorPoint(std::vector<Block> blocks, RVector b, Options opt)
      : blocks_(std::move(blocks)), b_(std::move(b)), opt_(opt), m_(b_.size()) {}

  struct Result {
    Status status;
    RVector y;
    std::vector<CMatrix> x;
    double pobj, dobj;
    int iterations;
    double rel_gap, pinf, dinf;
  };

  Result run() {
    const auto nb = blocks_.size();
    std::vector<CMatrix> x(nb), z(nb);
    RVector y = RVector::Zero(m_);
    Index total_n = 0;
    const double b_norm = b_.norm();
    double c_norm = 0.0;
    for (std::size_t k = 0; k < nb; ++k) {
      const auto& blk = blocks_[k];
      total_n += blk.n;
      c_norm += blk.c.squaredNorm();
      double amax = 0.0, xi_ratio = 0.0;
      for (std::size_t p = 0; p < blk.vars.size(); ++p) {
        double an = 0.0;
        for (const auto& e : blk.coeffs[p]) an += std::norm(e.value);
        an = std::sqrt(an);
        amax = std::max(amax, an);
        xi_ratio = std::max(xi_ratio, (1.0 + std::abs(b_[blk.vars[p]])) / (1.0 + an));
      }
      const double sn = std::sqrt(static_cast<double>(blk.n));
      const double xi = std::max({10.0, sn, static_cast<double>(blk.n) * xi_ratio});
      const double eta = std::max({10.0, sn, amax, blk.c.norm()});
      x[k] = xi * CMatrix::Identity(blk.n, blk.n);
      z[k] = eta * CMatrix::Identity(blk.n, blk.n);
    }
    c_norm = std::sqrt(c_norm);

    Result res{Status::max_iterations, y, x, 0, 0, 0, 0, 0, 0};
    double best_merit = kInf;
    int stall = 0;
    double step_p = 1.0, step_d = 1.0;

    for (int it = 0; it < opt_.max_iterations; ++it) {
      // residuals
      RVector ax = RVector::Zero(m_);
      std::vector<CMatrix> rd(nb);
      double pobj = 0.0, gap = 0.0, rd_norm = 0.0;
      for (std::size_t k = 0; k < nb; ++k) {
        const auto& blk = blocks_[k];
        rd[k] = blk.c - z[k];
        for (std::size_t p = 0; p < blk.vars.size(); ++p) {
          ax[blk.vars[p]] += inner(blk.coeffs[p], x[k]);
          accumulate(rd[k], blk.coeffs[p], -y[blk.vars[p]]);
        }
        pobj += (blk.c.cwiseProduct(x[k].conjugate())).sum().real();
        gap += (x[k].cwiseProduct(z[k].conjugate())).sum().real();
        rd_norm += rd[k].squaredNorm();
      }
      RVector rp = b_ - ax;
      const double dobj = b_.dot(y);
      const double pinf = rp.norm() / (1.0 + b_norm);
      const double dinf = std::sqrt(rd_norm) / (1.0 + c_norm);
      const double rel_gap = std::max(std::abs(pobj - dobj), std::abs(gap)) / (1.0 + std::abs(pobj) + std::abs(dobj));
      const double mu = gap / static_cast<double>(total_n);

      if (opt_.verbose) {
        std::fprintf(stderr, "it %3d pobj %+.10e dobj %+.10e gap %.2e pinf %.2e dinf %.2e\n", it, pobj, dobj, rel_gap,
                     pinf, dinf);
      }

      const double merit = std::max({rel_gap, pinf, dinf});
      if (merit < best_merit) {
        if (merit < 0.9 * best_merit) stall = 0;
        best_merit = merit;
        res = Result{Status::max_iterations, y, x, pobj, dobj, it, rel_gap, pinf, dinf};
      } else {
        ++stall;
      }
      if (rel_gap <= opt_.tol && pinf <= opt_.tol && dinf <= opt_.tol) {
        res.status = Status::optimal;
        return res;
      }
      if (stall >= 6 || std::min(step_p, step_d) < 1e-9) break;

      // inverse of Z and the Schur complement
      std::vector<CMatrix> zinv(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        Eigen::LLT<CMatrix> llt(z[k]);
        if (llt.info() != Eigen::Success) {
          res.status = Status::numerical_failure;
          return finish(res);
        }
        zinv[k] = herm(llt.solve(CMatrix::Identity(blocks_[k].n, blocks_[k].n)));
      }
      Eigen::MatrixXd schur = Eigen::MatrixXd::Zero(m_, m_);
      assemble_schur(x, zinv, schur);
      schur = (schur + schur.transpose()) * 0.5;
      Eigen::LLT<Eigen::MatrixXd> chol;
      if (!factor(schur, chol)) {
        res.status = Status::numerical_failure;
        return finish(res);
      }

      // predictor
      std::vector<CMatrix> dx(nb), dz(nb);
      RVector dy;
      direction(x, z, zinv, rd, rp, chol, 0.0, nullptr, nullptr, dx, dy, dz);
      double ap = 1.0, ad = 1.0;
      for (std::size_t k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(x[k], dx[k]));
        ad = std::min(ad, max_step(z[k], dz[k]));
      }
      double gap_aff = 0.0;
      for (std::size_t k = 0; k < nb; ++k) {
        CMatrix xa = x[k] + ap * dx[k], za = z[k] + ad * dz[k];
        gap_aff += (xa.cwiseProduct(za.conjugate())).sum().real();
      }
      const double ratio = std::max(0.0, gap_aff / gap);
      double sigma = std::min(1.0, ratio * ratio * ratio);
      if (std::min(ap, ad) < 0.2) sigma = std::max(sigma, 0.1);

      // corrector
      std::vector<CMatrix> dx2(nb), dz2(nb);
      RVector dy2;
      direction(x, z, zinv, rd, rp, chol, sigma * mu, &dx, &dz, dx2, dy2, dz2);
      ap = 1.0;
      ad = 1.0;
      for (std::size_t k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(x[k], dx2[k]));
        ad = std::min(ad, max_step(z[k], dz2[k]));
      }
      const double tau = 0.9 + 0.09 * std::min(step_p, step_d);
      step_p = std::min(1.0, tau * ap);
      step_d = std::min(1.0, tau * ad);
      for (std::size_t k = 0; k < nb; ++k) {
        x[k] = herm(x[k] + step_p * dx2[k]);
        z[k] = herm(z[k] + step_d * dz2[k]);
      }
      y += step_d * dy2;
      res.iterations = it + 1;
    }
    if (best_merit <= opt_.stall_tol) res.status = Status::near_optimal;
    return finish(res);
  }

 private:
  Result finish(Result r) const { return r; }

  static bool factor(Eigen::MatrixXd& schur, Eigen::LLT<Eigen::MatrixXd>& chol) {
    chol.compute(schur);
    if (chol.info() == Eigen::Success) return true;
    const double scale = std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
    for (double eps = 1e-14; eps <= 1e-6; eps *= 100) {
      Eigen::MatrixXd reg = schur;
      reg.diagonal().array() += eps * scale;
      chol.compute(reg);
      if (chol.info() == Eigen::Success) return true;
    }
    return false;
  }

  void assemble_schur(const std::vector<CMatrix>& x, const std::vector<CMatrix>& zinv, Eigen::MatrixXd& schur) const {
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const auto& blk = blocks_[k];
      const auto nv = blk.vars.size();
      if (blk.n == 1) {
        const double w = x[k](0, 0).real() * zinv[k](0, 0).real();
        Eigen::VectorXd a(nv);
        for (std::size_t p = 0; p < nv; ++p) a[p] = inner(blk.coeffs[p], CMatrix::Identity(1, 1));
        for (std::size_t p = 0; p < nv; ++p)
          for (std::size_t q = 0; q < nv; ++q) schur(blk.vars[p], blk.vars[q]) += w * a[p] * a[q];
        continue;
      }
      CMatrix t(blk.n, blk.n);
      for (std::size_t q = 0; q < nv; ++q) {
        t.setZero();
        for (const auto& e : blk.coeffs[q]) t.noalias() += e.value * x[k].col(e.row) * zinv[k].row(e.col);
        const Index j = blk.vars[q];
        for (std::size_t p = 0; p < nv; ++p) schur(blk.vars[p], j) += inner(blk.coeffs[p], t);
      }
    }
  }

  // HKM direction for complementarity target mu_target * I, with an optional
  // second-order correction from the predictor step.
  void direction(const std::vector<CMatrix>& x, const std::vector<CMatrix>& z, const std::vector<CMatrix>& zinv,
                 const std::vector<CMatrix>& rd, const RVector& rp, const Eigen::LLT<Eigen::MatrixXd>& chol,
                 double mu_target, const std::vector<CMatrix>* dxa, const std::vector<CMatrix>* dza,
                 std::vector<CMatrix>& dx, RVector& dy, std::vector<CMatrix>& dz) const {
    const auto nb = blocks_.size();
    std::vector<CMatrix> rc(nb);
    RVector rhs = rp;
    for (std::size_t k = 0; k < nb; ++k) {
      const auto& blk = blocks_[k];
      rc[k] = mu_target * CMatrix::Identity(blk.n, blk.n) - x[k] * z[k];
      if (dxa) rc[k] -= (*dxa)[k] * (*dza)[k];
      CMatrix h = (rc[k] - x[k] * rd[k]) * zinv[k];
      for (std::size_t p = 0; p < blk.vars.size(); ++p) rhs[blk.vars[p]] -= inner(blk.coeffs[p], h);
    }
    dy = chol.solve(rhs);
    for (std::size_t k = 0; k < nb; ++k) {
      const auto& blk = blocks_[k];
      dz[k] = rd[k];
      for (std::size_t p = 0; p < blk.vars.size(); ++p) accumulate(dz[k], blk.coeffs[p], -dy[blk.vars[p]]);
      dz[k] = herm(dz[k]);
      dx[k] = herm((rc[k] - x[k] * dz[k]) * zinv[k]);
    }
  }

  std::vector<Block> blocks_;
  RVector b_;
  Options opt_;
  Index m_;
};

}  // namespace detail

class Problem {
 public:
  Index add_variables(Index count) {
    const Index first = n_vars_;
    n_vars_ += count;
    return first;
  }

  Index add_variable() { return add_variables(1); }

  HermitianVar add_hermitian(Index dim) { return HermitianVar{dim, add_variables(dim * dim)}; }

  Index num_variables() const { return n_vars_; }

  /// Requires m(y) to be PSD.
  void add_psd(AffineMatrix m) { blocks_.push_back(std::move(m)); }

  /// Requires e(y) >= 0.
  void add_nonneg(const LinearExpr& e) {
    AffineMatrix m(1);
    m.constant()(0, 0) = e.constant;
    for (const auto& [i, c] : e.terms) m.add_term(i, 0, 0, c);
    blocks_.push_back(std::move(m));
  }

  /// Requires e(y) == 0.
  void add_equality(const LinearExpr& e) { equalities_.push_back(e); }

  void minimize(const LinearExpr& e) { objective_ = e; }

  Solution solve(const Options& opt = {}) const {
    // Each model variable is an affine function of the free solver variables.
    struct Affine {
      double offset = 0.0;
      std::unordered_map<Index, double> coef;
    };
    std::vector<Affine> map(n_vars_);
    for (Index i = 0; i < n_vars_; ++i) map[i].coef[i] = 1.0;
    std::vector<bool> eliminated(n_vars_, false);

    auto substitute = [&](const LinearExpr& e) {
      Affine out;
      out.offset = e.constant;
      for (const auto& [i, c] : e.terms) {
        out.offset += c * map[i].offset;
        for (const auto& [j, cj] : map[i].coef) out.coef[j] += c * cj;
      }
      return out;
    };

    for (const auto& eq : equalities_) {
      Affine a = substitute(eq);
      Index pivot = -1;
      double best = 0.0;
      for (const auto& [j, c] : a.coef)
        if (std::abs(c) > best) {
          best = std::abs(c);
          pivot = j;
        }
      if (pivot < 0 || best < 1e-12) {
        if (std::abs(a.offset) > 1e-9) throw std::invalid_argument("sdp: inconsistent equality constraints");
        continue;
      }
      // pivot = -(offset + sum_{j != pivot} c_j v_j) / c_pivot
      const double cp = a.coef[pivot];
      Affine expr;
      expr.offset = -a.offset / cp;
      for (const auto& [j, c] : a.coef)
        if (j != pivot && c != 0.0) expr.coef[j] = -c / cp;
      for (auto& m : map) {
        auto it = m.coef.find(pivot);
        if (it == m.coef.end()) continue;
        const double w = it->second;
        m.coef.erase(it);
        m.offset += w * expr.offset;
        for (const auto& [j, c] : expr.coef) m.coef[j] += w * c;
      }
      eliminated[pivot] = true;
    }

    std::vector<Index> solver_index(n_vars_, -1);
    Index m = 0;
    for (Index i = 0; i < n_vars_; ++i)
      if (!eliminated[i]) solver_index[i] = m++;

    // objective: minimize c^T v + c0  <=>  maximize b^T v with b = -c
    Affine obj = substitute(objective_);
    RVector b = RVector::Zero(m);
    for (const auto& [j, c] : obj.coef) b[solver_index[j]] -= c;

    std::vector<detail::Block> blocks;
    blocks.reserve(blocks_.size());
    for (const auto& am : blocks_) {
      detail::Block blk;
      blk.n = am.dim();
      blk.c = am.constant();
      std::unordered_map<Index, std::vector<Entry>> per_var;
      for (const auto& [var, entries] : am.terms()) {
        const auto& a = map[var];
        for (const auto& e : entries) blk.c(e.row, e.col) += a.offset * e.value;
        for (const auto& [j, c] : a.coef) {
          if (c == 0.0) continue;
          auto& dst = per_var[solver_index[j]];
          for (const auto& e : entries) dst.push_back({e.row, e.col, -c * e.value});
        }
      }
      blk.c = detail::herm(blk.c);
      std::vector<Index> vars;
      for (const auto& kv : per_var) vars.push_back(kv.first);
      std::sort(vars.begin(), vars.end());
      for (auto v : vars) {
        blk.vars.push_back(v);
        blk.coeffs.push_back(merge(per_var[v]));
      }
      blocks.push_back(std::move(blk));
    }

    detail::InteriorPoint ipm(std::move(blocks), b, opt);
    auto r = ipm.run();

    Solution s;
    s.status = r.status;
    s.iterations = r.iterations;
    s.rel_gap = r.rel_gap;
    s.primal_infeasibility = r.pinf;
    s.dual_infeasibility = r.dinf;
    s.multipliers = std::move(r.x);
    s.y = RVector::Zero(n_vars_);
    for (Index i = 0; i < n_vars_; ++i) {
      double v = map[i].offset;
      for (const auto& [j, c] : map[i].coef) v += c * r.y[solver_index[j]];
      s.y[i] = v;
    }
    s.value = objective_.eval(s.y);
    s.lower_bound = obj.offset - r.pobj;
    return s;
  }

  /// Solves and throws SolverError unless the solver reports success.
  Solution solve_or_throw(const Options& opt, const std::string& context) const {
    Solution s = solve(opt);
    if (!s.ok()) throw SolverError(s, context + ": semidefinite solve failed");
    return s;
  }

 private:
  static std::vector<Entry> merge(std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    std::vector<Entry> out;
    for (const auto& e : entries) {
      if (!out.empty() && out.back().row == e.row && out.back().col == e.col)
        out.back().value += e.value;
      else
        out.push_back(e);
    }
    out.erase(std::remove_if(out.begin(), out.end(), [](const Entry& e) { return std::abs(e.value) < 1e-300; }),
              out.end());
    return out;
  }

  Index n_vars_ = 0;
  std::vector<AffineMatrix> blocks_;
  std::vector<LinearExpr> equalities_;
  LinearExpr objective_;
};

}  // namespace qcd::sdp
