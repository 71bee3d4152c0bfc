#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qcd {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Relative threshold below which eigenvalues count as exact zeros.
inline constexpr double kDefaultCutoff = 1e-10;

struct Tolerance {
  static constexpr double hermitian = 1e-10;
  static constexpr double psd = 1e-9;
  static constexpr double trace = 1e-9;
  static constexpr double norm = 1e-10;
  static constexpr double tp = 1e-9;
};

inline double log2_or_neg_inf(double x) {
  return x > 0.0 ? std::log2(x) : -kInf;
}

// ---------------------------------------------------------------------------
// Subsystem bookkeeping

class SystemLayout {
 public:
  struct Subsystem {
    std::string label;
    Index dim = 1;
    bool operator==(const Subsystem&) const = default;
  };

  SystemLayout() = default;
  SystemLayout(std::initializer_list<Subsystem> parts) : parts_(parts) { validate(); }
  explicit SystemLayout(std::vector<Subsystem> parts) : parts_(std::move(parts)) { validate(); }

  static SystemLayout flat(Index dim, std::string label = "A") {
    return SystemLayout({Subsystem{std::move(label), dim}});
  }

  std::size_t size() const { return parts_.size(); }
  bool empty() const { return parts_.empty(); }
  const Subsystem& operator[](std::size_t k) const { return parts_.at(k); }
  const std::vector<Subsystem>& parts() const { return parts_; }

  Index total_dim() const {
    Index d = 1;
    for (const auto& p : parts_) d *= p.dim;
    return d;
  }

  std::vector<Index> dims() const {
    std::vector<Index> out;
    out.reserve(parts_.size());
    for (const auto& p : parts_) out.push_back(p.dim);
    return out;
  }

  std::optional<std::size_t> find(std::string_view label) const {
    for (std::size_t k = 0; k < parts_.size(); ++k)
      if (parts_[k].label == label) return k;
    return std::nullopt;
  }

  std::size_t index_of(std::string_view label) const {
    auto k = find(label);
    if (!k) throw std::invalid_argument("subsystem label '" + std::string(label) + "' not in layout");
    return *k;
  }

  SystemLayout concat(const SystemLayout& other) const {
    auto parts = parts_;
    parts.insert(parts.end(), other.parts_.begin(), other.parts_.end());
    return SystemLayout(std::move(parts));
  }

  SystemLayout replaced(std::size_t k, Index dim, std::string label) const {
    auto parts = parts_;
    parts.at(k) = Subsystem{std::move(label), dim};
    return SystemLayout(std::move(parts));
  }

  SystemLayout select(const std::vector<std::size_t>& keep) const {
    std::vector<Subsystem> parts;
    for (auto k : keep) parts.push_back(parts_.at(k));
    return SystemLayout(std::move(parts));
  }

  bool operator==(const SystemLayout&) const = default;

 private:
  void validate() const {
    for (const auto& p : parts_)
      if (p.dim < 1) throw std::invalid_argument("subsystem '" + p.label + "' has non-positive dimension");
  }

  std::vector<Subsystem> parts_;
};

// ---------------------------------------------------------------------------
// Scalar-generic index kernels. These use explicit loops so that they also
// work for exact scalar types that Eigen's expression templates reject.

namespace detail {

inline std::vector<Index> strides_of(const std::vector<Index>& dims) {
  std::vector<Index> s(dims.size(), 1);
  for (std::size_t k = dims.size(); k-- > 1;) s[k - 1] = s[k] * dims[k];
  return s;
}

// Offsets of all multi-indices over the chosen subsystems, in row-major order
// of the chosen subsystems, measured in strides of the full space.
inline std::vector<Index> offsets_over(const std::vector<Index>& dims, const std::vector<std::size_t>& which) {
  auto strides = strides_of(dims);
  std::vector<Index> out{0};
  for (auto k : which) {
    std::vector<Index> next;
    next.reserve(out.size() * static_cast<std::size_t>(dims[k]));
    for (auto base : out)
      for (Index a = 0; a < dims[k]; ++a) next.push_back(base + a * strides[k]);
    out = std::move(next);
  }
  return out;
}

inline Index product(const std::vector<Index>& dims) {
  return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>());
}

}  // namespace detail

template <class S>
Matrix<S> zeros(Index rows, Index cols) {
  Matrix<S> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = S(0);
  return m;
}

template <class S>
Matrix<S> kron(const Matrix<S>& a, const Matrix<S>& b) {
  Matrix<S> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index k = 0; k < b.rows(); ++k)
        for (Index l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

template <class S>
Matrix<S> kron_power(const Matrix<S>& a, int n) {
  if (n < 1) throw std::invalid_argument("kron_power: n must be positive");
  Matrix<S> out = a;
  for (int k = 1; k < n; ++k) out = kron(out, a);
  return out;
}

template <class S>
Matrix<S> matmul(const Matrix<S>& a, const Matrix<S>& b) {
  Matrix<S> c(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j) {
      S s(0);
      for (Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

/// Partial trace keeping the subsystems flagged in `keep` (in their original order).
template <class S>
Matrix<S> partial_trace(const Matrix<S>& x, const std::vector<Index>& dims, const std::vector<std::size_t>& keep) {
  if (detail::product(dims) != x.rows() || x.rows() != x.cols())
    throw std::invalid_argument("partial_trace: dims do not match operator");
  std::vector<std::size_t> traced;
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (std::find(keep.begin(), keep.end(), k) == keep.end()) traced.push_back(k);
  auto kept_off = detail::offsets_over(dims, keep);
  auto traced_off = detail::offsets_over(dims, traced);
  const auto n = static_cast<Index>(kept_off.size());
  Matrix<S> out(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) {
      S s(0);
      for (auto t : traced_off) s += x(kept_off[a] + t, kept_off[b] + t);
      out(a, b) = s;
    }
  return out;
}

/// Reorders subsystems: new position p holds old subsystem perm[p].
template <class S>
Matrix<S> permute_subsystems(const Matrix<S>& x, const std::vector<Index>& dims, const std::vector<std::size_t>& perm) {
  if (perm.size() != dims.size()) throw std::invalid_argument("permute_subsystems: permutation size mismatch");
  auto old_off = detail::offsets_over(dims, perm);
  const auto n = static_cast<Index>(old_off.size());
  Matrix<S> out(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) out(i, j) = x(old_off[i], old_off[j]);
  return out;
}

/// Applies a map given by its Choi matrix (input-major, unnormalized) to
/// subsystem `target` of x, identity elsewhere.
template <class S>
Matrix<S> apply_choi(const Matrix<S>& choi, Index d_in, Index d_out, const Matrix<S>& x,
                     const std::vector<Index>& dims, std::size_t target) {
  if (target >= dims.size() || dims[target] != d_in)
    throw std::invalid_argument("apply_choi: target dimension does not match channel input");
  if (choi.rows() != d_in * d_out) throw std::invalid_argument("apply_choi: Choi size mismatch");
  Index pre = 1, post = 1;
  for (std::size_t k = 0; k < target; ++k) pre *= dims[k];
  for (std::size_t k = target + 1; k < dims.size(); ++k) post *= dims[k];
  const Index n_out = pre * d_out * post;
  Matrix<S> out = zeros<S>(n_out, n_out);
  auto in_idx = [&](Index p, Index a, Index q) { return (p * d_in + a) * post + q; };
  auto out_idx = [&](Index p, Index b, Index q) { return (p * d_out + b) * post + q; };
  for (Index p = 0; p < pre; ++p)
    for (Index q = 0; q < post; ++q)
      for (Index p2 = 0; p2 < pre; ++p2)
        for (Index q2 = 0; q2 < post; ++q2)
          for (Index a = 0; a < d_in; ++a)
            for (Index a2 = 0; a2 < d_in; ++a2) {
              const S& xv = x(in_idx(p, a, q), in_idx(p2, a2, q2));
              if (xv == S(0)) continue;
              for (Index b = 0; b < d_out; ++b)
                for (Index b2 = 0; b2 < d_out; ++b2) {
                  const S& g = choi(a * d_out + b, a2 * d_out + b2);
                  if (g == S(0)) continue;
                  out(out_idx(p, b, q), out_idx(p2, b2, q2)) += xv * g;
                }
            }
  return out;
}

/// Choi matrix sum_{ij} |i><j| (x) map(|i><j|) of a linear map given as a callable.
template <class S, class Map>
Matrix<S> choi_from_map(Index d_in, Index d_out, Map&& map) {
  Matrix<S> choi = zeros<S>(d_in * d_out, d_in * d_out);
  for (Index i = 0; i < d_in; ++i)
    for (Index j = 0; j < d_in; ++j) {
      Matrix<S> unit = zeros<S>(d_in, d_in);
      unit(i, j) = S(1);
      Matrix<S> img = map(unit);
      if (img.rows() != d_out || img.cols() != d_out) throw std::invalid_argument("choi_from_map: output size mismatch");
      for (Index a = 0; a < d_out; ++a)
        for (Index b = 0; b < d_out; ++b) choi(i * d_out + a, j * d_out + b) = img(a, b);
    }
  return choi;
}

// ---------------------------------------------------------------------------
// Spectral tools

struct Spectrum {
  RVector values;   // ascending
  CMatrix vectors;  // columns are eigenvectors
};

/// Hermitian eigen-decomposition carried out in extended precision, which
/// resolves eigenvalues near 1e-16 that double arithmetic smears.
inline Spectrum eigh(const CMatrix& h) {
  using CL = std::complex<long double>;
  using ML = Eigen::Matrix<CL, Eigen::Dynamic, Eigen::Dynamic>;
  ML hl = h.cast<CL>();
  ML sym = (hl + hl.adjoint()) * CL(0.5L);
  Eigen::SelfAdjointEigenSolver<ML> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigh: eigen-decomposition failed");
  Spectrum s;
  s.values = es.eigenvalues().cast<double>();
  s.vectors = es.eigenvectors().cast<Complex>();
  return s;
}

inline RVector eigvalsh(const CMatrix& h) {
  CMatrix sym = (h + h.adjoint()) * 0.5;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double max_abs(const RVector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// Indices of eigenvalues retained above the relative cutoff.
inline std::vector<Index> retained(const RVector& values, double cutoff = kDefaultCutoff) {
  const double scale = max_abs(values);
  std::vector<Index> out;
  for (Index k = 0; k < values.size(); ++k)
    if (std::abs(values[k]) > cutoff * scale) out.push_back(k);
  return out;
}

/// Applies f to the retained spectrum; eigenvalues below the cutoff map to 0.
inline CMatrix mat_func(const CMatrix& h, const std::function<double(double)>& f, double cutoff = kDefaultCutoff) {
  Spectrum s = eigh(h);
  CMatrix out = CMatrix::Zero(h.rows(), h.cols());
  for (Index k : retained(s.values, cutoff)) {
    const double v = f(s.values[k]);
    if (!std::isfinite(v))
      throw std::domain_error("mat_func: function undefined on retained eigenvalue " + std::to_string(s.values[k]));
    out += v * s.vectors.col(k) * s.vectors.col(k).adjoint();
  }
  return out;
}

inline CMatrix support_projector(const CMatrix& h, double cutoff = kDefaultCutoff) {
  return mat_func(h, [](double v) { return v > 0 ? 1.0 : 0.0; }, cutoff);
}

// ---------------------------------------------------------------------------
// Quantum objects

class HermitianOperator {
 public:
  HermitianOperator() = default;

  explicit HermitianOperator(CMatrix m, SystemLayout layout = {}) : m_(std::move(m)), layout_(std::move(layout)) {
    check_shape();
    if (!m_.allFinite()) throw std::invalid_argument("operator has non-finite entries");
    const double scale = std::max(1.0, m_.cwiseAbs().rowwise().sum().maxCoeff());
    const double asym = (m_ - m_.adjoint()).cwiseAbs().rowwise().sum().maxCoeff();
    if (asym > Tolerance::hermitian * scale) throw std::invalid_argument("operator is not Hermitian");
    m_ = (m_ + m_.adjoint()) * 0.5;
  }

  const CMatrix& matrix() const { return m_; }
  const SystemLayout& layout() const { return layout_; }
  Index dim() const { return m_.rows(); }
  double trace() const { return m_.trace().real(); }

 protected:
  struct Trusted {};
  HermitianOperator(Trusted, CMatrix m, SystemLayout layout) : m_(std::move(m)), layout_(std::move(layout)) {
    check_shape();
  }

  void check_shape() {
    if (m_.rows() != m_.cols()) throw std::invalid_argument("operator is not square");
    if (layout_.empty()) layout_ = SystemLayout::flat(m_.rows());
    if (layout_.total_dim() != m_.rows()) throw std::invalid_argument("layout does not match operator dimension");
  }

  CMatrix m_;
  SystemLayout layout_;
};

class PositiveOperator : public HermitianOperator {
 public:
  PositiveOperator() = default;

  explicit PositiveOperator(CMatrix m, SystemLayout layout = {}) : HermitianOperator(std::move(m), std::move(layout)) {
    check_positive();
  }

  explicit PositiveOperator(const HermitianOperator& h) : HermitianOperator(h) { check_positive(); }

 protected:
  PositiveOperator(Trusted t, CMatrix m, SystemLayout layout) : HermitianOperator(t, std::move(m), std::move(layout)) {}

  void check_positive() const {
    if (m_.rows() == 0) return;
    RVector ev = eigvalsh(m_);
    const double scale = max_abs(ev);
    if (ev.minCoeff() < -Tolerance::psd * scale - 1e-15) throw std::invalid_argument("operator is not positive semidefinite");
  }
};

class DensityMatrix : public PositiveOperator {
 public:
  DensityMatrix() = default;

  explicit DensityMatrix(CMatrix m, SystemLayout layout = {}) : PositiveOperator(std::move(m), std::move(layout)) {
    check_trace();
  }

  explicit DensityMatrix(const PositiveOperator& p) : PositiveOperator(p) { check_trace(); }

  /// Nearest density matrix obtained by clipping negative eigenvalues and
  /// renormalizing; used for solver outputs that sit on the PSD boundary.
  static DensityMatrix project(const CMatrix& m, SystemLayout layout = {}) {
    CMatrix herm = (m + m.adjoint()) * 0.5;
    // rebuilding from the spectrum costs accuracy, so only do it when something is clipped
    CMatrix clipped = eigh(herm).values.minCoeff() < 0 ? mat_func(herm, [](double v) { return std::max(v, 0.0); }, 0.0)
                                                       : herm;
    const double tr = clipped.trace().real();
    if (!(tr > 0)) throw std::invalid_argument("cannot project an operator with no positive part");
    return DensityMatrix(Trusted{}, clipped / tr, std::move(layout));
  }

  static DensityMatrix maximally_mixed(Index d) {
    return DensityMatrix(Trusted{}, CMatrix::Identity(d, d) / static_cast<double>(d), {});
  }

  static DensityMatrix basis(Index d, Index k) {
    CMatrix m = CMatrix::Zero(d, d);
    m(k, k) = 1.0;
    return DensityMatrix(Trusted{}, std::move(m), {});
  }

  static DensityMatrix diagonal(const RVector& p) {
    return DensityMatrix(p.cast<Complex>().asDiagonal().toDenseMatrix());
  }

  DensityMatrix with_layout(SystemLayout layout) const { return DensityMatrix(Trusted{}, m_, std::move(layout)); }

  friend DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b);
  friend DensityMatrix partial_trace(const DensityMatrix& x, const std::vector<std::string>& keep);
  friend class PureState;
  friend class Channel;

 private:
  DensityMatrix(Trusted t, CMatrix m, SystemLayout layout) : PositiveOperator(t, std::move(m), std::move(layout)) {}

  void check_trace() const {
    if (std::abs(m_.trace().real() - 1.0) > Tolerance::trace) throw std::invalid_argument("density matrix trace differs from 1");
  }
};

class PureState {
 public:
  explicit PureState(CVector amplitudes, SystemLayout layout = {}) : psi_(std::move(amplitudes)), layout_(std::move(layout)) {
    if (layout_.empty()) layout_ = SystemLayout::flat(psi_.size());
    if (layout_.total_dim() != psi_.size()) throw std::invalid_argument("layout does not match state dimension");
    if (std::abs(psi_.norm() - 1.0) > Tolerance::norm) throw std::invalid_argument("state vector is not normalized");
  }

  const CVector& amplitudes() const { return psi_; }
  const SystemLayout& layout() const { return layout_; }
  Index dim() const { return psi_.size(); }

  DensityMatrix density() const { return DensityMatrix(DensityMatrix::Trusted{}, psi_ * psi_.adjoint(), layout_); }

 private:
  CVector psi_;
  SystemLayout layout_;
};

inline HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b) {
  return HermitianOperator(kron<Complex>(a.matrix(), b.matrix()), a.layout().concat(b.layout()));
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  return DensityMatrix(DensityMatrix::Trusted{}, kron<Complex>(a.matrix(), b.matrix()), a.layout().concat(b.layout()));
}

/// n-fold tensor power; subsystem labels get a copy suffix 1..n.
inline DensityMatrix tensor_power(const DensityMatrix& a, int n) {
  if (n < 1) throw std::invalid_argument("tensor_power: n must be positive");
  std::vector<SystemLayout::Subsystem> parts;
  for (int k = 1; k <= n; ++k)
    for (const auto& p : a.layout().parts()) parts.push_back({p.label + std::to_string(k), p.dim});
  return DensityMatrix(kron_power<Complex>(a.matrix(), n), SystemLayout(std::move(parts)));
}

inline std::vector<std::size_t> label_indices(const SystemLayout& layout, const std::vector<std::string>& labels) {
  std::vector<std::size_t> out;
  for (const auto& l : labels) out.push_back(layout.index_of(l));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline HermitianOperator partial_trace(const HermitianOperator& x, const std::vector<std::string>& keep) {
  auto idx = label_indices(x.layout(), keep);
  return HermitianOperator(partial_trace<Complex>(x.matrix(), x.layout().dims(), idx), x.layout().select(idx));
}

inline DensityMatrix partial_trace(const DensityMatrix& x, const std::vector<std::string>& keep) {
  auto idx = label_indices(x.layout(), keep);
  CMatrix m = partial_trace<Complex>(x.matrix(), x.layout().dims(), idx);
  return DensityMatrix(DensityMatrix::Trusted{}, (m + m.adjoint()) * 0.5, x.layout().select(idx));
}

// ---------------------------------------------------------------------------
// Channels

class Channel {
 public:
  Channel() = default;

  static Channel from_kraus(std::vector<CMatrix> kraus, double tol = Tolerance::tp) {
    if (kraus.empty()) throw std::invalid_argument("channel needs at least one Kraus operator");
    const Index d_in = kraus.front().cols(), d_out = kraus.front().rows();
    CMatrix sum = CMatrix::Zero(d_in, d_in);
    for (const auto& k : kraus) {
      if (k.cols() != d_in || k.rows() != d_out) throw std::invalid_argument("Kraus operators have inconsistent shapes");
      sum += k.adjoint() * k;
    }
    if ((sum - CMatrix::Identity(d_in, d_in)).cwiseAbs().maxCoeff() > tol)
      throw std::invalid_argument("Kraus operators are not trace preserving");
    Channel ch;
    ch.d_in_ = d_in;
    ch.d_out_ = d_out;
    CMatrix choi = CMatrix::Zero(d_in * d_out, d_in * d_out);
    for (const auto& k : kraus) {
      CVector v = vec(k);
      choi += v * v.adjoint();
    }
    ch.kraus_ = std::move(kraus);
    ch.choi_ = PositiveOperator(std::move(choi), choi_layout(d_in, d_out));
    return ch;
  }

  static Channel from_choi(const CMatrix& choi, Index d_in, Index d_out, double tol = Tolerance::tp) {
    if (choi.rows() != d_in * d_out || choi.cols() != d_in * d_out) throw std::invalid_argument("Choi matrix has wrong size");
    PositiveOperator g(choi, choi_layout(d_in, d_out));
    CMatrix marginal = partial_trace<Complex>(g.matrix(), {d_in, d_out}, {0});
    if ((marginal - CMatrix::Identity(d_in, d_in)).cwiseAbs().maxCoeff() > tol)
      throw std::invalid_argument("Choi matrix is not trace preserving");
    Channel ch;
    ch.d_in_ = d_in;
    ch.d_out_ = d_out;
    ch.choi_ = g;
    Spectrum s = eigh(g.matrix());
    for (Index k : retained(s.values, 1e-14)) {
      if (s.values[k] <= 0) continue;
      CMatrix kr(d_out, d_in);
      for (Index a = 0; a < d_in; ++a)
        for (Index b = 0; b < d_out; ++b) kr(b, a) = std::sqrt(s.values[k]) * s.vectors(a * d_out + b, k);
      ch.kraus_.push_back(std::move(kr));
    }
    return ch;
  }

  static Channel identity(Index d) { return from_kraus({CMatrix::Identity(d, d)}); }

  Index dim_in() const { return d_in_; }
  Index dim_out() const { return d_out_; }
  const std::vector<CMatrix>& kraus() const { return kraus_; }
  /// Unnormalized Choi matrix on R (x) B, R ~ input, with Tr_B = 1_R.
  const PositiveOperator& choi() const { return choi_; }
  CMatrix choi_state() const { return choi_.matrix() / static_cast<double>(d_in_); }

  /// Evaluated through the Choi matrix, so exactly representable data stays exact.
  CMatrix apply(const CMatrix& x) const {
    if (x.rows() != d_in_) throw std::invalid_argument("channel input dimension mismatch");
    return apply_choi<Complex>(choi_.matrix(), d_in_, d_out_, x, {d_in_}, 0);
  }

  /// Parallel composition with inputs (A1 A2) and outputs (B1 B2).
  Channel tensor(const Channel& other) const {
    std::vector<CMatrix> ks;
    for (const auto& a : kraus_)
      for (const auto& b : other.kraus_) ks.push_back(kron<Complex>(a, b));
    return from_kraus(std::move(ks), 1e-8);
  }

  static SystemLayout choi_layout(Index d_in, Index d_out) { return SystemLayout({{"R", d_in}, {"B", d_out}}); }

 private:
  static CVector vec(const CMatrix& k) {
    CVector v(k.rows() * k.cols());
    for (Index a = 0; a < k.cols(); ++a)
      for (Index b = 0; b < k.rows(); ++b) v(a * k.rows() + b) = k(b, a);
    return v;
  }

  Index d_in_ = 0, d_out_ = 0;
  std::vector<CMatrix> kraus_;
  PositiveOperator choi_;
};

inline const PositiveOperator& choi_of(const Channel& ch) { return ch.choi(); }

inline Channel channel_from_choi(const PositiveOperator& choi, Index d_in, Index d_out) {
  return Channel::from_choi(choi.matrix(), d_in, d_out);
}

/// (id (x) ch) on the subsystem labelled `target`; that subsystem keeps its label
/// unless `out_label` is given.
inline DensityMatrix apply_channel(const Channel& ch, const DensityMatrix& state, const std::string& target,
                                   const std::string& out_label = {}) {
  const auto& layout = state.layout();
  const auto t = layout.index_of(target);
  if (layout[t].dim != ch.dim_in())
    throw std::invalid_argument("apply_channel: subsystem '" + target + "' has dimension " + std::to_string(layout[t].dim) +
                                " but channel expects " + std::to_string(ch.dim_in()));
  CMatrix out = apply_choi<Complex>(ch.choi().matrix(), ch.dim_in(), ch.dim_out(), state.matrix(), layout.dims(), t);
  out = (out + out.adjoint()) * 0.5;
  return DensityMatrix::project(out, layout.replaced(t, ch.dim_out(), out_label.empty() ? target : out_label));
}

inline DensityMatrix apply_channel(const Channel& ch, const DensityMatrix& state) {
  if (state.layout().size() != 1) throw std::invalid_argument("apply_channel: name the target subsystem");
  return apply_channel(ch, state, state.layout()[0].label);
}

/// |psi> = (1 (x) sqrt(rho)) |Phi> on R (x) A with R ~ A and |Phi> = sum_i |i>|i>.
inline PureState canonical_purification(const DensityMatrix& rho) {
  const Index d = rho.dim();
  CMatrix root = mat_func(rho.matrix(), [](double v) { return std::sqrt(std::max(v, 0.0)); }, 0.0);
  CVector psi(d * d);
  for (Index i = 0; i < d; ++i)
    for (Index a = 0; a < d; ++a) psi(i * d + a) = root(a, i);
  psi /= psi.norm();
  return PureState(std::move(psi), SystemLayout({{"R", d}, {"A", d}}));
}

}  // namespace qcd
