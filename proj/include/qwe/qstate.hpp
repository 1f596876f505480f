#pragma once

// Pure states over labeled tensor factors and the entanglement diagnostics
// built on them: partial trace, Schmidt decomposition, log-negativity,
// Shannon entropy and eigenvalue majorization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "qwe/core.hpp"

namespace qwe {

using LabelSet = std::vector<std::string>;

/// Ordered tensor factors. Amplitudes are row-major in factor order.
class SubsystemLayout {
 public:
  struct Factor {
    std::string label;
    std::size_t dim;
    friend bool operator==(const Factor&, const Factor&) = default;
  };

  SubsystemLayout() = default;

  explicit SubsystemLayout(std::vector<Factor> factors) : factors_(std::move(factors)) {
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (factors_[i].dim == 0) {
        throw std::invalid_argument("factor '" + factors_[i].label + "' has dimension 0");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (factors_[j].label == factors_[i].label) {
          throw std::invalid_argument("duplicate factor label '" + factors_[i].label + "'");
        }
      }
    }
  }

  std::size_t size() const noexcept { return factors_.size(); }
  bool empty() const noexcept { return factors_.empty(); }
  const Factor& operator[](std::size_t i) const { return factors_.at(i); }
  const std::vector<Factor>& factors() const noexcept { return factors_; }

  std::size_t total_dim() const noexcept {
    std::size_t d = 1;
    for (const auto& f : factors_) d *= f.dim;
    return d;
  }

  bool contains(const std::string& label) const noexcept {
    return std::any_of(factors_.begin(), factors_.end(),
                       [&](const Factor& f) { return f.label == label; });
  }

  std::size_t index_of(const std::string& label) const {
    for (std::size_t i = 0; i < factors_.size(); ++i) {
      if (factors_[i].label == label) return i;
    }
    throw std::invalid_argument("unknown factor label '" + label + "'");
  }

  std::size_t dim(const std::string& label) const { return factors_[index_of(label)].dim; }

  /// Row-major stride of factor i.
  std::size_t stride(std::size_t i) const {
    std::size_t s = 1;
    for (std::size_t j = i + 1; j < factors_.size(); ++j) s *= factors_[j].dim;
    return s;
  }

  LabelSet labels() const {
    LabelSet out;
    out.reserve(factors_.size());
    for (const auto& f : factors_) out.push_back(f.label);
    return out;
  }

  /// Factors whose labels are in `keep`, in this layout's order.
  SubsystemLayout subset(const LabelSet& keep) const {
    std::vector<Factor> out;
    for (const auto& f : factors_) {
      if (std::find(keep.begin(), keep.end(), f.label) != keep.end()) out.push_back(f);
    }
    return SubsystemLayout(std::move(out));
  }

  /// Labels not in `labels`, in layout order.
  LabelSet complement(const LabelSet& labels) const {
    LabelSet out;
    for (const auto& f : factors_) {
      if (std::find(labels.begin(), labels.end(), f.label) == labels.end()) out.push_back(f.label);
    }
    return out;
  }

  SubsystemLayout without(const std::string& label) const { return subset(complement({label})); }

  friend bool operator==(const SubsystemLayout&, const SubsystemLayout&) = default;

 private:
  std::vector<Factor> factors_;
};

/// Splits the factors of a layout into a nonempty "left" set and its nonempty
/// complement; `left` is validated against the layout.
struct Bipartition {
  LabelSet left;
  LabelSet right;
};

inline Bipartition make_bipartition(const SubsystemLayout& layout, const LabelSet& left) {
  for (const auto& l : left) (void)layout.index_of(l);
  for (std::size_t i = 0; i < left.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (left[i] == left[j]) throw std::invalid_argument("repeated label in bipartition");
    }
  }
  Bipartition b{layout.subset(left).labels(), layout.complement(left)};
  if (b.left.empty() || b.right.empty()) {
    throw std::invalid_argument("bipartition sides must both be nonempty");
  }
  return b;
}

inline void validate_bipartition(const SubsystemLayout& layout, const Bipartition& b) {
  if (b.left.empty() || b.right.empty()) {
    throw std::invalid_argument("bipartition sides must both be nonempty");
  }
  if (b.left.size() + b.right.size() != layout.size()) {
    throw std::invalid_argument("bipartition does not cover the layout");
  }
  for (const auto& l : b.left) {
    (void)layout.index_of(l);
    if (std::find(b.right.begin(), b.right.end(), l) != b.right.end()) {
      throw std::invalid_argument("bipartition sides overlap on '" + l + "'");
    }
  }
  for (const auto& l : b.right) (void)layout.index_of(l);
}

namespace detail {

/// Row/column coordinates of every flat index when the layout is viewed as a
/// (left factors) x (remaining factors) matrix.
struct IndexSplit {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::vector<std::size_t> row;
  std::vector<std::size_t> col;
};

inline IndexSplit split_indices(const SubsystemLayout& layout, const LabelSet& left) {
  const std::size_t n = layout.size();
  std::vector<bool> is_left(n, false);
  for (const auto& l : left) is_left[layout.index_of(l)] = true;

  IndexSplit out;
  std::vector<std::size_t> sub_stride(n, 0);
  // Strides inside each side, row-major in layout order.
  for (std::size_t i = n; i-- > 0;) {
    if (is_left[i]) {
      sub_stride[i] = out.rows;
      out.rows *= layout[i].dim;
    } else {
      sub_stride[i] = out.cols;
      out.cols *= layout[i].dim;
    }
  }
  const std::size_t total = layout.total_dim();
  out.row.assign(total, 0);
  out.col.assign(total, 0);
  std::vector<std::size_t> digit(n, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t r = 0;
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) {
      (is_left[i] ? r : c) += digit[i] * sub_stride[i];
    }
    out.row[flat] = r;
    out.col[flat] = c;
    for (std::size_t i = n; i-- > 0;) {
      if (++digit[i] < layout[i].dim) break;
      digit[i] = 0;
    }
  }
  return out;
}

}  // namespace detail

/// Normalized state vector over a layout.
class PureState {
 public:
  PureState() = default;

  PureState(SubsystemLayout layout, Vector amplitudes)
      : layout_(std::move(layout)), amplitudes_(std::move(amplitudes)) {
    if (static_cast<std::size_t>(amplitudes_.size()) != layout_.total_dim()) {
      throw std::invalid_argument("amplitude count does not match layout dimension");
    }
    if (std::abs(amplitudes_.norm() - 1.0) > tol::norm) {
      throw std::invalid_argument("state is not normalized");
    }
  }

  /// Normalizes `amplitudes` first; throws DegenerateOutcome on a zero vector.
  static PureState normalized(SubsystemLayout layout, Vector amplitudes) {
    const double n = amplitudes.norm();
    if (n * n < tol::degenerate) throw DegenerateOutcome("cannot normalize a zero vector");
    amplitudes /= n;
    return PureState(std::move(layout), std::move(amplitudes));
  }

  /// Computational basis state, one 0-based index per factor.
  static PureState basis(SubsystemLayout layout, const std::vector<std::size_t>& index) {
    if (index.size() != layout.size()) throw std::invalid_argument("basis index has wrong arity");
    std::size_t flat = 0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      if (index[i] >= layout[i].dim) throw std::invalid_argument("basis index out of range");
      flat = flat * layout[i].dim + index[i];
    }
    Vector a = Vector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
    a(static_cast<Eigen::Index>(flat)) = 1.0;
    return PureState(std::move(layout), std::move(a));
  }

  const SubsystemLayout& layout() const noexcept { return layout_; }
  const Vector& amplitudes() const noexcept { return amplitudes_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(amplitudes_.size()); }

  /// Amplitude at a 0-based multi-index.
  cplx at(const std::vector<std::size_t>& index) const {
    std::size_t flat = 0;
    for (std::size_t i = 0; i < layout_.size(); ++i) flat = flat * layout_[i].dim + index.at(i);
    return amplitudes_(static_cast<Eigen::Index>(flat));
  }

  /// View as a (left factors) x (remaining factors) matrix.
  Matrix as_matrix(const LabelSet& left) const {
    const auto split = detail::split_indices(layout_, left);
    Matrix m(split.rows, split.cols);
    for (std::size_t f = 0; f < dim(); ++f) {
      m(static_cast<Eigen::Index>(split.row[f]), static_cast<Eigen::Index>(split.col[f])) =
          amplitudes_(static_cast<Eigen::Index>(f));
    }
    return m;
  }

 private:
  SubsystemLayout layout_;
  Vector amplitudes_;
};

/// Hermitian, unit-trace, positive semidefinite operator over a layout.
class DensityOperator {
 public:
  DensityOperator(SubsystemLayout layout, Matrix matrix)
      : layout_(std::move(layout)), matrix_(std::move(matrix)) {
    const auto d = static_cast<Eigen::Index>(layout_.total_dim());
    if (matrix_.rows() != d || matrix_.cols() != d) {
      throw std::invalid_argument("density matrix shape does not match layout");
    }
    if ((matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() > tol::hermitian) {
      throw std::invalid_argument("density matrix is not Hermitian");
    }
    if (std::abs(matrix_.trace() - cplx(1.0)) > tol::hermitian) {
      throw std::invalid_argument("density matrix does not have unit trace");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(matrix_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol::hermitian) {
      throw std::invalid_argument("density matrix is not positive semidefinite");
    }
  }

  explicit DensityOperator(const PureState& s)
      : DensityOperator(s.layout(), s.amplitudes() * s.amplitudes().adjoint()) {}

  const SubsystemLayout& layout() const noexcept { return layout_; }
  const Matrix& matrix() const noexcept { return matrix_; }

  /// Eigenvalues in descending order.
  RealVector spectrum() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(matrix_, Eigen::EigenvaluesOnly);
    RealVector ev = es.eigenvalues().reverse();
    return ev;
  }

  double purity() const { return (matrix_ * matrix_).trace().real(); }

 private:
  SubsystemLayout layout_;
  Matrix matrix_;
};

struct SchmidtData {
  RealVector coefficients;  ///< descending
  Matrix left_vectors;      ///< columns, orthonormal
  Matrix right_vectors;     ///< columns, orthonormal

  /// Number of coefficients above `cutoff`.
  std::size_t rank(double cutoff = tol::zero) const {
    return static_cast<std::size_t>((coefficients.array() > cutoff).count());
  }
};

// ---------------------------------------------------------------------------

inline PureState tensor(const PureState& a, const PureState& b) {
  std::vector<SubsystemLayout::Factor> f = a.layout().factors();
  for (const auto& g : b.layout().factors()) {
    if (a.layout().contains(g.label)) {
      throw std::invalid_argument("tensor: duplicate label '" + g.label + "'");
    }
    f.push_back(g);
  }
  const auto na = static_cast<Eigen::Index>(a.dim());
  const auto nb = static_cast<Eigen::Index>(b.dim());
  Vector out(na * nb);
  for (Eigen::Index i = 0; i < na; ++i) out.segment(i * nb, nb) = a.amplitudes()(i) * b.amplitudes();
  return PureState::normalized(SubsystemLayout(std::move(f)), std::move(out));
}

/// Reorders factors; `order` must be a permutation of the layout labels.
inline PureState permute(const PureState& s, const LabelSet& order) {
  if (order.size() != s.layout().size()) throw std::invalid_argument("permute: wrong label count");
  std::vector<SubsystemLayout::Factor> f;
  for (const auto& l : order) f.push_back(s.layout()[s.layout().index_of(l)]);
  SubsystemLayout target(std::move(f));
  std::vector<std::size_t> pos(s.layout().size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[i] = s.layout().index_of(order[i]);
  if (std::is_sorted(pos.begin(), pos.end())) return PureState(std::move(target), s.amplitudes());

  const std::size_t n = s.layout().size();
  Vector out(static_cast<Eigen::Index>(s.dim()));
  std::vector<std::size_t> digit(n, 0);
  std::vector<std::size_t> tstride(n);
  for (std::size_t i = 0; i < n; ++i) tstride[i] = target.stride(i);
  for (std::size_t flat = 0; flat < s.dim(); ++flat) {
    std::size_t t = 0;
    for (std::size_t i = 0; i < n; ++i) t += digit[pos[i]] * tstride[i];
    out(static_cast<Eigen::Index>(t)) = s.amplitudes()(static_cast<Eigen::Index>(flat));
    for (std::size_t i = n; i-- > 0;) {
      if (++digit[i] < s.layout()[i].dim) break;
      digit[i] = 0;
    }
  }
  return PureState(std::move(target), std::move(out));
}

inline DensityOperator partial_trace(const PureState& s, const LabelSet& keep) {
  const auto b = make_bipartition(s.layout(), keep);
  const Matrix m = s.as_matrix(b.left);
  Matrix rho = m * m.adjoint();
  rho = 0.5 * (rho + rho.adjoint());
  return DensityOperator(s.layout().subset(b.left), std::move(rho));
}

inline DensityOperator partial_trace(const DensityOperator& rho, const LabelSet& keep) {
  const auto b = make_bipartition(rho.layout(), keep);
  const auto split = detail::split_indices(rho.layout(), b.left);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(split.rows), static_cast<Eigen::Index>(split.rows));
  // Group flat indices by column coordinate.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> by_col(split.cols);
  for (std::size_t f = 0; f < split.row.size(); ++f) by_col[split.col[f]].push_back({split.row[f], f});
  for (const auto& group : by_col) {
    for (const auto& [r, f] : group) {
      for (const auto& [r2, f2] : group) {
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r2)) +=
            rho.matrix()(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(f2));
      }
    }
  }
  return DensityOperator(rho.layout().subset(b.left), std::move(out));
}

/// Singular values of the state matrix across (left, rest), descending.
inline RealVector schmidt_coefficients(const Matrix& state_matrix) {
  Eigen::JacobiSVD<Matrix> svd(state_matrix);
  return svd.singularValues();
}

inline SchmidtData schmidt(const PureState& s, const Bipartition& b) {
  validate_bipartition(s.layout(), b);
  const Matrix m = s.as_matrix(b.left);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  // m = U S V^dagger, so |psi> = sum_k s_k |U_k> |conj(V_k)>.
  return SchmidtData{svd.singularValues(), svd.matrixU(), svd.matrixV().conjugate()};
}

/// log2 (sum_k s_k)^2 for Schmidt coefficients s_k of a (possibly unnormalized)
/// pure state.
inline double log_negativity_from_schmidt(const RealVector& coefficients) {
  const double norm2 = coefficients.squaredNorm();
  if (norm2 <= 0.0) throw DegenerateOutcome("log-negativity of a zero vector");
  const double s = coefficients.sum();
  return std::max(0.0, std::log2(s * s / norm2));
}

/// Partial transpose on the `b.left` factors of a density operator.
inline Matrix partial_transpose(const DensityOperator& rho, const Bipartition& b) {
  validate_bipartition(rho.layout(), b);
  const auto split = detail::split_indices(rho.layout(), b.left);
  // flat index of (r, c)
  std::vector<std::size_t> flat_of(split.rows * split.cols);
  for (std::size_t f = 0; f < split.row.size(); ++f) flat_of[split.row[f] * split.cols + split.col[f]] = f;
  const std::size_t d = split.row.size();
  Matrix out(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t f = 0; f < d; ++f) {
    for (std::size_t g = 0; g < d; ++g) {
      const std::size_t src_f = flat_of[split.row[g] * split.cols + split.col[f]];
      const std::size_t src_g = flat_of[split.row[f] * split.cols + split.col[g]];
      out(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(g)) =
          rho.matrix()(static_cast<Eigen::Index>(src_f), static_cast<Eigen::Index>(src_g));
    }
  }
  return out;
}

/// log2 of the trace norm of the partial transpose.
inline double log_negativity(const DensityOperator& rho, const Bipartition& b) {
  const Matrix pt = partial_transpose(rho, b);
  Eigen::SelfAdjointEigenSolver<Matrix> es(pt, Eigen::EigenvaluesOnly);
  const double trace_norm = es.eigenvalues().cwiseAbs().sum();
  return std::max(0.0, std::log2(trace_norm));
}

/// States up to this dimension go through the partial-transpose route with a
/// Schmidt cross-check; larger ones use the Schmidt formula directly.
inline constexpr std::size_t kPartialTransposeMaxDim = 256;

inline double log_negativity(const PureState& s, const Bipartition& b) {
  validate_bipartition(s.layout(), b);
  const double via_schmidt = log_negativity_from_schmidt(schmidt_coefficients(s.as_matrix(b.left)));
  if (s.dim() > kPartialTransposeMaxDim) return via_schmidt;
  const double via_pt = log_negativity(DensityOperator(s), b);
  if (std::abs(via_pt - via_schmidt) > tol::zero) {
    throw std::logic_error("log-negativity routes disagree");
  }
  return via_pt;
}

/// -sum p ln p (natural log).
inline double shannon_entropy(std::span<const double> p) {
  double sum = 0.0;
  double h = 0.0;
  for (double x : p) {
    if (x < 0.0) throw std::invalid_argument("probability vector has a negative entry");
    sum += x;
    if (x > 0.0) h -= x * std::log(x);
  }
  if (std::abs(sum - 1.0) > tol::zero) throw std::invalid_argument("probabilities do not sum to 1");
  return h;
}

/// True iff the descending eigenvalues of Hermitian `a` majorize `p`, comparing
/// the len(p) largest eigenvalues (zero-padded when a is smaller).
inline bool majorizes(const Matrix& a, std::span<const double> p, double slack = tol::hermitian) {
  if (a.rows() != a.cols()) throw std::invalid_argument("majorizes: matrix is not square");
  if ((a - a.adjoint()).cwiseAbs().maxCoeff() > tol::hermitian) {
    throw std::invalid_argument("majorizes: matrix is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  std::vector<double> lambda(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(lambda.begin(), lambda.end(), std::greater<>());
  std::vector<double> q(p.begin(), p.end());
  std::sort(q.begin(), q.end(), std::greater<>());
  lambda.resize(q.size(), 0.0);
  double lhs = 0.0;
  double rhs = 0.0;
  for (std::size_t l = 0; l < q.size(); ++l) {
    lhs += lambda[l];
    rhs += q[l];
    if (lhs - rhs < -slack) return false;
  }
  return true;
}

/// |<a|b>|^2; global phase is irrelevant.
inline double fidelity(const PureState& a, const PureState& b) {
  if (!(a.layout() == b.layout())) throw std::invalid_argument("fidelity: layouts differ");
  return std::norm(a.amplitudes().dot(b.amplitudes()));
}

/// Result of contracting one factor with a bra: unnormalized amplitudes over
/// the remaining factors and the branch probability.
struct Projection {
  SubsystemLayout layout;
  Vector amplitudes;
  double probability = 0.0;

  PureState state() const {
    if (probability < tol::degenerate) throw DegenerateOutcome("zero-probability projection");
    return PureState(layout, amplitudes / std::sqrt(probability));
  }
};

/// Applies <v| to factor `label` of `amplitudes` (which need not be normalized).
inline Projection project_factor(const SubsystemLayout& layout, const Vector& amplitudes,
                                 const std::string& label, const Vector& v) {
  const std::size_t k = layout.index_of(label);
  const std::size_t d = layout[k].dim;
  if (static_cast<std::size_t>(v.size()) != d) throw std::invalid_argument("projector has wrong dimension");
  const std::size_t inner = layout.stride(k);
  const std::size_t outer = layout.total_dim() / (inner * d);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(outer * inner));
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < d; ++j) {
      const cplx w = std::conj(v(static_cast<Eigen::Index>(j)));
      if (w == cplx(0.0)) continue;
      out.segment(static_cast<Eigen::Index>(o * inner), static_cast<Eigen::Index>(inner)) +=
          w * amplitudes.segment(static_cast<Eigen::Index>((o * d + j) * inner), static_cast<Eigen::Index>(inner));
    }
  }
  Projection p{layout.without(label), std::move(out), 0.0};
  p.probability = p.amplitudes.squaredNorm();
  return p;
}

inline Projection project_factor(const PureState& s, const std::string& label, const Vector& v) {
  return project_factor(s.layout(), s.amplitudes(), label, v);
}

/// Applies a single-factor operator.
inline Vector apply_local(const SubsystemLayout& layout, const Vector& amplitudes,
                          const std::string& label, const Matrix& op) {
  const std::size_t k = layout.index_of(label);
  const std::size_t d = layout[k].dim;
  if (static_cast<std::size_t>(op.rows()) != d || static_cast<std::size_t>(op.cols()) != d) {
    throw std::invalid_argument("local operator has wrong dimension");
  }
  const std::size_t inner = layout.stride(k);
  const std::size_t outer = layout.total_dim() / (inner * d);
  Vector out = Vector::Zero(amplitudes.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < d; ++i) {
      auto dst = out.segment(static_cast<Eigen::Index>((o * d + i) * inner), static_cast<Eigen::Index>(inner));
      for (std::size_t j = 0; j < d; ++j) {
        const cplx w = op(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (w == cplx(0.0)) continue;
        dst += w * amplitudes.segment(static_cast<Eigen::Index>((o * d + j) * inner), static_cast<Eigen::Index>(inner));
      }
    }
  }
  return out;
}

}  // namespace qwe
