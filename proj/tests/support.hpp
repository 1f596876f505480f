#pragma once

// Seeded generators and small oracles shared by the test suites.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/QR>

#include "qwe/layouts.hpp"
#include "qwe/rng.hpp"

namespace qwe::testing {

inline Vector random_vector(std::size_t n, GaussianStream& g) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = g.next();
    v(i) = cplx(re, g.next());
  }
  return v.normalized();
}

inline Matrix random_unitary(std::size_t n, GaussianStream& g) {
  Matrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const double re = g.next();
      a(i, j) = cplx(re, g.next());
    }
  }
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ();
}

/// Exponential spacings, normalized: uniform on the simplex.
inline std::vector<double> random_probabilities(std::size_t n, GaussianStream& g) {
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& x : p) {
    x = -std::log(1.0 - g.uniform());
    s += x;
  }
  for (auto& x : p) x /= s;
  return p;
}

inline PureState random_state(const SubsystemLayout& layout, GaussianStream& g) {
  return PureState(layout, random_vector(layout.total_dim(), g));
}

inline std::size_t random_index(std::size_t n, GaussianStream& g) {
  return static_cast<std::size_t>(g.uniform() * static_cast<double>(n)) % n;
}

/// sum_k sqrt(w_k) |a_k>|b_k> with orthonormal a_k (columns of a) and b_k.
inline PureState schmidt_state(const SubsystemLayout& layout, const LabelSet& left, const Matrix& a, const Matrix& b,
                               const std::vector<double>& w) {
  const auto split = make_bipartition(layout, left);
  Matrix m = Matrix::Zero(a.rows(), b.rows());
  for (std::size_t k = 0; k < w.size(); ++k) {
    m += std::sqrt(w[k]) * a.col(static_cast<Eigen::Index>(k)) * b.col(static_cast<Eigen::Index>(k)).transpose();
  }
  const SubsystemLayout lhs = layout.subset(split.left);
  const SubsystemLayout rhs = layout.subset(split.right);
  std::vector<SubsystemLayout::Factor> f = lhs.factors();
  for (const auto& x : rhs.factors()) f.push_back(x);
  Vector amp(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) amp(i * m.cols() + j) = m(i, j);
  }
  return permute(PureState::normalized(SubsystemLayout(f), amp), layout.labels());
}

/// Bloch vector of a coin state.
inline Eigen::Vector3d bloch(const Vector2& g) {
  const cplx x = std::conj(g(0)) * g(1);
  return {2.0 * x.real(), 2.0 * x.imag(), std::norm(g(0)) - std::norm(g(1))};
}

/// Equal up to global phase.
inline bool same_ray(const Vector2& a, const Vector2& b, double tol = 1e-9) {
  return std::abs(std::norm(a.normalized().dot(b.normalized())) - 1.0) < tol;
}

}  // namespace qwe::testing
