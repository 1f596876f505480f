#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qwe {

using cplx = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using Vector2 = Eigen::Vector2cd;
using Matrix2 = Eigen::Matrix2cd;

namespace tol {
/// Orthogonality and "is zero" tests.
inline constexpr double zero = 1e-9;
/// Hermiticity and trace tests.
inline constexpr double hermitian = 1e-10;
/// Norm and unitarity tests.
inline constexpr double norm = 1e-12;
/// Below this a projection outcome is treated as impossible.
inline constexpr double degenerate = 1e-12;
}  // namespace tol

/// A requested measurement branch has (numerically) zero probability.
class DegenerateOutcome : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The walker would leave the finite lattice. Always an error, never truncation.
class LatticeOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qwe
