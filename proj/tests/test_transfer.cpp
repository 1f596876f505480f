#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qwe/transfer.hpp"
#include "support.hpp"

using namespace qwe;
using qwe::testing::bloch;
using qwe::testing::random_probabilities;
using qwe::testing::random_unitary;
using qwe::testing::random_vector;
using qwe::testing::same_ray;

namespace {

const double kPi = std::numbers::pi;
const double kR2 = std::sqrt(2.0);
const LabelSet kPartyTwo{labels::C2, labels::W2};

/// Coin-walker state from a 2 x sites table (row = coin).
PureState table_state(const Matrix& rows) {
  const auto layout = coin_walker_layout(static_cast<std::size_t>(rows.cols()));
  Vector a(rows.size());
  for (Eigen::Index c = 0; c < 2; ++c) a.segment(c * rows.cols(), rows.cols()) = rows.row(c).transpose();
  return PureState::normalized(layout, a);
}

/// 2|u> = sqrt2 |up>|2> + |down>(|1> + |2>)
PureState appendix_u() {
  Matrix t(2, 2);
  t << 0.0, kR2, 1.0, 1.0;
  return table_state(t / 2.0);
}

/// 2|v> = |up>(|1> + |2>) - sqrt2 |down>|2>
PureState appendix_v1() {
  Matrix t(2, 2);
  t << 1.0, 1.0, 0.0, -kR2;
  return table_state(t / 2.0);
}

/// 2|v> = |up>(|1> - |2>) + sqrt2 |down>|1>
PureState appendix_v2() {
  Matrix t(2, 2);
  t << 1.0, -1.0, kR2, 0.0;
  return table_state(t / 2.0);
}

/// sqrt(p1)|u>|0> + sqrt(p2)|v>|1> with a qubit as party two.
PureState with_marker(const PureState& u, const PureState& v, double p1) {
  const SubsystemLayout layout({{labels::C1, 2}, {labels::W1, u.layout().dim(labels::W1)}, {"R", 2}});
  Vector a = Vector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
  for (Eigen::Index f = 0; f < u.amplitudes().size(); ++f) {
    a(2 * f) = std::sqrt(p1) * u.amplitudes()(f);
    a(2 * f + 1) = std::sqrt(1.0 - p1) * v.amplitudes()(f);
  }
  return PureState(layout, a);
}

PureState walked(const WalkSpec& spec, double p1 = 0.5) {
  return evolve_both(coin_entangled_state(required_lattice(0, spec.steps()), p1), spec);
}

MMatrix m_of(const WalkSpec& spec) {
  const auto [up, down] = branch_outputs(spec);
  return compute_M(down, up, labels::C1);
}

MMatrix random_traceless(GaussianStream& g, int kind) {
  MMatrix m;
  if (kind == 0) {
    // normal: U diag(a, -a) U^dagger
    const Matrix2 u = random_unitary(2, g);
    const cplx a(g.next(), g.next());
    m = u * Eigen::Vector2cd(a, -a).asDiagonal() * u.adjoint();
  } else if (kind == 1) {
    // nilpotent
    const Matrix2 u = random_unitary(2, g);
    MMatrix n = MMatrix::Zero();
    n(0, 1) = cplx(g.next(), g.next());
    m = u * n * u.adjoint();
  } else {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) m(i, j) = cplx(g.next(), g.next());
    }
    m -= 0.5 * m.trace() * MMatrix::Identity();
  }
  return m;
}

Eigen::Vector3d pauli_vector_re(const MMatrix& m) {
  const cplx mx = 0.5 * (m(0, 1) + m(1, 0));
  const cplx my = (m(1, 0) - m(0, 1)) / cplx(0.0, 2.0);
  return {mx.real(), my.real(), m(0, 0).real()};
}

Eigen::Vector3d pauli_vector_im(const MMatrix& m) {
  const cplx mx = 0.5 * (m(0, 1) + m(1, 0));
  const cplx my = (m(1, 0) - m(0, 1)) / cplx(0.0, 2.0);
  return {mx.imag(), my.imag(), m(0, 0).imag()};
}

/// Party one (C1, W1) = 2 x 4, party two (C2, W2) = 2 x 4.
SubsystemLayout small_four() { return four_partite_layout(4); }

PureState from_party_matrix(const Matrix& m) {
  Vector a(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.segment(i * m.cols(), m.cols()) = m.row(i).transpose();
  return PureState::normalized(small_four(), a);
}

/// sum_k sqrt(w_k)|u_k>|v_k> with u_k = columns of `u` (dim 8), random v_k.
PureState from_schmidt(const Matrix& u, const std::vector<double>& w, GaussianStream& g) {
  const Matrix v = random_unitary(8, g);
  Matrix m = Matrix::Zero(8, 8);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(k);
    m += std::sqrt(w[k]) * u.col(c) * v.col(c).transpose();
  }
  return from_party_matrix(m);
}

/// Party-one vectors (|gamma>|a_k> + |gamma_perp>|b_k>)/sqrt2: projecting
/// gamma keeps them orthogonal with equal weights.
Matrix transferable_vectors(const Vector2& gamma, std::size_t rank, GaussianStream& g) {
  const Matrix a = random_unitary(4, g);
  const Matrix b = random_unitary(4, g);
  const Vector2 gp = orthogonal(gamma);
  Matrix u(8, static_cast<Eigen::Index>(rank));
  for (Eigen::Index k = 0; k < u.cols(); ++k) {
    for (Eigen::Index c = 0; c < 2; ++c) {
      u.col(k).segment(c * 4, 4) = (gamma(c) * a.col(k) + gp(c) * b.col(k)) / kR2;
    }
  }
  return u;
}

}  // namespace

// ---------------------------------------------------------------------------
// Coin-state parametrization

TEST(CoinState, AnglesRoundTrip) {
  GaussianStream g(30);
  for (int t = 0; t < 100; ++t) {
    const double theta = 0.01 + g.uniform() * (kPi / 2 - 0.02);
    const double phi = g.uniform() * 2 * kPi;
    const auto a = angles_of(coin_state(theta, phi));
    EXPECT_NEAR(a.theta, theta, 1e-12);
    EXPECT_NEAR(std::remainder(a.phi - phi, 2 * kPi), 0.0, 1e-12);
  }
  const Vector2 g0 = coin_state(0.3, 1.1);
  EXPECT_NEAR(std::abs(g0.dot(orthogonal(g0))), 0.0, 1e-16);
}

// ---------------------------------------------------------------------------
// M matrix

TEST(ComputeM, FirstAppendixPair) {
  const MMatrix m = compute_M(appendix_u(), appendix_v1(), labels::C1);
  MMatrix want;
  want << 1.0, -kR2, kR2, -1.0;
  want /= 2.0 * kR2;
  EXPECT_LT((m - want).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(std::abs(m.trace()), 1e-15);
}

TEST(ComputeM, SecondAppendixPair) {
  const MMatrix m = compute_M(appendix_u(), appendix_v2(), labels::C1);
  MMatrix want = MMatrix::Zero();
  want(0, 0) = -1.0;
  want(1, 1) = 1.0;
  want /= 2.0 * kR2;
  EXPECT_LT((m - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ComputeM, IdentityWalkOutputsGiveZero) {
  for (std::size_t n = 1; n <= 6; ++n) {
    EXPECT_LT(m_of(WalkSpec::uniform(CoinOp::identity(), n)).norm(), 1e-15) << n;
  }
}

TEST(ComputeM, ExpectationIsOverlapOfProjections) {
  GaussianStream g(31);
  const auto [up, down] = branch_outputs(WalkSpec::uniform(CoinOp::hadamard(), 3));
  const MMatrix m = compute_M(down, up, labels::C1);
  for (int t = 0; t < 20; ++t) {
    const Vector2 gam = random_vector(2, g);
    const Vector a = project_factor(up, labels::C1, gam).amplitudes;
    const Vector b = project_factor(down, labels::C1, gam).amplitudes;
    EXPECT_NEAR(std::abs(gam.dot(m * gam)), std::abs(a.dot(b)), 1e-14);
  }
}

TEST(ComputeM, RejectsNonOrthogonalOrMismatchedInputs) {
  EXPECT_THROW(compute_M(appendix_u(), appendix_u(), labels::C1), std::invalid_argument);
  EXPECT_THROW(compute_M(appendix_u(), PureState::basis(coin_walker_layout(3), {0, 0}), labels::C1),
               std::invalid_argument);
}

// ---------------------------------------------------------------------------
// find_gamma

TEST(FindGamma, FirstAppendixPairUsesSingularVectors) {
  const auto sol = find_gamma(compute_M(appendix_u(), appendix_v1(), labels::C1));
  EXPECT_EQ(sol.kind, GammaKind::svd_pair);
  ASSERT_EQ(sol.gammas.size(), 2u);
  const Vector2 plus = plus_state();
  const Vector2 minus = minus_state();
  EXPECT_TRUE((same_ray(sol.gammas[0], plus) && same_ray(sol.gammas[1], minus)) ||
              (same_ray(sol.gammas[0], minus) && same_ray(sol.gammas[1], plus)));
}

TEST(FindGamma, SecondAppendixPairIsNormal) {
  const MMatrix m = compute_M(appendix_u(), appendix_v2(), labels::C1);
  const auto sol = find_gamma(m);
  EXPECT_EQ(sol.kind, GammaKind::normal_family);
  ASSERT_EQ(sol.gammas.size(), 2u);
  for (double phi = 0.0; phi < 2 * kPi; phi += 0.37) {
    EXPECT_LT(gamma_residual(m, sol.balanced(phi)), 1e-12);
    EXPECT_LT(gamma_residual(m, coin_state(kPi / 4, phi)), 1e-12);
  }
}

TEST(FindGamma, ZeroMatrixReturnsPlusMinus) {
  const auto sol = find_gamma(MMatrix::Zero());
  EXPECT_EQ(sol.kind, GammaKind::zero_matrix);
  ASSERT_EQ(sol.gammas.size(), 2u);
  EXPECT_TRUE(same_ray(sol.gammas[0], plus_state()));
  EXPECT_TRUE(same_ray(sol.gammas[1], minus_state()));
}

TEST(FindGamma, RejectsTrace) {
  EXPECT_THROW(find_gamma(MMatrix::Identity()), std::invalid_argument);
}

TEST(FindGammaProperty, ResidualVanishesOnRandomTracelessMatrices) {
  GaussianStream g(32);
  int kinds[3] = {0, 0, 0};
  for (int t = 0; t < 1000; ++t) {
    const int kind = t % 3;
    const MMatrix m = random_traceless(g, kind);
    const auto sol = find_gamma(m);
    ++kinds[static_cast<int>(sol.kind)];
    ASSERT_FALSE(sol.gammas.empty());
    for (const auto& gam : sol.gammas) {
      EXPECT_NEAR(gam.norm(), 1.0, 1e-12);
      ASSERT_LT(gamma_residual(m, gam), 1e-10) << "instance " << t;
    }
    if (sol.gammas.size() == 2) {
      EXPECT_LT(std::abs(sol.gammas[0].dot(sol.gammas[1])), 1e-10);
    }
  }
  EXPECT_GT(kinds[static_cast<int>(GammaKind::normal_family)], 300);
  EXPECT_GT(kinds[static_cast<int>(GammaKind::svd_pair)], 600);
}

TEST(FindGammaOracle, BlochVectorClosedForm) {
  // With M = m . sigma, <gamma|M|gamma> = (Re m + i Im m) . r, so the zeros are
  // r = +-(Re m x Im m) / |Re m x Im m|, or the great circle r . m = 0.
  GaussianStream g(33);
  for (int t = 0; t < 300; ++t) {
    const int kind = t % 3;
    const MMatrix m = random_traceless(g, kind);
    const auto sol = find_gamma(m);
    const Eigen::Vector3d re = pauli_vector_re(m);
    const Eigen::Vector3d im = pauli_vector_im(m);
    if (sol.kind == GammaKind::svd_pair) {
      const Eigen::Vector3d axis = re.cross(im).normalized();
      for (const auto& gam : sol.gammas) EXPECT_NEAR(std::abs(bloch(gam).dot(axis)), 1.0, 1e-9);
    } else {
      const Eigen::Vector3d dir = re.norm() > im.norm() ? re.normalized() : im.normalized();
      for (const auto& gam : sol.gammas) EXPECT_NEAR(bloch(gam).dot(dir), 0.0, 1e-9);
    }
  }
}

TEST(FindGammaOracle, BruteForceGridMinimaSitNextToSolutions) {
  GaussianStream g(34);
  const Grid grid(91, 181);
  for (int t = 0; t < 20; ++t) {
    const MMatrix m = random_traceless(g, 2);
    const auto sol = find_gamma(m);
    ASSERT_EQ(sol.kind, GammaKind::svd_pair);
    std::vector<double> r(grid.size());
    for (std::size_t i = 0; i < grid.n_theta; ++i) {
      for (std::size_t j = 0; j < grid.n_phi; ++j) r[i * grid.n_phi + j] = gamma_residual(m, coin_state(grid.theta(i), grid.phi(j)));
    }
    const auto best = std::min_element(r.begin(), r.end()) - r.begin();
    const auto i = static_cast<std::size_t>(best) / grid.n_phi;
    const auto j = static_cast<std::size_t>(best) % grid.n_phi;
    const Eigen::Vector3d found = bloch(coin_state(grid.theta(i), grid.phi(j)));
    double nearest = 4.0;
    for (const auto& gam : sol.gammas) nearest = std::min(nearest, std::acos(std::clamp(found.dot(bloch(gam)), -1.0, 1.0)));
    // Bloch-sphere distance of two grid cells.
    EXPECT_LT(nearest, 2.0 * (2.0 * grid.d_theta() + grid.d_phi())) << "instance " << t;
  }
}

// ---------------------------------------------------------------------------
// Projection probabilities

TEST(AppendixProbabilities, FirstPair) {
  const auto sol = find_gamma(compute_M(appendix_u(), appendix_v1(), labels::C1));
  const Vector2 plus = plus_state();
  const Vector2 minus = minus_state();
  EXPECT_NEAR(project_factor(appendix_u(), labels::C1, plus).probability, (2 + kR2) / 4, 1e-12);
  EXPECT_NEAR(project_factor(appendix_u(), labels::C1, minus).probability, (2 - kR2) / 4, 1e-12);
  EXPECT_NEAR(project_factor(appendix_v1(), labels::C1, plus).probability, (2 - kR2) / 4, 1e-12);
  EXPECT_NEAR(project_factor(appendix_v1(), labels::C1, minus).probability, (2 + kR2) / 4, 1e-12);
  for (const auto& gam : sol.gammas) {
    const Vector a = project_factor(appendix_u(), labels::C1, gam).amplitudes;
    const Vector b = project_factor(appendix_v1(), labels::C1, gam).amplitudes;
    EXPECT_LT(std::abs(a.dot(b)), 1e-15);
  }
}

TEST(AppendixProbabilities, FirstPairProjectionLosesEntanglement) {
  for (double p1 : {0.5, 0.3, 0.8}) {
    const PureState psi = with_marker(appendix_u(), appendix_v1(), p1);
    const auto r = check_tc(psi, plus_state(), labels::C1, {"R"});
    EXPECT_NEAR(r.p_proj, p1 * (2 + kR2) / 4 + (1 - p1) * (2 - kR2) / 4, 1e-12);
    EXPECT_FALSE(r.tc_satisfied);
    EXPECT_LT(r.post_logneg, r.pre_logneg - 1e-3);
  }
}

TEST(AppendixProbabilities, SecondPairBalancedFamily) {
  for (double phi : {0.0, kPi / 2, kPi}) {
    const Vector2 gam = coin_state(kPi / 4, phi);
    const double want = (2 + kR2 * std::cos(phi)) / 4;
    const Projection pu = project_factor(appendix_u(), labels::C1, gam);
    const Projection pv = project_factor(appendix_v2(), labels::C1, gam);
    EXPECT_NEAR(pu.probability, want, 1e-12) << phi;
    EXPECT_NEAR(pv.probability, want, 1e-12) << phi;
    const cplx e = std::polar(1.0, phi);
    const cplx scale = 2.0 * kR2 * e;
    EXPECT_LT(std::abs(scale * pu.amplitudes(0) - 1.0), 1e-12);
    EXPECT_LT(std::abs(scale * pu.amplitudes(1) - (kR2 * e + 1.0)), 1e-12);
    EXPECT_LT(std::abs(scale * pv.amplitudes(0) - (kR2 + e)), 1e-12);
    EXPECT_LT(std::abs(scale * pv.amplitudes(1) + e), 1e-12);
    EXPECT_LT(std::abs(pu.amplitudes.dot(pv.amplitudes)), 1e-15);
  }
}

TEST(AppendixProbabilities, SecondPairTransfersWithBalancedProjection) {
  const PureState psi = with_marker(appendix_u(), appendix_v2(), 0.5);
  const auto r = check_tc(psi, coin_state(kPi / 4, kPi / 2), labels::C1, {"R"});
  EXPECT_TRUE(r.tc_satisfied);
  EXPECT_NEAR(r.post_logneg, r.pre_logneg, 1e-12);
}

TEST(ProbabilityProperty, WalkOutputsSumToOne) {
  GaussianStream g(35);
  for (int t = 0; t < 200; ++t) {
    const std::size_t steps = 1 + qwe::testing::random_index(7, g);
    WalkSpec spec;
    for (std::size_t k = 0; k < steps; ++k) spec.coins.push_back(CoinOp(Matrix2(random_unitary(2, g))));
    const auto [up, down] = branch_outputs(spec);
    const auto pt = evaluate_projection(BranchPair(up, down, labels::C1), random_vector(2, g));
    EXPECT_NEAR(pt.p_up + pt.p_down, 1.0, 1e-10);
  }
}

// ---------------------------------------------------------------------------
// check_tc

TEST(CheckTc, OneHadamardStepPlusProjection) {
  const auto r = check_tc(walked(WalkSpec::uniform(CoinOp::hadamard(), 1)), plus_state(), labels::C1, kPartyTwo);
  EXPECT_TRUE(r.tc_satisfied);
  EXPECT_TRUE(r.schmidt_agrees);
  EXPECT_NEAR(r.p_up, 0.5, 1e-12);
  EXPECT_NEAR(r.p_down, 0.5, 1e-12);
  EXPECT_LT(r.overlap, 1e-20);
  EXPECT_NEAR(r.entropy, std::log(2.0), 1e-12);
  EXPECT_NEAR(r.p_proj, 0.5, 1e-12);
  EXPECT_NEAR(r.post_logneg, 1.0, 1e-12);
}

TEST(CheckTc, OneHadamardStepUpProjectionDegrades) {
  const auto r = check_tc(walked(WalkSpec::uniform(CoinOp::hadamard(), 1)), Vector2(1.0, 0.0), labels::C1, kPartyTwo);
  EXPECT_FALSE(r.tc_satisfied);
  EXPECT_LT(r.post_logneg, r.pre_logneg - 1e-3);
}

TEST(CheckTc, FourHadamardStepsNeverTransfer) {
  const WalkSpec spec = WalkSpec::uniform(CoinOp::hadamard(), 4);
  const PureState psi = walked(spec);
  for (const auto& gam : find_gamma(m_of(spec)).gammas) {
    EXPECT_FALSE(check_tc(psi, gam, labels::C1, kPartyTwo).tc_satisfied);
  }
  const Grid grid(19, 37);
  for (std::size_t i = 0; i < grid.n_theta; ++i) {
    for (std::size_t j = 0; j < grid.n_phi; ++j) {
      EXPECT_FALSE(check_tc(psi, coin_state(grid.theta(i), grid.phi(j)), labels::C1, kPartyTwo).tc_satisfied);
    }
  }
}

TEST(CheckTc, SecondCoinByRoleSwap) {
  const auto first = check_tc(walked(WalkSpec::uniform(CoinOp::hadamard(), 1)), plus_state(), labels::C1, kPartyTwo);
  const auto second = check_tc(first.post_state, plus_state(), labels::C2, {labels::W1});
  EXPECT_TRUE(second.tc_satisfied);
  EXPECT_NEAR(second.post_logneg, 1.0, 1e-12);
}

TEST(CheckTc, ZeroProbabilityProjectionIsDegenerate) {
  const PureState psi = coin_entangled_state(2, 1.0);
  EXPECT_THROW(check_tc(psi, Vector2(0.0, 1.0), labels::C1, kPartyTwo), DegenerateOutcome);
}

TEST(CheckTc, RejectsCoinInsidePartyTwo) {
  EXPECT_THROW(check_tc(coin_entangled_state(2), plus_state(), labels::C2, kPartyTwo), std::invalid_argument);
}

TEST(CheckTcProperty, VerdictMatchesOverlapAndBalanceForEqualWeights) {
  GaussianStream g(36);
  for (int t = 0; t < 200; ++t) {
    const std::size_t steps = 1 + qwe::testing::random_index(4, g);
    WalkSpec spec;
    for (std::size_t k = 0; k < steps; ++k) spec.coins.push_back(CoinOp(Matrix2(random_unitary(2, g))));
    const PureState psi = walked(spec);
    std::vector<Vector2> gammas = find_gamma(m_of(spec)).gammas;
    gammas.push_back(random_vector(2, g));
    for (const auto& gam : gammas) {
      const auto r = check_tc(psi, gam, labels::C1, kPartyTwo);
      const bool expect = r.overlap < 1e-9 && std::abs(r.p_up - r.p_down) < 1e-9;
      EXPECT_EQ(r.tc_satisfied, expect) << "instance " << t;
    }
  }
}

TEST(CheckTcProperty, SpectralAndSchmidtVerdictsAgree) {
  GaussianStream g(37);
  int transferable = 0;
  for (int t = 0; t < 500; ++t) {
    const Vector2 gam = random_vector(2, g);
    const std::size_t rank = 1 + qwe::testing::random_index(4, g);
    const auto w = random_probabilities(rank, g);
    PureState psi;
    const bool constructed = t % 2 == 0;
    if (constructed) {
      psi = from_schmidt(transferable_vectors(gam, rank, g), w, g);
    } else {
      psi = qwe::testing::random_state(small_four(), g);
    }
    TransferReport r;
    ASSERT_NO_THROW(r = check_tc(psi, gam, labels::C1, kPartyTwo)) << "instance " << t;
    EXPECT_EQ(r.tc_satisfied, r.schmidt_agrees);
    if (constructed) {
      EXPECT_TRUE(r.tc_satisfied) << "instance " << t;
    }
    transferable += r.tc_satisfied ? 1 : 0;
  }
  EXPECT_EQ(transferable, 250);
}

TEST(MonotonicityProperty, EqualWeightStatesNeverGainEntanglement) {
  GaussianStream g(38);
  for (int t = 0; t < 500; ++t) {
    const std::size_t rank = 2 + qwe::testing::random_index(3, g);
    const std::vector<double> w(rank, 1.0 / static_cast<double>(rank));
    const PureState psi = from_schmidt(random_unitary(8, g).leftCols(static_cast<Eigen::Index>(rank)), w, g);
    const auto r = check_tc(psi, random_vector(2, g), labels::C1, kPartyTwo);
    EXPECT_LE(r.post_logneg, r.pre_logneg + 1e-9) << "instance " << t;
  }
}

TEST(MonotonicityProperty, ProjectedSpectrumMajorizesProjectedWeights) {
  GaussianStream g(39);
  for (int t = 0; t < 500; ++t) {
    const std::size_t rank = 2 + qwe::testing::random_index(3, g);
    const auto w = random_probabilities(rank, g);
    const Matrix u = random_unitary(8, g).leftCols(static_cast<Eigen::Index>(rank));
    const PureState psi = from_schmidt(u, w, g);
    const Vector2 gam = random_vector(2, g);
    const auto r = check_tc(psi, gam, labels::C1, kPartyTwo);
    std::vector<double> q(rank);
    for (std::size_t k = 0; k < rank; ++k) {
      const Vector col = u.col(static_cast<Eigen::Index>(k));
      const Vector projected = std::conj(gam(0)) * col.head(4) + std::conj(gam(1)) * col.tail(4);
      q[k] = w[k] * projected.squaredNorm() / r.p_proj;
    }
    const Matrix a = r.post_state.as_matrix({labels::W1});
    ASSERT_TRUE(majorizes(a * a.adjoint(), q)) << "instance " << t;
  }
}

TEST(MonotonicityProperty, UnequalWeightsCanGainUnderOneProjection) {
  // u0 = sqrt(.1)|up,0> + sqrt(.9)|down,0>, u1 = sqrt(.9)|up,1> + sqrt(.1)|down,1>,
  // weights (.9, .1): projecting |up> equalizes the weights.
  Matrix u = Matrix::Zero(8, 2);
  u(0, 0) = std::sqrt(0.1);
  u(4, 0) = std::sqrt(0.9);
  u(1, 1) = std::sqrt(0.9);
  u(5, 1) = std::sqrt(0.1);
  GaussianStream g(40);
  const PureState psi = from_schmidt(u, {0.9, 0.1}, g);
  const auto r = check_tc(psi, Vector2(1.0, 0.0), labels::C1, kPartyTwo);
  EXPECT_NEAR(r.pre_logneg, std::log2(1.6), 1e-12);
  EXPECT_NEAR(r.post_logneg, 1.0, 1e-12);
}

// ---------------------------------------------------------------------------
// Single-projection scans

TEST(Grid, EndpointsAndValidation) {
  const Grid grid(181, 361);
  EXPECT_EQ(grid.size(), 181u * 361u);
  EXPECT_NEAR(grid.theta(180), kPi / 2, 1e-15);
  EXPECT_NEAR(grid.phi(360), 2 * kPi, 1e-15);
  EXPECT_NEAR(grid.theta(45), kPi / 8, 1e-15);
  EXPECT_THROW(Grid(1, 5), std::invalid_argument);
  EXPECT_THROW(Grid(5, 1), std::invalid_argument);
}

TEST(Scan, RowsAreThetaMajor) {
  const auto [up, down] = branch_outputs(WalkSpec::uniform(CoinOp::hadamard(), 2));
  const Grid grid(5, 7);
  const auto rows = scan_projections(up, down, grid);
  ASSERT_EQ(rows.size(), 35u);
  EXPECT_EQ(rows[8].theta, grid.theta(1));
  EXPECT_EQ(rows[8].phi, grid.phi(1));
}

TEST(Scan, DeterministicAcrossThreadCounts) {
  const auto [up, down] = branch_outputs(WalkSpec::uniform(CoinOp::hadamard(), 4));
  const BranchPair bp(up, down, labels::C1);
  const Grid grid(31, 61);
  const auto a = scan_projections(bp, grid, 0.5, 1);
  const auto b = scan_projections(bp, grid, 0.5, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].point.overlap, b[i].point.overlap);
    EXPECT_EQ(a[i].point.post_logneg, b[i].point.post_logneg);
  }
}

TEST(Scan, FourHadamardStepsHaveTwoOrthogonalZeros) {
  const WalkSpec spec = WalkSpec::uniform(CoinOp::hadamard(), 4);
  const auto [up, down] = branch_outputs(spec);
  const BranchPair bp(up, down, labels::C1);
  const Grid grid;
  const auto zeros = refine_overlap_zeros(bp, scan_projections(bp, grid), grid);
  ASSERT_EQ(zeros.size(), 2u);
  EXPECT_LT(std::abs(zeros[0].gamma.dot(zeros[1].gamma)), 1e-9);
  for (const auto& z : zeros) {
    EXPECT_LT(z.point.overlap, 1e-12);
    EXPECT_GT(std::abs(z.point.p_up - z.point.p_down), 1e-3);
    EXPECT_LT(z.point.entropy, std::log(2.0) - 1e-6);
  }
  EXPECT_NEAR(zeros[0].angles.theta, kPi / 8, 1e-9);
  EXPECT_NEAR(std::remainder(zeros[0].angles.phi - kPi, 2 * kPi), 0.0, 1e-9);
  EXPECT_NEAR(zeros[1].angles.theta, 3 * kPi / 8, 1e-9);
  EXPECT_NEAR(std::remainder(zeros[1].angles.phi, 2 * kPi), 0.0, 1e-9);
  // frozen snapshot
  EXPECT_NEAR(zeros[0].point.p_up, 0.6325825214724774, 1e-12);
  EXPECT_NEAR(zeros[0].point.p_down, 0.36741747852752205, 1e-12);
  EXPECT_NEAR(zeros[0].point.entropy, 0.65756689959487868, 1e-12);

  const auto sol = find_gamma(compute_M(down, up, labels::C1));
  EXPECT_EQ(sol.kind, GammaKind::svd_pair);
  for (const auto& z : zeros) {
    EXPECT_TRUE(same_ray(z.gamma, sol.gammas[0], 1e-8) || same_ray(z.gamma, sol.gammas[1], 1e-8));
  }
}

TEST(Scan, OneStepOverlapVanishesOnTheBalancedLine) {
  GaussianStream g(41);
  const CoinOp c(Matrix2(random_unitary(2, g)));
  const auto [up, down] = branch_outputs(WalkSpec::uniform(c, 1));
  const Grid grid(37, 73);
  const auto rows = scan_projections(up, down, grid);
  const double c11c12 = std::norm(c.entry(1, 1)) * std::norm(c.entry(1, 2));
  for (const auto& r : rows) {
    const double want = std::pow(std::cos(2 * r.theta), 2) * c11c12;
    EXPECT_NEAR(r.point.overlap, want, 1e-14);
    if (std::abs(r.theta - kPi / 4) < 1e-12) {
      EXPECT_LT(r.point.overlap, 1e-25);
    }
  }
}

TEST(Scan, IdentityCoinOverlapIsZeroEverywhere) {
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto [up, down] = branch_outputs(WalkSpec::uniform(CoinOp::identity(), n));
    for (const auto& r : scan_projections(up, down, Grid(19, 37))) EXPECT_EQ(r.point.overlap, 0.0);
  }
}

TEST(Scan, WeightedPointMatchesCheckTc) {
  GaussianStream g(42);
  const WalkSpec spec = WalkSpec::uniform(CoinOp::hadamard(), 3);
  const auto [up, down] = branch_outputs(spec);
  const BranchPair bp(up, down, labels::C1);
  for (double p1 : {0.5, 0.2}) {
    const PureState psi = walked(spec, p1);
    for (int t = 0; t < 10; ++t) {
      const Vector2 gam = random_vector(2, g);
      const auto pt = evaluate_projection(bp, gam, p1);
      const auto r = check_tc(psi, gam, labels::C1, kPartyTwo);
      EXPECT_NEAR(pt.branch_prob, r.p_proj, 1e-12);
      EXPECT_NEAR(pt.post_logneg, r.post_logneg, 1e-9);
    }
  }
}

// ---------------------------------------------------------------------------
// Double projections

TEST(DoubleScan, FourHadamardStepsPeakAtOneEbit) {
  const PureState psi = walked(WalkSpec::uniform(CoinOp::hadamard(), 4));
  const Grid grid(19, 37);
  const DoubleScanOptions opt;
  const auto rows = double_projection_scan(psi, grid, opt);
  double max_n = 0.0;
  for (const auto& r : rows) max_n = std::max(max_n, r.logneg());
  EXPECT_NEAR(max_n, 1.0, 1e-9);
  const auto peaks = refine_double_peaks(psi, rows, grid, opt);
  ASSERT_EQ(peaks.size(), 1u);
  EXPECT_NEAR(peaks[0].angles.theta, kPi / 4, 1e-6);
  EXPECT_NEAR(peaks[0].angles.phi, kPi / 2, 1e-6);
  EXPECT_NEAR(peaks[0].row.logneg(), 1.0, 1e-9);
  EXPECT_NEAR(peaks[0].transfer_probability, 55.0 / 128.0, 1e-9);
}

TEST(DoubleScan, OneIdentityStepTransfersOnEveryBalancedBasis) {
  const PureState psi = walked(WalkSpec::uniform(CoinOp::identity(), 1));
  const Grid grid(19, 37);
  const auto rows = double_projection_scan(psi, grid);
  for (const auto& r : rows) {
    if (std::abs(r.theta - kPi / 4) > 1e-12) continue;
    EXPECT_NEAR(r.logneg(), 1.0, 1e-12);
    EXPECT_NEAR(r.transfer_probability(1.0 - 1e-6), 1.0, 1e-12);
  }
}

TEST(DoubleScan, OptimizedSecondProjectionReachesOneEbitEverywhere) {
  const PureState psi = walked(WalkSpec::uniform(CoinOp::hadamard(), 4));
  DoubleScanOptions opt;
  opt.mode = SecondProjection::optimized;
  const CoinBlocks blocks(psi);
  GaussianStream g(43);
  for (int t = 0; t < 5; ++t) {
    const auto r = evaluate_double(blocks, 0.1 + 1.3 * g.uniform(), 2 * kPi * g.uniform(), opt);
    EXPECT_NEAR(r.logneg(), 1.0, 1e-6);
  }
}

TEST(DoubleScan, BranchProbabilitiesSumToOne) {
  const PureState psi = walked(WalkSpec::uniform(CoinOp::hadamard(), 3));
  const CoinBlocks blocks(psi);
  GaussianStream g(44);
  for (int t = 0; t < 20; ++t) {
    const auto r = evaluate_double(blocks, kPi / 2 * g.uniform(), 2 * kPi * g.uniform());
    double p = 0.0;
    for (const auto& b : r.branches) p += b.probability;
    EXPECT_NEAR(p, 1.0, 1e-10);
  }
}
