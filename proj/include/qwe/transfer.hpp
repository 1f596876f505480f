#pragma once

// Entanglement transfer by a local coin projection: the M-matrix, the
// projection finder, the transferability check and the (theta, phi) scans.

#include <array>
#include <numbers>
#include <optional>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "qwe/layouts.hpp"
#include "qwe/optimize.hpp"
#include "qwe/parallel.hpp"

namespace qwe {

struct ProjectionAngles {
  double theta = 0.0;  ///< [0, pi/2]
  double phi = 0.0;    ///< [0, 2 pi)
};

/// cos(theta)|up> + e^{i phi} sin(theta)|down>.
inline Vector2 coin_state(const ProjectionAngles& a) {
  return Vector2(std::cos(a.theta), std::polar(std::sin(a.theta), a.phi));
}

inline Vector2 coin_state(double theta, double phi) { return coin_state(ProjectionAngles{theta, phi}); }

/// The state orthogonal to g with the same conventions: (-conj g1, conj g0).
inline Vector2 orthogonal(const Vector2& g) { return Vector2(-std::conj(g(1)), std::conj(g(0))); }

/// Angles of a unit coin vector, up to global phase.
inline ProjectionAngles angles_of(const Vector2& g) {
  const double a0 = std::abs(g(0));
  const double a1 = std::abs(g(1));
  ProjectionAngles out;
  out.theta = std::atan2(a1, a0);
  if (a1 > 0.0 && a0 > 0.0) {
    double phi = std::arg(g(1)) - std::arg(g(0));
    phi = std::fmod(phi, 2.0 * std::numbers::pi);
    if (phi < 0.0) phi += 2.0 * std::numbers::pi;
    if (phi >= 2.0 * std::numbers::pi) phi = 0.0;
    out.phi = phi;
  }
  return out;
}

/// Rotates the global phase so the largest component is real and positive.
inline Vector2 fix_phase(Vector2 v) {
  const Eigen::Index k = std::abs(v(0)) >= std::abs(v(1)) ? 0 : 1;
  const double m = std::abs(v(k));
  if (m > 0.0) v *= std::conj(v(k)) / m;
  return v / v.norm();
}

// ---------------------------------------------------------------------------
// M-matrix and projection finder

using MMatrix = Matrix2;

/// M = tr_W(|u><v|), so that <gamma|M|gamma> = <gamma|tr_W(|u><v|)|gamma>.
inline MMatrix compute_M(const PureState& u, const PureState& v, const std::string& coin) {
  if (!(u.layout() == v.layout())) throw std::invalid_argument("compute_M: states live on different layouts");
  if (u.layout().dim(coin) != 2) throw std::invalid_argument("compute_M: coin factor must have dimension 2");
  if (std::abs(v.amplitudes().dot(u.amplitudes())) > tol::zero) {
    throw std::invalid_argument("compute_M: states are not orthogonal");
  }
  return u.as_matrix({coin}) * v.as_matrix({coin}).adjoint();
}

enum class GammaKind { zero_matrix, normal_family, svd_pair };

inline const char* to_string(GammaKind k) {
  switch (k) {
    case GammaKind::zero_matrix: return "zero_matrix";
    case GammaKind::normal_family: return "normal_family";
    case GammaKind::svd_pair: return "svd_pair";
  }
  return "?";
}

struct GammaSolution {
  GammaKind kind = GammaKind::zero_matrix;
  std::vector<Vector2> gammas;
  /// Orthonormal pair spanning the balanced family (normal and zero cases).
  std::array<Vector2, 2> basis{Vector2(1.0, 0.0), Vector2(0.0, 1.0)};

  /// (|v1> + e^{i phi}|v2>)/sqrt2 over the stored basis. Only a solution for
  /// the zero and normal kinds.
  Vector2 balanced(double phi) const {
    return (basis[0] + std::polar(1.0, phi) * basis[1]) / std::sqrt(2.0);
  }
};

inline double gamma_residual(const MMatrix& m, const Vector2& g) { return std::abs(g.dot(m * g)); }

inline GammaSolution find_gamma(const MMatrix& m) {
  if (std::abs(m.trace()) > tol::hermitian) throw std::invalid_argument("find_gamma: M is not traceless");
  GammaSolution out;
  const double scale = m.norm();
  if (scale <= tol::hermitian) {
    out.kind = GammaKind::zero_matrix;
    out.gammas = {out.balanced(0.0), out.balanced(std::numbers::pi)};
    return out;
  }
  const MMatrix comm = m * m.adjoint() - m.adjoint() * m;
  if (comm.norm() <= tol::hermitian * scale * scale) {
    Eigen::ComplexEigenSolver<MMatrix> es(m);
    Vector2 v1 = fix_phase(es.eigenvectors().col(0));
    Vector2 v2 = es.eigenvectors().col(1);
    if (std::abs(v2(0)) > std::abs(v1(0))) std::swap(v1, v2);
    v2 -= v1.dot(v2) * v1;
    v2 = fix_phase(v2);
    out.kind = GammaKind::normal_family;
    out.basis = {v1, v2};
    out.gammas = {out.balanced(0.0), out.balanced(std::numbers::pi)};
    return out;
  }
  Eigen::JacobiSVD<MMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.kind = GammaKind::svd_pair;
  out.gammas = {fix_phase(svd.matrixV().col(0)), fix_phase(svd.matrixV().col(1))};
  return out;
}

// ---------------------------------------------------------------------------
// Transferability check

struct TransferReport {
  ProjectionAngles angles;
  Vector2 gamma;
  double overlap = 0.0;
  double p_up = 0.0;
  double p_down = 0.0;
  double entropy = 0.0;
  double p_proj = 0.0;
  bool tc_satisfied = false;   ///< nonzero spectra of the reduced states agree
  bool schmidt_agrees = false; ///< nonzero Schmidt coefficients agree
  double pre_logneg = 0.0;
  double post_logneg = 0.0;
  PureState post_state;
};

namespace detail {

/// Nonzero (> 1e-9) entries, descending.
inline std::vector<double> nonzero_sorted(const RealVector& v) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) > tol::zero) out.push_back(v(i));
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

inline bool same_multiset(const std::vector<double>& a, const std::vector<double>& b, double tol = 1e-8) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > tol) return false;
  }
  return true;
}

inline double pair_entropy(double p, double q) {
  const double s = p + q;
  if (s <= 0.0) return 0.0;
  const std::array<double, 2> w{p / s, q / s};
  return shannon_entropy(w);
}

}  // namespace detail

/// Projects `coin` of psi onto gamma and checks that the Schmidt spectrum
/// across (party one | party_two) survives. Party one is every factor not in
/// `party_two`, including `coin`. p_up and p_down are the projected weights of
/// the two leading Schmidt vectors on party one; overlap is the squared
/// overlap between their projections.
inline TransferReport check_tc(const PureState& psi, const Vector2& gamma, const std::string& coin,
                               const LabelSet& party_two) {
  if (std::abs(gamma.norm() - 1.0) > tol::norm) throw std::invalid_argument("check_tc: gamma is not normalized");
  const auto& layout = psi.layout();
  if (std::find(party_two.begin(), party_two.end(), coin) != party_two.end()) {
    throw std::invalid_argument("check_tc: the projected coin must not belong to party two");
  }
  const LabelSet party_one = layout.complement(party_two);
  if (party_one.size() < 2) throw std::invalid_argument("check_tc: party one needs a factor besides the coin");
  const Bipartition before{party_one, layout.subset(party_two).labels()};
  validate_bipartition(layout, before);

  TransferReport r;
  r.gamma = gamma;
  r.angles = angles_of(gamma);

  const Projection proj = project_factor(psi, coin, gamma);
  r.p_proj = proj.probability;
  if (proj.probability < tol::degenerate) throw DegenerateOutcome("check_tc: zero-probability projection");
  r.post_state = proj.state();

  const LabelSet one_after = r.post_state.layout().complement(party_two);
  const Bipartition after{one_after, r.post_state.layout().subset(party_two).labels()};

  const auto rho_before = partial_trace(psi, before.left).spectrum();
  const auto rho_after = partial_trace(r.post_state, after.left).spectrum();
  r.tc_satisfied = detail::same_multiset(detail::nonzero_sorted(rho_before), detail::nonzero_sorted(rho_after));

  const SchmidtData sd = schmidt(psi, before);
  const RealVector s_after = schmidt_coefficients(r.post_state.as_matrix(after.left));
  r.schmidt_agrees = detail::same_multiset(detail::nonzero_sorted(sd.coefficients.cwiseAbs2()),
                                           detail::nonzero_sorted(s_after.cwiseAbs2()));
  if (r.tc_satisfied != r.schmidt_agrees) throw std::logic_error("check_tc: spectral and Schmidt verdicts disagree");

  // Party-one Schmidt vectors projected by gamma.
  const SubsystemLayout one_layout = layout.subset(party_one);
  const std::size_t rank = std::max<std::size_t>(1, (sd.coefficients.array().square() > tol::zero).count());
  std::vector<Vector> a;
  for (std::size_t k = 0; k < std::min<std::size_t>(rank, 2); ++k) {
    a.push_back(project_factor(one_layout, sd.left_vectors.col(static_cast<Eigen::Index>(k)), coin, gamma).amplitudes);
  }
  r.p_up = a[0].squaredNorm();
  if (a.size() > 1) {
    r.p_down = a[1].squaredNorm();
    r.overlap = std::norm(a[0].dot(a[1]));
  } else {
    r.p_down = r.p_up;
  }
  r.entropy = detail::pair_entropy(r.p_up, r.p_down);
  r.pre_logneg = log_negativity(psi, before);
  r.post_logneg = log_negativity(r.post_state, after);
  return r;
}

// ---------------------------------------------------------------------------
// Grid scans

/// theta_i = i (pi/2)/(n_theta-1), phi_j = j 2pi/(n_phi-1); both ends included.
struct Grid {
  std::size_t n_theta = 181;
  std::size_t n_phi = 361;

  Grid() = default;
  Grid(std::size_t nt, std::size_t np) : n_theta(nt), n_phi(np) {
    if (nt < 2 || np < 2) throw std::invalid_argument("grid dimensions must be at least 2");
  }

  std::size_t size() const noexcept { return n_theta * n_phi; }
  double theta(std::size_t i) const { return static_cast<double>(i) * (std::numbers::pi / 2.0) / static_cast<double>(n_theta - 1); }
  double phi(std::size_t j) const { return static_cast<double>(j) * 2.0 * std::numbers::pi / static_cast<double>(n_phi - 1); }
  double d_theta() const { return theta(1); }
  double d_phi() const { return phi(1); }
};

/// Coin-major (2 x L) views of the two walk outputs.
struct BranchPair {
  Matrix up;
  Matrix down;

  BranchPair(const PureState& psi_up, const PureState& psi_down, const std::string& coin) {
    if (!(psi_up.layout() == psi_down.layout())) throw std::invalid_argument("branch states live on different layouts");
    up = psi_up.as_matrix({coin});
    down = psi_down.as_matrix({coin});
  }
  BranchPair(Matrix u, Matrix d) : up(std::move(u)), down(std::move(d)) {}

  /// <gamma|coin applied to each branch.
  std::pair<Vector, Vector> project(const Vector2& g) const {
    return {up.transpose() * g.conjugate(), down.transpose() * g.conjugate()};
  }
};

struct ScanPoint {
  double overlap = 0.0;
  double p_up = 0.0;
  double p_down = 0.0;
  double entropy = 0.0;
  double post_logneg = 0.0;  ///< after projecting coin 1 only
  double branch_prob = 0.0;  ///< probability of that projection
};

/// Weighted single projection of sqrt(p1)|Psi_up>|a> + sqrt(1-p1)|Psi_down>|b>
/// with orthonormal |a>, |b> on party two.
inline ScanPoint evaluate_projection(const BranchPair& bp, const Vector2& g, double p1 = 0.5) {
  const auto [a, b] = bp.project(g);
  ScanPoint pt;
  pt.p_up = a.squaredNorm();
  pt.p_down = b.squaredNorm();
  const cplx ab = a.dot(b);
  pt.overlap = std::norm(ab);
  pt.entropy = detail::pair_entropy(pt.p_up, pt.p_down);
  const double p2 = 1.0 - p1;
  Matrix2 k;
  k << p1 * pt.p_up, std::sqrt(p1 * p2) * ab, std::sqrt(p1 * p2) * std::conj(ab), p2 * pt.p_down;
  pt.branch_prob = k.trace().real();
  if (pt.branch_prob >= tol::degenerate) {
    Eigen::SelfAdjointEigenSolver<Matrix2> es(k, Eigen::EigenvaluesOnly);
    RealVector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    pt.post_logneg = log_negativity_from_schmidt(s);
  }
  return pt;
}

struct ScanRow {
  double theta = 0.0;
  double phi = 0.0;
  ScanPoint point;
};

/// Single-projection scan, theta-major.
inline std::vector<ScanRow> scan_projections(const BranchPair& bp, const Grid& grid, double p1 = 0.5,
                                             std::size_t threads = 0) {
  std::vector<ScanRow> rows(grid.size());
  parallel_for(
      grid.size(),
      [&](std::size_t idx) {
        const std::size_t i = idx / grid.n_phi;
        const std::size_t j = idx % grid.n_phi;
        ScanRow& r = rows[idx];
        r.theta = grid.theta(i);
        r.phi = grid.phi(j);
        r.point = evaluate_projection(bp, coin_state(r.theta, r.phi), p1);
      },
      threads);
  return rows;
}

inline std::vector<ScanRow> scan_projections(const PureState& psi_up, const PureState& psi_down, const Grid& grid,
                                             const std::string& coin = labels::C1, double p1 = 0.5,
                                             std::size_t threads = 0) {
  return scan_projections(BranchPair(psi_up, psi_down, coin), grid, p1, threads);
}

struct OverlapZero {
  ProjectionAngles angles;
  Vector2 gamma;
  ScanPoint point;
};

namespace detail {

inline ProjectionAngles normalize_angles(double theta, double phi) {
  const double pi = std::numbers::pi;
  theta = std::fmod(theta, 2.0 * pi);
  if (theta < 0.0) theta += 2.0 * pi;
  if (theta > pi) {
    theta = 2.0 * pi - theta;
    phi += pi;
  }
  if (theta > pi / 2.0) {
    theta = pi - theta;
    phi += pi;
  }
  return angles_of(coin_state(theta, phi));
}

/// Damped Newton on f(theta, phi) = <a|b> (two real equations).
inline std::optional<ProjectionAngles> newton_zero(const BranchPair& bp, ProjectionAngles start,
                                                   double accept, int max_iter = 60) {
  auto f = [&](double t, double p) {
    const auto [a, b] = bp.project(coin_state(t, p));
    const cplx v = a.dot(b);
    return Eigen::Vector2d(v.real(), v.imag());
  };
  double t = start.theta;
  double p = start.phi;
  Eigen::Vector2d fv = f(t, p);
  const double h = 1e-7;
  for (int it = 0; it < max_iter && fv.squaredNorm() >= accept * accept * 1e-4; ++it) {
    Eigen::Matrix2d jac;
    jac.col(0) = (f(t + h, p) - f(t - h, p)) / (2.0 * h);
    jac.col(1) = (f(t, p + h) - f(t, p - h)) / (2.0 * h);
    const Eigen::Vector2d step = jac.jacobiSvd(Eigen::ComputeFullU | Eigen::ComputeFullV).solve(-fv);
    double lambda = 1.0;
    bool improved = false;
    for (int k = 0; k < 40; ++k, lambda *= 0.5) {
      const Eigen::Vector2d cand = f(t + lambda * step(0), p + lambda * step(1));
      if (cand.squaredNorm() < fv.squaredNorm()) {
        t += lambda * step(0);
        p += lambda * step(1);
        fv = cand;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  if (fv.squaredNorm() >= accept) return std::nullopt;
  return normalize_angles(t, p);
}

}  // namespace detail

/// Refines grid-resolved overlap minima into certified zeros (O < accept),
/// deduplicated up to global phase. Sorted by (theta, phi).
inline std::vector<OverlapZero> refine_overlap_zeros(const BranchPair& bp, const std::vector<ScanRow>& rows,
                                                     const Grid& grid, double p1 = 0.5, double accept = 1e-12,
                                                     std::size_t max_candidates = 32) {
  if (rows.size() != grid.size()) throw std::invalid_argument("scan rows do not match the grid");
  const std::size_t nt = grid.n_theta;
  const std::size_t np = grid.n_phi - 1;  // last column repeats phi = 0
  auto at = [&](std::size_t i, std::size_t j) { return rows[i * grid.n_phi + (j % np)].point.overlap; };
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < np; ++j) {
      const double o = at(i, j);
      bool minimum = true;
      for (int di = -1; di <= 1 && minimum; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          const long ii = static_cast<long>(i) + di;
          if (ii < 0 || ii >= static_cast<long>(nt)) continue;
          const std::size_t jj = (j + np + static_cast<std::size_t>(dj + 1) - 1) % np;
          if (at(static_cast<std::size_t>(ii), jj) < o) {
            minimum = false;
            break;
          }
        }
      }
      if (minimum) candidates.push_back(i * grid.n_phi + j);
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t x, std::size_t y) { return rows[x].point.overlap < rows[y].point.overlap; });
  if (candidates.size() > max_candidates) candidates.resize(max_candidates);

  std::vector<OverlapZero> out;
  for (std::size_t idx : candidates) {
    const auto refined = detail::newton_zero(bp, {rows[idx].theta, rows[idx].phi}, accept);
    if (!refined) continue;
    const Vector2 g = coin_state(*refined);
    const bool seen = std::any_of(out.begin(), out.end(),
                                  [&](const OverlapZero& z) { return std::norm(z.gamma.dot(g)) > 1.0 - 1e-8; });
    if (seen) continue;
    out.push_back(OverlapZero{*refined, g, evaluate_projection(bp, g, p1)});
  }
  std::sort(out.begin(), out.end(), [](const OverlapZero& x, const OverlapZero& y) {
    return std::tie(x.angles.theta, x.angles.phi) < std::tie(y.angles.theta, y.angles.phi);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Double projection (both coins)

/// The four coin blocks T[c1][c2] (W1 x W2) of a four-partite state.
struct CoinBlocks {
  std::array<std::array<Matrix, 2>, 2> t;

  explicit CoinBlocks(const PureState& s) {
    const SubsystemLayout want = s.layout().subset({labels::C1, labels::W1, labels::C2, labels::W2});
    if (!(want == s.layout()) || s.layout().size() != 4 || s.layout().dim(labels::C1) != 2 ||
        s.layout().dim(labels::C2) != 2) {
      throw std::invalid_argument("expected a (C1, W1, C2, W2) layout");
    }
    const auto l1 = static_cast<Eigen::Index>(s.layout().dim(labels::W1));
    const auto l2 = static_cast<Eigen::Index>(s.layout().dim(labels::W2));
    const Vector& a = s.amplitudes();
    for (Eigen::Index c1 = 0; c1 < 2; ++c1) {
      for (Eigen::Index c2 = 0; c2 < 2; ++c2) {
        Matrix m(l1, l2);
        for (Eigen::Index w1 = 0; w1 < l1; ++w1) {
          for (Eigen::Index w2 = 0; w2 < l2; ++w2) m(w1, w2) = a(((c1 * l1 + w1) * 2 + c2) * l2 + w2);
        }
        t[static_cast<std::size_t>(c1)][static_cast<std::size_t>(c2)] = std::move(m);
      }
    }
  }

  /// Unnormalized W1 x W2 amplitudes after <g| on C1 and <d| on C2.
  Matrix project(const Vector2& g, const Vector2& d) const {
    Matrix y = Matrix::Zero(t[0][0].rows(), t[0][0].cols());
    for (std::size_t c1 = 0; c1 < 2; ++c1) {
      for (std::size_t c2 = 0; c2 < 2; ++c2) {
        const cplx w = std::conj(g(static_cast<Eigen::Index>(c1))) * std::conj(d(static_cast<Eigen::Index>(c2)));
        if (w != cplx(0.0)) y += w * t[c1][c2];
      }
    }
    return y;
  }
};

struct BranchResult {
  double logneg = 0.0;
  double probability = 0.0;
  bool degenerate = false;
};

inline BranchResult evaluate_branch(const CoinBlocks& blocks, const Vector2& g, const Vector2& d) {
  const Matrix y = blocks.project(g, d);
  BranchResult r;
  r.probability = y.squaredNorm();
  if (r.probability < tol::degenerate) {
    r.degenerate = true;
    return r;
  }
  r.logneg = log_negativity_from_schmidt(schmidt_coefficients(y));
  return r;
}

enum class SecondProjection {
  same_as_first,  ///< coin 2 measured in the same basis {gamma, gamma_perp}
  optimized       ///< coin 2 basis maximizing N, per first outcome
};

struct DoubleScanOptions {
  SecondProjection mode = SecondProjection::same_as_first;
  Grid second_grid{19, 37};
  double n_target = 1.0 - 1e-6;
  std::size_t threads = 0;
};

/// Outcomes of measuring coin 1 in {gamma, gamma_perp} and coin 2 in
/// a second basis chosen per first outcome: delta after gamma, delta' after
/// gamma_perp. Index 0 = (gamma, delta), 1 = (gamma, delta_perp),
/// 2 = (gamma_perp, delta'_perp), 3 = (gamma_perp, delta'). In the default
/// mode delta = gamma and delta' = gamma_perp.
struct DoubleScanRow {
  double theta = 0.0;
  double phi = 0.0;
  std::array<BranchResult, 4> branches;
  std::array<Vector2, 2> second;  ///< delta after gamma and delta' after gamma_perp

  /// N of the (gamma, delta) branch.
  double logneg() const { return branches[0].logneg; }
  /// P(gamma, delta) + P(gamma_perp, delta').
  double branch_prob() const { return branches[0].probability + branches[3].probability; }
  /// Sum of probabilities of branches with N >= n_target.
  double transfer_probability(double n_target) const {
    double p = 0.0;
    for (const auto& b : branches) {
      if (!b.degenerate && b.logneg >= n_target) p += b.probability;
    }
    return p;
  }
  bool any_degenerate() const {
    return std::any_of(branches.begin(), branches.end(), [](const BranchResult& b) { return b.degenerate; });
  }
};

namespace detail {

/// Coin-2 basis maximizing N after coin 1 was projected on g: grid search
/// seeded with find_gamma candidates, then coordinate ascent.
inline Vector2 best_second_projection(const CoinBlocks& blocks, const Vector2& g, const Grid& grid) {
  auto n_of = [&](double t, double p) {
    const BranchResult r = evaluate_branch(blocks, g, coin_state(t, p));
    return r.degenerate ? -1.0 : r.logneg;
  };
  double best_t = 0.0;
  double best_p = 0.0;
  double best = -2.0;
  auto consider = [&](double t, double p) {
    const double n = n_of(t, p);
    if (n > best) {
      best = n;
      best_t = t;
      best_p = p;
    }
  };
  // Seeds from the M-matrix of the two leading party-two Schmidt vectors.
  Matrix y0 = blocks.t[0][0] * std::conj(g(0)) + blocks.t[1][0] * std::conj(g(1));
  Matrix y1 = blocks.t[0][1] * std::conj(g(0)) + blocks.t[1][1] * std::conj(g(1));
  const Eigen::Index l1 = y0.rows();
  const Eigen::Index l2 = y0.cols();
  Matrix rest(l1, 2 * l2);  // W1 x (C2, W2)
  rest << y0, y1;
  if (rest.squaredNorm() >= tol::degenerate) {
    Eigen::JacobiSVD<Matrix> svd(rest, Eigen::ComputeThinV);
    if (svd.singularValues().size() >= 2 && svd.singularValues()(1) > tol::zero) {
      auto col_as_state = [&](Eigen::Index k) {
        Matrix m(2, l2);
        const Vector v = svd.matrixV().col(k).conjugate();
        for (Eigen::Index c = 0; c < 2; ++c) m.row(c) = v.segment(c * l2, l2).transpose();
        return m;
      };
      const Matrix u = col_as_state(0);
      const Matrix v = col_as_state(1);
      const MMatrix m = u * v.adjoint();
      if (std::abs(m.trace()) <= tol::hermitian) {
        for (const auto& c : find_gamma(m).gammas) {
          const auto a = angles_of(c);
          consider(a.theta, a.phi);
        }
      }
    }
  }
  for (std::size_t i = 0; i < grid.n_theta; ++i) {
    for (std::size_t j = 0; j + 1 < grid.n_phi; ++j) consider(grid.theta(i), grid.phi(j));
  }
  const auto [pt, value] = coordinate_ascent(n_of, best_t, best_p, grid.d_theta(), grid.d_phi());
  (void)value;
  return coin_state(pt.first, pt.second);
}

}  // namespace detail

inline DoubleScanRow evaluate_double(const CoinBlocks& blocks, double theta, double phi,
                                     const DoubleScanOptions& opt = {}) {
  DoubleScanRow r;
  r.theta = theta;
  r.phi = phi;
  const Vector2 g = coin_state(theta, phi);
  const Vector2 gp = orthogonal(g);
  if (opt.mode == SecondProjection::same_as_first) {
    r.second = {g, gp};
  } else {
    r.second = {detail::best_second_projection(blocks, g, opt.second_grid),
                detail::best_second_projection(blocks, gp, opt.second_grid)};
  }
  r.branches[0] = evaluate_branch(blocks, g, r.second[0]);
  r.branches[1] = evaluate_branch(blocks, g, orthogonal(r.second[0]));
  r.branches[2] = evaluate_branch(blocks, gp, orthogonal(r.second[1]));
  r.branches[3] = evaluate_branch(blocks, gp, r.second[1]);
  return r;
}

/// Double-projection scan, theta-major.
inline std::vector<DoubleScanRow> double_projection_scan(const PureState& four_partite, const Grid& grid,
                                                         const DoubleScanOptions& opt = {}) {
  const CoinBlocks blocks(four_partite);
  std::vector<DoubleScanRow> rows(grid.size());
  parallel_for(
      grid.size(),
      [&](std::size_t idx) {
        rows[idx] = evaluate_double(blocks, grid.theta(idx / grid.n_phi), grid.phi(idx % grid.n_phi), opt);
      },
      opt.threads);
  return rows;
}

struct DoublePeak {
  ProjectionAngles angles;
  DoubleScanRow row;
  double transfer_probability = 0.0;
};

/// Refines the grid maxima of N(gamma, gamma) by golden-section coordinate
/// ascent. Returns peaks with N >= n_target, one per measurement basis
/// (gamma and gamma_perp describe the same basis).
inline std::vector<DoublePeak> refine_double_peaks(const PureState& four_partite, const std::vector<DoubleScanRow>& rows,
                                                   const Grid& grid, const DoubleScanOptions& opt = {},
                                                   double seed_floor = 1.0 - 1e-3) {
  if (rows.size() != grid.size()) throw std::invalid_argument("scan rows do not match the grid");
  const CoinBlocks blocks(four_partite);
  const std::size_t np = grid.n_phi - 1;
  auto n_at = [&](std::size_t i, std::size_t j) { return rows[i * grid.n_phi + (j % np)].logneg(); };
  std::vector<std::size_t> seeds;
  for (std::size_t i = 0; i < grid.n_theta; ++i) {
    for (std::size_t j = 0; j < np; ++j) {
      const double n = n_at(i, j);
      if (n < seed_floor) continue;
      bool maximum = true;
      for (int di = -1; di <= 1 && maximum; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const long ii = static_cast<long>(i) + di;
          if ((di == 0 && dj == 0) || ii < 0 || ii >= static_cast<long>(grid.n_theta)) continue;
          if (n_at(static_cast<std::size_t>(ii), (j + np + static_cast<std::size_t>(dj + 1) - 1) % np) > n) {
            maximum = false;
            break;
          }
        }
      }
      if (maximum) seeds.push_back(i * grid.n_phi + j);
    }
  }
  std::vector<DoublePeak> out;
  for (std::size_t idx : seeds) {
    auto n_of = [&](double t, double p) {
      const BranchResult b = evaluate_branch(blocks, coin_state(t, p), coin_state(t, p));
      return b.degenerate ? -1.0 : b.logneg;
    };
    const auto [pt, value] = coordinate_ascent(n_of, rows[idx].theta, rows[idx].phi, grid.d_theta(), grid.d_phi());
    if (value < opt.n_target) continue;
    const ProjectionAngles a = detail::normalize_angles(pt.first, pt.second);
    const Vector2 g = coin_state(a);
    const bool seen = std::any_of(out.begin(), out.end(), [&](const DoublePeak& pk) {
      const Vector2 h = coin_state(pk.angles);
      return std::norm(h.dot(g)) > 1.0 - 1e-8 || std::norm(h.dot(g)) < 1e-8;
    });
    if (seen) continue;
    DoublePeak peak;
    peak.angles = a;
    peak.row = evaluate_double(blocks, a.theta, a.phi, opt);
    peak.transfer_probability = peak.row.transfer_probability(opt.n_target);
    out.push_back(peak);
  }
  return out;
}

}  // namespace qwe
