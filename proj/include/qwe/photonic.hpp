#pragma once

// Two-photon creation-operator model of the polarization reload: half-wave
// plates, a polarizing beamsplitter and coincidence post-selection.
//
// A state is  v |vac> + sum_{m,n} A_mn a_m^dag a_n^dag |vac>  with A
// symmetric. A single-photon mode map a_m^dag -> sum_n U_nm a_n^dag acts as
// A -> U A U^T.

#include "qwe/accumulate.hpp"

namespace qwe::photonic {

enum class Port { a = 0, b = 1 };
enum class Pol { plus = 0, minus = 1 };

struct PhotonMode {
  Port port = Port::a;
  Pol pol = Pol::plus;
  std::size_t oam = 1;  ///< 1-based
};

class TwoPhotonState {
 public:
  explicit TwoPhotonState(std::size_t oam_levels)
      : k_(oam_levels), a_(Matrix::Zero(static_cast<Eigen::Index>(4 * oam_levels), static_cast<Eigen::Index>(4 * oam_levels))) {
    if (oam_levels == 0) throw std::invalid_argument("need at least one OAM level");
  }

  static TwoPhotonState vacuum(std::size_t oam_levels) {
    TwoPhotonState s(oam_levels);
    s.vac_ = 1.0;
    return s;
  }

  std::size_t oam_levels() const noexcept { return k_; }
  std::size_t modes() const noexcept { return 4 * k_; }

  std::size_t index(const PhotonMode& m) const {
    if (m.oam < 1 || m.oam > k_) throw std::invalid_argument("OAM label out of range");
    return (static_cast<std::size_t>(m.port) * 2 + static_cast<std::size_t>(m.pol)) * k_ + (m.oam - 1);
  }

  PhotonMode mode(std::size_t i) const {
    return PhotonMode{static_cast<Port>(i / (2 * k_)), static_cast<Pol>((i / k_) % 2), i % k_ + 1};
  }

  /// Adds c * a_m^dag a_n^dag |vac>.
  void add_pair(const PhotonMode& m, const PhotonMode& n, cplx c) {
    const auto i = static_cast<Eigen::Index>(index(m));
    const auto j = static_cast<Eigen::Index>(index(n));
    a_(i, j) += 0.5 * c;
    a_(j, i) += 0.5 * c;
  }

  const Matrix& pairs() const noexcept { return a_; }
  Matrix& pairs() noexcept { return a_; }
  cplx vacuum_amplitude() const noexcept { return vac_; }

  double norm2() const { return std::norm(vac_) + 2.0 * a_.squaredNorm(); }

  /// Amplitude of the normalized Fock state |1_m 1_n> (m != n) or |2_m>.
  cplx fock_amplitude(const PhotonMode& m, const PhotonMode& n) const {
    const auto i = static_cast<Eigen::Index>(index(m));
    const auto j = static_cast<Eigen::Index>(index(n));
    return i == j ? std::sqrt(2.0) * a_(i, i) : 2.0 * a_(i, j);
  }

  TwoPhotonState transformed(const Matrix& u) const {
    TwoPhotonState out(k_);
    out.vac_ = vac_;
    out.a_ = u * a_ * u.transpose();
    return out;
  }

  /// |<x|y>|^2 for normalized states.
  friend double fidelity(const TwoPhotonState& x, const TwoPhotonState& y) {
    if (x.k_ != y.k_) throw std::invalid_argument("fidelity: OAM ranges differ");
    const cplx ip = std::conj(x.vac_) * y.vac_ + 2.0 * (x.a_.conjugate().cwiseProduct(y.a_)).sum();
    return std::norm(ip);
  }

 private:
  std::size_t k_;
  Matrix a_;
  cplx vac_ = 0.0;
};

/// Mode map of a half-wave plate at `angle` on one port, in the diagonal
/// basis: +  -> cos +  + i sin -,   -  -> i sin +  + cos -.
inline Matrix half_waveplate_map(std::size_t oam_levels, Port port, double angle) {
  const std::size_t k = oam_levels;
  Matrix u = Matrix::Identity(static_cast<Eigen::Index>(4 * k), static_cast<Eigen::Index>(4 * k));
  const double c = std::cos(angle);
  const cplx is(0.0, std::sin(angle));
  TwoPhotonState idx(k);
  for (std::size_t l = 1; l <= k; ++l) {
    const auto p = static_cast<Eigen::Index>(idx.index({port, Pol::plus, l}));
    const auto m = static_cast<Eigen::Index>(idx.index({port, Pol::minus, l}));
    u(p, p) = c;
    u(m, p) = is;
    u(p, m) = is;
    u(m, m) = c;
  }
  return u;
}

/// Mode map of the beamsplitter: + is transmitted, - changes port.
inline Matrix polarizing_beamsplitter_map(std::size_t oam_levels) {
  const std::size_t k = oam_levels;
  Matrix u = Matrix::Zero(static_cast<Eigen::Index>(4 * k), static_cast<Eigen::Index>(4 * k));
  TwoPhotonState idx(k);
  for (std::size_t l = 1; l <= k; ++l) {
    for (Port port : {Port::a, Port::b}) {
      const Port other = port == Port::a ? Port::b : Port::a;
      const auto p = static_cast<Eigen::Index>(idx.index({port, Pol::plus, l}));
      u(p, p) = 1.0;
      const auto from = static_cast<Eigen::Index>(idx.index({port, Pol::minus, l}));
      const auto to = static_cast<Eigen::Index>(idx.index({other, Pol::minus, l}));
      u(to, from) = 1.0;
    }
  }
  return u;
}

inline TwoPhotonState half_waveplate(const TwoPhotonState& s, Port port, double angle) {
  return s.transformed(half_waveplate_map(s.oam_levels(), port, angle));
}

inline TwoPhotonState polarizing_beamsplitter(const TwoPhotonState& s) {
  return s.transformed(polarizing_beamsplitter_map(s.oam_levels()));
}

/// Waveplates on both ports followed by the beamsplitter.
inline TwoPhotonState reload_optics(const TwoPhotonState& s, double theta_a, double theta_b) {
  return polarizing_beamsplitter(half_waveplate(half_waveplate(s, Port::a, theta_a), Port::b, theta_b));
}

struct Coincidence {
  TwoPhotonState state;
  double probability = 0.0;
};

/// Keeps the terms with one photon per port, renormalized.
inline Coincidence postselect_coincidence(const TwoPhotonState& s) {
  const auto half = static_cast<Eigen::Index>(2 * s.oam_levels());
  TwoPhotonState kept(s.oam_levels());
  kept.pairs().topRightCorner(half, half) = s.pairs().topRightCorner(half, half);
  kept.pairs().bottomLeftCorner(half, half) = s.pairs().bottomLeftCorner(half, half);
  const double p = kept.norm2() / s.norm2();
  if (p < tol::degenerate) throw DegenerateOutcome("no coincidence events");
  kept.pairs() /= std::sqrt(kept.norm2());
  return Coincidence{std::move(kept), p};
}

/// Port a -> (C1, W1), port b -> (C2, W2); |+-> -> (|up> +- |down>)/sqrt2;
/// OAM l -> walker position l.
inline PureState to_four_partite(const TwoPhotonState& s) {
  const std::size_t k = s.oam_levels();
  const auto half = static_cast<Eigen::Index>(2 * k);
  const Matrix& a = s.pairs();
  const double same_port = a.topLeftCorner(half, half).squaredNorm() + a.bottomRightCorner(half, half).squaredNorm();
  if (same_port > tol::degenerate || std::norm(s.vacuum_amplitude()) > tol::degenerate) {
    throw std::invalid_argument("to_four_partite: state is not a coincidence state");
  }
  Matrix2 pol_to_coin;  // columns: |+>, |->
  pol_to_coin << 1.0, 1.0, 1.0, -1.0;
  pol_to_coin /= std::sqrt(2.0);
  const auto layout = four_partite_layout(k);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
  const auto K = static_cast<Eigen::Index>(k);
  for (std::size_t pa = 0; pa < 2; ++pa) {
    for (std::size_t la = 1; la <= k; ++la) {
      for (std::size_t pb = 0; pb < 2; ++pb) {
        for (std::size_t lb = 1; lb <= k; ++lb) {
          const cplx amp = s.fock_amplitude({Port::a, static_cast<Pol>(pa), la}, {Port::b, static_cast<Pol>(pb), lb});
          if (amp == cplx(0.0)) continue;
          for (Eigen::Index c1 = 0; c1 < 2; ++c1) {
            for (Eigen::Index c2 = 0; c2 < 2; ++c2) {
              const Eigen::Index f =
                  ((c1 * K + static_cast<Eigen::Index>(la - 1)) * 2 + c2) * K + static_cast<Eigen::Index>(lb - 1);
              out(f) += amp * pol_to_coin(c1, static_cast<Eigen::Index>(pa)) * pol_to_coin(c2, static_cast<Eigen::Index>(pb));
            }
          }
        }
      }
    }
  }
  return PureState::normalized(layout, std::move(out));
}

/// (a+_1 b+_1 +- a+_2 b+_2)|vac>/sqrt2, or with - polarizations when
/// `coins_minus` is set.
inline TwoPhotonState reload_input(int sign, bool coins_minus = false) {
  if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
  TwoPhotonState s(2);
  const Pol p = coins_minus ? Pol::minus : Pol::plus;
  s.add_pair({Port::a, p, 1}, {Port::b, p, 1}, 1.0 / std::sqrt(2.0));
  s.add_pair({Port::a, p, 2}, {Port::b, p, 2}, static_cast<double>(sign) / std::sqrt(2.0));
  return s;
}

/// Coin table for (|++> + coin_sign |-->)/sqrt2.
inline Matrix2 diagonal_coin_pair(int coin_sign) {
  const Vector2 p = plus_state();
  const Vector2 m = minus_state();
  return (p * p.transpose() + static_cast<double>(coin_sign) * m * m.transpose()) / std::sqrt(2.0);
}

/// (|++> + coin_sign |-->)/sqrt2 (x) (|1,1> + walker_sign |2,2>)/sqrt2.
inline PureState coin_walker_target(int coin_sign, int walker_sign) {
  return coins_with_walkers(diagonal_coin_pair(coin_sign), state_from_signs({1, walker_sign}).as_matrix({labels::W1}));
}

/// The coincidence state as printed for input sign s: coins (|++> + s|-->),
/// walkers (|1,1> - s|2,2>).
inline PureState printed_target(int sign) { return coin_walker_target(sign, -sign); }

struct ReloadRun {
  int sign = 1;
  bool coins_minus = false;
  double probability = 0.0;
  PureState output;
  double fidelity_printed = 0.0;      ///< against printed_target(sign)
  double fidelity_coin_flipped = 0.0; ///< against coins (|++> - |-->), walkers (|1,1> + s|2,2>)
  double coin_logneg = 0.0;
  double walker_logneg = 0.0;
};

inline ReloadRun run_reload(int sign, bool coins_minus = false, double theta_a = std::numbers::pi / 4.0,
                            double theta_b = std::numbers::pi / 4.0) {
  ReloadRun r;
  r.sign = sign;
  r.coins_minus = coins_minus;
  const auto c = postselect_coincidence(reload_optics(reload_input(sign, coins_minus), theta_a, theta_b));
  r.probability = c.probability;
  r.output = to_four_partite(c.state);
  r.fidelity_printed = fidelity(r.output, printed_target(sign));
  r.fidelity_coin_flipped = fidelity(r.output, coin_walker_target(-1, sign));
  const PureState coins_first = permute(r.output, {labels::C1, labels::C2, labels::W1, labels::W2});
  const auto coin_rho = partial_trace(coins_first, {labels::C1, labels::C2});
  r.coin_logneg = log_negativity(coin_rho, Bipartition{{labels::C1}, {labels::C2}});
  const auto walker_rho = partial_trace(coins_first, {labels::W1, labels::W2});
  r.walker_logneg = log_negativity(walker_rho, Bipartition{{labels::W1}, {labels::W2}});
  return r;
}

}  // namespace qwe::photonic
