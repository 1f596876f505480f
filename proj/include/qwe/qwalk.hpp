#pragma once

// Discrete-time coined quantum walk on a finite line segment. Coin basis:
// index 0 = up, index 1 = down. Walker positions are 0-based here; position
// k is printed as k + 1.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "qwe/qstate.hpp"
#include "qwe/rng.hpp"

namespace qwe {

/// A coin factor and the walker factor it controls.
struct WalkPair {
  std::string coin;
  std::string walker;
};

/// 2x2 unitary coin flip.
class CoinOp {
 public:
  CoinOp() : m_(Matrix2::Identity()) {}

  explicit CoinOp(const Matrix2& m) : m_(m) {
    if ((m_.adjoint() * m_ - Matrix2::Identity()).norm() > tol::norm) {
      throw std::invalid_argument("coin operator is not unitary");
    }
  }

  CoinOp(cplx c11, cplx c12, cplx c21, cplx c22) : CoinOp(make(c11, c12, c21, c22)) {}

  static CoinOp identity() { return CoinOp(); }

  static CoinOp hadamard() {
    const double h = 1.0 / std::sqrt(2.0);
    return CoinOp(h, h, h, -h);
  }

  const Matrix2& matrix() const noexcept { return m_; }
  /// 1-based entry c_ij.
  cplx entry(int i, int j) const { return m_(i - 1, j - 1); }

 private:
  static Matrix2 make(cplx c11, cplx c12, cplx c21, cplx c22) {
    Matrix2 m;
    m << c11, c12, c21, c22;
    return m;
  }
  Matrix2 m_;
};

/// Haar-distributed 2x2 unitary: QR of a complex Gaussian matrix with the
/// phases of diag(R) moved into Q. Entries are drawn row-major, real part
/// first.
inline CoinOp haar_random_coin(GaussianStream& stream) {
  Matrix2 g;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double re = stream.next();
      const double im = stream.next();
      g(i, j) = cplx(re, im);
    }
  }
  Eigen::HouseholderQR<Matrix2> qr(g);
  Matrix2 q = qr.householderQ();
  const Matrix2 r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < 2; ++k) {
    const cplx d = r(k, k);
    q.col(k) *= (std::abs(d) > 0.0) ? d / std::abs(d) : cplx(1.0);
  }
  q.col(0).normalize();
  q.col(1) -= q.col(0).dot(q.col(1)) * q.col(0);
  q.col(1).normalize();
  return CoinOp(q);
}

enum class CoinKind { identity, hadamard, custom, haar_random };

inline const char* to_string(CoinKind k) {
  switch (k) {
    case CoinKind::identity: return "identity";
    case CoinKind::hadamard: return "hadamard";
    case CoinKind::custom: return "custom";
    case CoinKind::haar_random: return "random";
  }
  return "?";
}

/// How the per-step coins of a walk are chosen.
struct NamedCoin {
  CoinKind kind = CoinKind::hadamard;
  CoinOp custom{};
  std::uint64_t seed = 0;

  /// Coins for `steps` steps. Random coins are successive draws of one
  /// stream seeded with `seed`, so each step gets a fresh coin.
  std::vector<CoinOp> sequence(std::size_t steps) const {
    switch (kind) {
      case CoinKind::identity: return std::vector<CoinOp>(steps, CoinOp::identity());
      case CoinKind::hadamard: return std::vector<CoinOp>(steps, CoinOp::hadamard());
      case CoinKind::custom: return std::vector<CoinOp>(steps, custom);
      case CoinKind::haar_random: {
        GaussianStream stream(seed);
        std::vector<CoinOp> out;
        out.reserve(steps);
        for (std::size_t i = 0; i < steps; ++i) out.push_back(haar_random_coin(stream));
        return out;
      }
    }
    return {};
  }
};

struct WalkSpec {
  std::vector<CoinOp> coins;  ///< one per step
  /// When set, the walker factor is resized to this many sites before walking.
  std::optional<std::size_t> lattice_size;

  std::size_t steps() const noexcept { return coins.size(); }

  static WalkSpec uniform(const CoinOp& c, std::size_t steps) {
    return WalkSpec{std::vector<CoinOp>(steps, c), std::nullopt};
  }
  static WalkSpec from(const NamedCoin& coin, std::size_t steps) {
    return WalkSpec{coin.sequence(steps), std::nullopt};
  }
};

/// Sites needed so that `steps` shifts from `max_position` stay on the lattice.
constexpr std::size_t required_lattice(std::size_t max_position, std::size_t steps) {
  return max_position + steps + 1;
}

/// Largest 0-based position of `walker` carrying a nonzero amplitude.
inline std::optional<std::size_t> max_occupied(const SubsystemLayout& layout, const Vector& amplitudes,
                                               const std::string& walker) {
  const std::size_t k = layout.index_of(walker);
  const std::size_t stride = layout.stride(k);
  const std::size_t d = layout[k].dim;
  std::optional<std::size_t> best;
  for (Eigen::Index f = 0; f < amplitudes.size(); ++f) {
    if (amplitudes(f) == cplx(0.0)) continue;
    const std::size_t w = (static_cast<std::size_t>(f) / stride) % d;
    if (!best || w > *best) best = w;
  }
  return best;
}

inline std::optional<std::size_t> max_occupied(const PureState& s, const std::string& walker) {
  return max_occupied(s.layout(), s.amplitudes(), walker);
}

/// Embeds (or shrinks) the walker factor into `sites` positions. Shrinking
/// that would drop a nonzero amplitude throws LatticeOverflow.
inline PureState resize_walker(const PureState& s, const std::string& walker, std::size_t sites) {
  const auto& layout = s.layout();
  const std::size_t k = layout.index_of(walker);
  const std::size_t old_dim = layout[k].dim;
  if (sites == old_dim) return s;
  if (sites == 0) throw std::invalid_argument("lattice must have at least one site");
  if (sites < old_dim) {
    const auto top = max_occupied(s, walker);
    if (top && *top >= sites) throw LatticeOverflow("resize would cut off occupied walker sites");
  }
  auto factors = layout.factors();
  factors[k].dim = sites;
  SubsystemLayout target(std::move(factors));
  const std::size_t inner = layout.stride(k);
  const std::size_t outer = layout.total_dim() / (inner * old_dim);
  const std::size_t keep = std::min(old_dim, sites);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(target.total_dim()));
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t w = 0; w < keep; ++w) {
      out.segment(static_cast<Eigen::Index>((o * sites + w) * inner), static_cast<Eigen::Index>(inner)) =
          s.amplitudes().segment(static_cast<Eigen::Index>((o * old_dim + w) * inner), static_cast<Eigen::Index>(inner));
    }
  }
  return PureState(std::move(target), std::move(out));
}

namespace detail {

inline Vector shift_amplitudes(const SubsystemLayout& layout, const Vector& in, const WalkPair& pair,
                               std::size_t power) {
  const std::size_t kc = layout.index_of(pair.coin);
  const std::size_t kw = layout.index_of(pair.walker);
  if (layout[kc].dim != 2) throw std::invalid_argument("coin factor must have dimension 2");
  const std::size_t cstride = layout.stride(kc);
  const std::size_t wstride = layout.stride(kw);
  const std::size_t wdim = layout[kw].dim;
  Vector out = Vector::Zero(in.size());
  for (Eigen::Index f = 0; f < in.size(); ++f) {
    const cplx a = in(f);
    if (a == cplx(0.0)) continue;
    const auto uf = static_cast<std::size_t>(f);
    if ((uf / cstride) % 2 == 0) {
      out(f) = a;
      continue;
    }
    const std::size_t w = (uf / wstride) % wdim;
    if (w + power >= wdim) {
      throw LatticeOverflow("walker at site " + std::to_string(w + 1) + " would shift past the lattice edge (" +
                            std::to_string(wdim) + " sites)");
    }
    out(static_cast<Eigen::Index>(uf + power * wstride)) = a;
  }
  return out;
}

}  // namespace detail

/// Controlled shift to the power `power`: |up,k> -> |up,k>, |down,k> -> |down,k+power>.
inline PureState shift(const PureState& s, const WalkPair& pair, std::size_t power = 1) {
  return PureState(s.layout(), detail::shift_amplitudes(s.layout(), s.amplitudes(), pair, power));
}

inline PureState apply_coin(const PureState& s, const std::string& coin, const CoinOp& c) {
  if (s.layout().dim(coin) != 2) throw std::invalid_argument("coin factor must have dimension 2");
  return PureState(s.layout(), apply_local(s.layout(), s.amplitudes(), coin, c.matrix()));
}

/// One step of W_C = S (C x I).
inline PureState walk_step(const PureState& s, const WalkPair& pair, const CoinOp& c) {
  const bool trivial_coin = c.matrix() == Matrix2::Identity();
  Vector a = trivial_coin ? s.amplitudes() : apply_local(s.layout(), s.amplitudes(), pair.coin, c.matrix());
  return PureState(s.layout(), detail::shift_amplitudes(s.layout(), a, pair, 1));
}

/// Applies the per-step coins of `spec` in order.
inline PureState evolve(const PureState& s, const WalkPair& pair, const WalkSpec& spec) {
  PureState cur = spec.lattice_size ? resize_walker(s, pair.walker, *spec.lattice_size) : s;
  const auto top = max_occupied(cur, pair.walker);
  const std::size_t sites = cur.layout().dim(pair.walker);
  if (top && required_lattice(*top, spec.steps()) > sites) {
    throw LatticeOverflow("lattice of " + std::to_string(sites) + " sites is too small for " +
                          std::to_string(spec.steps()) + " steps from site " + std::to_string(*top + 1));
  }
  for (const auto& c : spec.coins) cur = walk_step(cur, pair, c);
  return cur;
}

}  // namespace qwe
