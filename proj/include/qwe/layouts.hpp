#pragma once

// The canonical four-partite ordering (C1, W1, C2, W2) and the initial
// coin-entangled state the protocols start from.

#include <cmath>

#include "qwe/qwalk.hpp"

namespace qwe {

namespace labels {
inline const std::string C1 = "C1";
inline const std::string W1 = "W1";
inline const std::string C2 = "C2";
inline const std::string W2 = "W2";
}  // namespace labels

inline const WalkPair kPair1{labels::C1, labels::W1};
inline const WalkPair kPair2{labels::C2, labels::W2};

inline SubsystemLayout four_partite_layout(std::size_t sites) {
  return SubsystemLayout({{labels::C1, 2}, {labels::W1, sites}, {labels::C2, 2}, {labels::W2, sites}});
}

inline SubsystemLayout walker_pair_layout(std::size_t sites) {
  return SubsystemLayout({{labels::W1, sites}, {labels::W2, sites}});
}

inline SubsystemLayout coin_walker_layout(std::size_t sites) {
  return SubsystemLayout({{labels::C1, 2}, {labels::W1, sites}});
}

/// Party 1 = (C1, W1) against party 2 = (C2, W2).
inline Bipartition party_split() { return Bipartition{{labels::C1, labels::W1}, {labels::C2, labels::W2}}; }

/// sqrt(p1)|up,1>|up,1> + sqrt(1-p1)|down,1>|down,1> on `sites` walker sites.
inline PureState coin_entangled_state(std::size_t sites, double p1 = 0.5) {
  if (p1 < 0.0 || p1 > 1.0) throw std::invalid_argument("p1 must lie in [0, 1]");
  const auto layout = four_partite_layout(sites);
  Vector a = Vector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
  const std::size_t s1 = layout.stride(0);
  const std::size_t s3 = layout.stride(2);
  a(0) = std::sqrt(p1);
  a(static_cast<Eigen::Index>(s1 + s3)) = std::sqrt(1.0 - p1);
  return PureState(layout, std::move(a));
}

/// Evolves both pairs with the same walk.
inline PureState evolve_both(const PureState& s, const WalkSpec& spec) {
  return evolve(evolve(s, kPair1, spec), kPair2, spec);
}

/// Coin-walker outputs of `spec` from |up,1> and |down,1>.
inline std::pair<PureState, PureState> branch_outputs(const WalkSpec& spec) {
  const auto layout = coin_walker_layout(required_lattice(0, spec.steps()));
  const WalkPair pair{labels::C1, labels::W1};
  return {evolve(PureState::basis(layout, {0, 0}), pair, spec), evolve(PureState::basis(layout, {1, 0}), pair, spec)};
}

/// (|up> + e^{i phi}|down>)/sqrt2 style coin vectors.
inline Vector2 plus_state() { return Vector2(1.0, 1.0) / std::sqrt(2.0); }
inline Vector2 minus_state() { return Vector2(1.0, -1.0) / std::sqrt(2.0); }

}  // namespace qwe
