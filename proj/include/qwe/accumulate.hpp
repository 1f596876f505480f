#pragma once

// Iterated transfer-and-reload of entanglement into the walkers, and its
// retrieval back into the coins.

#include <functional>
#include <limits>

#include "qwe/transfer.hpp"

namespace qwe {

// ---------------------------------------------------------------------------
// Reload and span

/// Builds coin (x) walker amplitudes in (C1, W1, C2, W2) order from a 2x2
/// coin amplitude table and a W1 x W2 walker matrix.
inline PureState coins_with_walkers(const Matrix2& coin, const Matrix& walkers) {
  const auto l1 = static_cast<std::size_t>(walkers.rows());
  const auto l2 = static_cast<std::size_t>(walkers.cols());
  const auto layout = SubsystemLayout({{labels::C1, 2}, {labels::W1, l1}, {labels::C2, 2}, {labels::W2, l2}});
  Vector a(static_cast<Eigen::Index>(layout.total_dim()));
  const auto L1 = walkers.rows();
  const auto L2 = walkers.cols();
  for (Eigen::Index c1 = 0; c1 < 2; ++c1) {
    for (Eigen::Index w1 = 0; w1 < L1; ++w1) {
      for (Eigen::Index c2 = 0; c2 < 2; ++c2) {
        a.segment(((c1 * L1 + w1) * 2 + c2) * L2, L2) = coin(c1, c2) * walkers.row(w1).transpose();
      }
    }
  }
  return PureState::normalized(layout, std::move(a));
}

/// sqrt(p1)|up,up> + sqrt(1-p1)|down,down>.
inline Matrix2 bell_coins(double p1 = 0.5) {
  Matrix2 c = Matrix2::Zero();
  c(0, 0) = std::sqrt(p1);
  c(1, 1) = std::sqrt(1.0 - p1);
  return c;
}

/// Replaces the coins of a four-partite state by a fresh Bell pair. The coins
/// must be in a product state with the walkers.
inline PureState reload_coins(const PureState& s, double p1 = 0.5) {
  const PureState ordered = permute(s, {labels::C1, labels::W1, labels::C2, labels::W2});
  const Matrix m = ordered.as_matrix({labels::C1, labels::C2});
  const double purity = partial_trace(ordered, {labels::C1, labels::C2}).purity();
  if (purity < 1.0 - tol::zero) throw std::invalid_argument("reload_coins: coins are entangled with the walkers");
  Eigen::Index best = 0;
  m.rowwise().squaredNorm().maxCoeff(&best);
  const Vector w = m.row(best).transpose();
  const auto l1 = static_cast<Eigen::Index>(ordered.layout().dim(labels::W1));
  const auto l2 = static_cast<Eigen::Index>(ordered.layout().dim(labels::W2));
  Matrix y(l1, l2);
  for (Eigen::Index i = 0; i < l1; ++i) y.row(i) = w.segment(i * l2, l2).transpose();
  return coins_with_walkers(bell_coins(p1), y);
}

/// max - min over the occupied positions (|a|^2 > 1e-12) of all walker
/// factors together. Walker factors are those whose label starts with 'W'
/// unless `walkers` is given.
inline std::size_t walk_span(const PureState& s, LabelSet walkers = {}) {
  const auto& layout = s.layout();
  if (walkers.empty()) {
    for (const auto& f : layout.factors()) {
      if (!f.label.empty() && f.label[0] == 'W') walkers.push_back(f.label);
    }
    if (walkers.empty()) walkers = layout.labels();
  }
  std::size_t lo = std::numeric_limits<std::size_t>::max();
  std::size_t hi = 0;
  for (const auto& w : walkers) {
    const std::size_t k = layout.index_of(w);
    const std::size_t stride = layout.stride(k);
    const std::size_t d = layout[k].dim;
    for (std::size_t f = 0; f < s.dim(); ++f) {
      if (std::norm(s.amplitudes()(static_cast<Eigen::Index>(f))) <= tol::degenerate) continue;
      const std::size_t pos = (f / stride) % d;
      lo = std::min(lo, pos);
      hi = std::max(hi, pos);
    }
  }
  return lo > hi ? 0 : hi - lo;
}

// ---------------------------------------------------------------------------
// Identity-coin protocol

struct TraceRecord {
  std::size_t iteration = 0;
  std::size_t steps = 0;
  double logneg = 0.0;
  double probability = 0.0;
};

using AccumulationTrace = std::vector<TraceRecord>;

struct BranchOutcome {
  std::string label;          ///< one "+-" pair per iteration, e.g. "++-+"
  double probability = 0.0;   ///< product of the per-iteration probabilities
  double logneg = 0.0;
  RealVector schmidt;         ///< walker-walker Schmidt coefficients
  std::vector<int> sign_pattern;
  std::optional<PureState> walkers;  ///< (W1, W2) state, when requested
};

struct IdentityOptions {
  double p1 = 0.5;
  bool keep_states = false;
  std::size_t threads = 0;
};

struct IdentityResult {
  AccumulationTrace trace;
  std::vector<BranchOutcome> branches;  ///< lexicographic by label
};

inline const std::array<std::pair<char, Vector2>, 2>& pm_basis() {
  static const std::array<std::pair<char, Vector2>, 2> b{{{'+', plus_state()}, {'-', minus_state()}}};
  return b;
}

/// Signs of the diagonal amplitudes relative to |1,1>, for a walker matrix
/// of the form sum_k c_k |k,k>. Returns empty when the form does not hold.
inline std::vector<int> sign_pattern(const Matrix& y, double tol = 1e-12) {
  const Eigen::Index n = std::min(y.rows(), y.cols());
  if (n == 0 || std::abs(y(0, 0)) < tol) return {};
  const cplx ref = y(0, 0) / std::abs(y(0, 0));
  const double mag = std::abs(y(0, 0));
  std::vector<int> out;
  for (Eigen::Index k = 0; k < n; ++k) {
    const cplx z = y(k, k) / ref;
    if (std::abs(std::abs(z) - mag) > tol || std::abs(z.imag()) > tol) return {};
    out.push_back(z.real() > 0.0 ? 1 : -1);
  }
  Matrix off = y;
  for (Eigen::Index k = 0; k < n; ++k) off(k, k) = 0.0;
  if (off.cwiseAbs().maxCoeff() > tol) return {};
  return out;
}

/// 2^{-n/2} sum_k sign_k |k,k> on (W1, W2).
inline PureState state_from_signs(const std::vector<int>& signs) {
  const std::size_t n = signs.size();
  if (n == 0) throw std::invalid_argument("empty sign pattern");
  Vector a = Vector::Zero(static_cast<Eigen::Index>(n * n));
  for (std::size_t k = 0; k < n; ++k) a(static_cast<Eigen::Index>(k * n + k)) = static_cast<double>(signs[k]);
  return PureState::normalized(walker_pair_layout(n), std::move(a));
}

inline PureState walker_state(const Matrix& y) {
  Vector a(y.size());
  for (Eigen::Index i = 0; i < y.rows(); ++i) a.segment(i * y.cols(), y.cols()) = y.row(i).transpose();
  return PureState::normalized(SubsystemLayout({{labels::W1, static_cast<std::size_t>(y.rows())},
                                                {labels::W2, static_cast<std::size_t>(y.cols())}}),
                               std::move(a));
}

namespace detail {

/// Resizes both walkers to fit `steps` more shifts.
inline PureState fit_lattice(const PureState& s, std::size_t steps) {
  std::size_t top = 0;
  for (const auto& w : {labels::W1, labels::W2}) {
    if (const auto m = max_occupied(s, w)) top = std::max(top, *m);
  }
  const std::size_t sites = required_lattice(top, steps);
  PureState out = s;
  for (const auto& w : {labels::W1, labels::W2}) {
    if (out.layout().dim(w) < sites) out = resize_walker(out, w, sites);
  }
  return out;
}

/// Both pairs through S^steps with identity coins.
inline PureState identity_walk(const PureState& s, std::size_t steps) {
  const PureState fitted = fit_lattice(s, steps);
  return shift(shift(fitted, kPair1, steps), kPair2, steps);
}

struct Child {
  std::string label;
  double probability;
  Matrix walkers;  ///< normalized
};

inline std::vector<Child> measure_pm(const PureState& s) {
  const CoinBlocks blocks(s);
  std::vector<Child> out;
  for (const auto& [c1, g] : pm_basis()) {
    for (const auto& [c2, d] : pm_basis()) {
      Matrix y = blocks.project(g, d);
      const double p = y.squaredNorm();
      if (p < tol::degenerate) throw DegenerateOutcome("zero-probability coin outcome");
      out.push_back(Child{std::string{c1, c2}, p, y / std::sqrt(p)});
    }
  }
  return out;
}

}  // namespace detail

/// Bell coins (weights p1, 1-p1) on |1,1>.
inline PureState accumulation_input(double p1 = 0.5) { return coin_entangled_state(1, p1); }

/// Exhaustive identity-coin protocol: each iteration walks both pairs through
/// S^{span+1}, measures both coins in |+->, and reloads the coins. Branches are
/// expanded depth-first, so only one path of states is live at a time.
inline IdentityResult accumulate_identity(std::size_t iterations, const IdentityOptions& opt = {}) {
  if (iterations == 0) throw std::invalid_argument("iterations must be positive");
  IdentityResult res;
  res.trace.resize(iterations);
  std::vector<std::vector<std::pair<double, double>>> level(iterations);  // (N, probability)
  std::vector<std::size_t> steps_at(iterations, 0);

  std::function<void(const PureState&, std::size_t, const std::string&, double)> visit =
      [&](const PureState& s, std::size_t depth, const std::string& label, double prob) {
        const std::size_t steps = walk_span(s) + 1;
        if (steps_at[depth] != 0 && steps_at[depth] != steps) {
          throw std::logic_error("branches disagree on the step count");
        }
        steps_at[depth] = steps;
        const PureState walked = detail::identity_walk(s, steps);
        for (auto& child : detail::measure_pm(walked)) {
          const double p = prob * child.probability;
          const RealVector sc = schmidt_coefficients(child.walkers);
          const double n = log_negativity_from_schmidt(sc);
          level[depth].push_back({n, p});
          const std::string next = label + child.label;
          if (depth + 1 == iterations) {
            BranchOutcome b;
            b.label = next;
            b.probability = p;
            b.logneg = n;
            b.schmidt = sc;
            b.sign_pattern = sign_pattern(child.walkers);
            if (opt.keep_states) b.walkers = walker_state(child.walkers);
            res.branches.push_back(std::move(b));
          } else {
            visit(coins_with_walkers(bell_coins(opt.p1), child.walkers), depth + 1, next, p);
          }
        }
      };
  visit(accumulation_input(opt.p1), 0, "", 1.0);

  for (std::size_t k = 0; k < iterations; ++k) {
    double best = 0.0;
    for (const auto& [n, p] : level[k]) best = std::max(best, n);
    double p = 0.0;
    for (const auto& [n, q] : level[k]) {
      if (n >= best - tol::zero) p += q;
    }
    res.trace[k] = TraceRecord{k + 1, steps_at[k], best, p};
  }
  std::sort(res.branches.begin(), res.branches.end(),
            [](const BranchOutcome& a, const BranchOutcome& b) { return a.label < b.label; });
  return res;
}

/// One sampled path of the identity protocol; outcomes drawn from a
/// seeded stream. Usable past the exhaustive range.
inline IdentityResult accumulate_identity_trajectory(std::size_t iterations, std::uint64_t seed,
                                                     const IdentityOptions& opt = {}) {
  if (iterations == 0) throw std::invalid_argument("iterations must be positive");
  GaussianStream stream(seed);
  IdentityResult res;
  PureState s = accumulation_input(opt.p1);
  std::string label;
  double prob = 1.0;
  Matrix y;
  RealVector sc;
  for (std::size_t k = 0; k < iterations; ++k) {
    const std::size_t steps = walk_span(s) + 1;
    auto children = detail::measure_pm(detail::identity_walk(s, steps));
    const double u = stream.uniform();
    double acc = 0.0;
    std::size_t pick = children.size() - 1;
    for (std::size_t c = 0; c < children.size(); ++c) {
      acc += children[c].probability;
      if (u < acc) {
        pick = c;
        break;
      }
    }
    auto& child = children[pick];
    label += child.label;
    prob *= child.probability;
    y = std::move(child.walkers);
    sc = schmidt_coefficients(y);
    res.trace.push_back(TraceRecord{k + 1, steps, log_negativity_from_schmidt(sc), prob});
    if (k + 1 < iterations) s = coins_with_walkers(bell_coins(opt.p1), y);
  }
  BranchOutcome b;
  b.label = label;
  b.probability = prob;
  b.logneg = res.trace.back().logneg;
  b.schmidt = sc;
  b.sign_pattern = sign_pattern(y);
  if (opt.keep_states) b.walkers = walker_state(y);
  res.branches.push_back(std::move(b));
  return res;
}

// ---------------------------------------------------------------------------
// Generic coins

enum class ProjectionStrategy {
  fixed_pm,   ///< both coins in |+->
  best_grid   ///< both coins in the best {gamma, gamma_perp} from a grid
};

struct GenericOptions {
  NamedCoin coin;
  ProjectionStrategy strategy = ProjectionStrategy::fixed_pm;
  Grid grid{37, 73};
  double p1 = 0.5;
  /// Explicit steps per iteration; the span rule is used when empty.
  std::vector<std::size_t> steps;
  std::size_t threads = 0;
};

struct GenericIteration {
  TraceRecord record;
  std::string chosen;
  ProjectionAngles basis;
  std::array<BranchResult, 4> outcomes;  ///< ++, +-, -+, --
};

struct GenericResult {
  AccumulationTrace trace;
  std::vector<GenericIteration> iterations;
  PureState final_walkers;
};

namespace detail {

inline std::array<BranchResult, 4> outcomes_in_basis(const CoinBlocks& blocks, const Vector2& g) {
  const Vector2 gp = orthogonal(g);
  return {evaluate_branch(blocks, g, g), evaluate_branch(blocks, g, gp), evaluate_branch(blocks, gp, g),
          evaluate_branch(blocks, gp, gp)};
}

/// (largest branch N, total probability of the branches reaching it).
inline std::pair<double, double> basis_score(const std::array<BranchResult, 4>& o) {
  double best = -1.0;
  for (const auto& b : o) {
    if (!b.degenerate) best = std::max(best, b.logneg);
  }
  double p = 0.0;
  for (const auto& b : o) {
    if (!b.degenerate && b.logneg >= best - tol::zero) p += b.probability;
  }
  return {best, p};
}

inline bool better_score(const std::pair<double, double>& a, const std::pair<double, double>& b) {
  if (a.first > b.first + tol::zero) return true;
  return std::abs(a.first - b.first) <= tol::zero && a.second > b.second + tol::zero;
}

inline ProjectionAngles best_tied_basis(const CoinBlocks& blocks, const Grid& grid, std::size_t threads) {
  std::vector<std::pair<double, double>> score(grid.size());
  parallel_for(
      grid.size(),
      [&](std::size_t idx) {
        score[idx] = basis_score(outcomes_in_basis(blocks, coin_state(grid.theta(idx / grid.n_phi), grid.phi(idx % grid.n_phi))));
      },
      threads);
  std::size_t best = 0;
  for (std::size_t i = 1; i < score.size(); ++i) {
    if (better_score(score[i], score[best])) best = i;
  }
  const ProjectionAngles start{grid.theta(best / grid.n_phi), grid.phi(best % grid.n_phi)};
  auto f = [&](double t, double p) { return basis_score(outcomes_in_basis(blocks, coin_state(t, p))).first; };
  const auto [pt, value] = coordinate_ascent(f, start.theta, start.phi, grid.d_theta(), grid.d_phi());
  if (value > score[best].first + tol::zero) return normalize_angles(pt.first, pt.second);
  return start;
}

}  // namespace detail

/// Accumulation with arbitrary coins. Each iteration keeps the outcome with
/// the largest walker-walker N (ties: larger probability, then label order)
/// and continues from it; the recorded probability is the total probability
/// of outcomes reaching that N, times the previous record.
inline GenericResult accumulate_generic(std::size_t iterations, const GenericOptions& opt) {
  if (iterations == 0) throw std::invalid_argument("iterations must be positive");
  if (!opt.steps.empty() && opt.steps.size() < iterations) {
    throw std::invalid_argument("explicit step list is shorter than the iteration count");
  }
  GenericResult res;
  std::optional<GaussianStream> stream;
  if (opt.coin.kind == CoinKind::haar_random) stream.emplace(opt.coin.seed);
  PureState s = accumulation_input(opt.p1);
  double prob = 1.0;
  Matrix y;
  static const std::array<const char*, 4> names{"++", "+-", "-+", "--"};
  for (std::size_t k = 0; k < iterations; ++k) {
    const std::size_t steps = opt.steps.empty() ? walk_span(s) + 1 : opt.steps[k];
    WalkSpec spec;
    if (stream) {
      for (std::size_t i = 0; i < steps; ++i) spec.coins.push_back(haar_random_coin(*stream));
    } else {
      spec = WalkSpec::from(opt.coin, steps);
    }
    const PureState walked = evolve_both(detail::fit_lattice(s, steps), spec);
    const CoinBlocks blocks(walked);
    ProjectionAngles basis{std::numbers::pi / 4.0, 0.0};
    if (opt.strategy == ProjectionStrategy::best_grid) basis = detail::best_tied_basis(blocks, opt.grid, opt.threads);
    const Vector2 g = coin_state(basis);
    const auto outcomes = detail::outcomes_in_basis(blocks, g);

    std::size_t pick = 4;
    for (std::size_t i = 0; i < 4; ++i) {
      if (outcomes[i].degenerate) continue;
      if (pick == 4 || outcomes[i].logneg > outcomes[pick].logneg + tol::zero ||
          (std::abs(outcomes[i].logneg - outcomes[pick].logneg) <= tol::zero &&
           outcomes[i].probability > outcomes[pick].probability + tol::zero)) {
        pick = i;
      }
    }
    if (pick == 4) throw DegenerateOutcome("every coin outcome has zero probability");
    double p_best = 0.0;
    for (const auto& o : outcomes) {
      if (!o.degenerate && o.logneg >= outcomes[pick].logneg - tol::zero) p_best += o.probability;
    }
    prob *= p_best;

    const Vector2 gp = orthogonal(g);
    const Vector2& c1 = pick < 2 ? g : gp;
    const Vector2& c2 = pick % 2 == 0 ? g : gp;
    y = blocks.project(c1, c2);
    y /= std::sqrt(y.squaredNorm());

    GenericIteration it;
    it.record = TraceRecord{k + 1, steps, outcomes[pick].logneg, prob};
    it.chosen = names[pick];
    it.basis = basis;
    it.outcomes = outcomes;
    res.trace.push_back(it.record);
    res.iterations.push_back(std::move(it));
    s = coins_with_walkers(bell_coins(opt.p1), y);
  }
  res.final_walkers = walker_state(y);
  return res;
}

// ---------------------------------------------------------------------------
// Retrieval

/// Columns are the retrieval basis over walker positions 1..4: (J - 2I)/2.
inline Matrix retrieval_basis() {
  Matrix r = Matrix::Constant(4, 4, 0.5);
  for (Eigen::Index k = 0; k < 4; ++k) r(k, k) = -0.5;
  return r;
}

struct RetrievalOutcome {
  std::string label;  ///< retrieval basis column(s), 1-based
  double probability = 0.0;
  double logneg = 0.0;  ///< across (retrieving coin | rest), or coin|coin
  PureState state;
};

/// Moves the walker entanglement of `pair` back into its coin: Hadamard on
/// the coin, two identity-coin steps, then the walker is measured in the
/// retrieval basis. The coin must be |up> and the walker confined to
/// positions 1..2. The log-negativity is across {coin} vs the remaining
/// factors.
inline std::vector<RetrievalOutcome> retrieve(const PureState& s, const WalkPair& pair) {
  const auto& layout = s.layout();
  if (layout.dim(pair.coin) != 2) throw std::invalid_argument("retrieve: coin factor must have dimension 2");
  if (project_factor(s, pair.coin, Vector2(0.0, 1.0)).probability > tol::zero) {
    throw std::invalid_argument("retrieve: the retrieving coin must be |up>");
  }
  for (std::size_t f = 0; f < s.dim(); ++f) {
    const std::size_t w = (f / layout.stride(layout.index_of(pair.walker))) % layout.dim(pair.walker);
    if (w >= 2 && std::norm(s.amplitudes()(static_cast<Eigen::Index>(f))) > tol::zero) {
      throw std::invalid_argument("retrieve: walker must be confined to positions 1 and 2");
    }
  }
  PureState cur = s;
  if (layout.dim(pair.walker) < 2) cur = resize_walker(cur, pair.walker, 2);
  cur = apply_coin(cur, pair.coin, CoinOp::hadamard());
  WalkSpec spec = WalkSpec::uniform(CoinOp::identity(), 2);
  spec.lattice_size = std::max<std::size_t>(4, cur.layout().dim(pair.walker));
  cur = evolve(cur, pair, spec);

  const Matrix r = retrieval_basis();
  const std::size_t sites = cur.layout().dim(pair.walker);
  std::vector<RetrievalOutcome> out;
  for (Eigen::Index k = 0; k < 4; ++k) {
    Vector h = Vector::Zero(static_cast<Eigen::Index>(sites));
    h.head(4) = r.col(k);
    const Projection p = project_factor(cur, pair.walker, h);
    RetrievalOutcome o;
    o.label = std::to_string(k + 1);
    o.probability = p.probability;
    if (p.probability >= tol::degenerate) {
      o.state = p.state();
      o.logneg = log_negativity(o.state, make_bipartition(o.state.layout(), {pair.coin}));
    }
    out.push_back(std::move(o));
  }
  return out;
}

/// Retrieval on pair 1, then on pair 2 for each outcome: 16 outcomes on
/// (C1, C2) with the coin-coin log-negativity.
inline std::vector<RetrievalOutcome> retrieve_both(const PureState& s) {
  std::vector<RetrievalOutcome> out;
  for (const auto& first : retrieve(s, kPair1)) {
    if (first.probability < tol::degenerate) {
      for (int k = 1; k <= 4; ++k) out.push_back(RetrievalOutcome{first.label + std::to_string(k), 0.0, 0.0, {}});
      continue;
    }
    for (auto second : retrieve(first.state, kPair2)) {
      second.label = first.label + second.label;
      second.probability *= first.probability;
      if (second.probability >= tol::degenerate) {
        second.logneg = log_negativity(second.state, make_bipartition(second.state.layout(), {labels::C1}));
      }
      out.push_back(std::move(second));
    }
  }
  return out;
}

/// Coins |up,up> with the given (W1, W2) walker state.
inline PureState retrieval_input(const PureState& walkers) {
  const Matrix y = walkers.as_matrix({walkers.layout()[0].label});
  Matrix2 c = Matrix2::Zero();
  c(0, 0) = 1.0;
  return coins_with_walkers(c, y);
}

/// (|1,1> + |2,2>)/sqrt2 on two-site walkers.
inline PureState default_retrieval_walkers() { return state_from_signs({1, 1}); }

}  // namespace qwe
