#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "qwe/cli/config.hpp"
#include "qwe/photonic.hpp"

namespace qwe::cli {

using json = nlohmann::ordered_json;

/// %.12g, with negative zero printed as 0.
inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x + 0.0);
  return buf;
}

inline json to_json(cplx z) { return json::array({z.real() + 0.0, z.imag() + 0.0}); }

inline json to_json(const Matrix2& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < 2; ++i) rows.push_back(json::array({to_json(m(i, 0)), to_json(m(i, 1))}));
  return rows;
}

inline json to_json(const Vector2& v) { return json::array({to_json(v(0)), to_json(v(1))}); }

/// Nonzero amplitudes as [index..., re, im] with 1-based walker positions.
inline json sparse_amplitudes(const PureState& s) {
  json out = json::array();
  const auto& layout = s.layout();
  for (std::size_t f = 0; f < s.dim(); ++f) {
    const cplx a = s.amplitudes()(static_cast<Eigen::Index>(f));
    if (std::norm(a) <= tol::degenerate) continue;
    json entry = json::array();
    for (std::size_t k = 0; k < layout.size(); ++k) {
      const std::size_t digit = (f / layout.stride(k)) % layout[k].dim;
      entry.push_back(layout[k].label[0] == 'W' ? digit + 1 : digit);
    }
    entry.push_back(a.real() + 0.0);
    entry.push_back(a.imag() + 0.0);
    out.push_back(entry);
  }
  return out;
}

/// Writes to `path`, or to `fallback` when the path is empty.
inline void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot open '" + path + "' for writing");
  f << text;
  f.flush();
  if (!f) throw ConfigError("failed writing '" + path + "'");
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json coin_json(const RunConfig& cfg) {
  json j;
  j["kind"] = to_string(cfg.coin);
  if (cfg.coin == CoinKind::haar_random) j["seed"] = *cfg.seed;
  return j;
}

// ---------------------------------------------------------------------------

inline json cmd_transfer(const RunConfig& cfg) {
  const std::size_t steps = cfg.steps_or(1);
  WalkSpec spec = WalkSpec::from(cfg.named_coin(), steps);
  spec.lattice_size = cfg.lattice;
  const auto [up, down] = branch_outputs(spec);
  const PureState s = evolve_both(coin_entangled_state(required_lattice(0, steps), cfg.p1), spec);
  const MMatrix m = compute_M(down, up, labels::C1);
  const GammaSolution sol = find_gamma(m);

  json j;
  j["command"] = "transfer";
  j["steps"] = steps;
  j["coin"] = coin_json(cfg);
  j["p1"] = cfg.p1;
  j["M"] = to_json(m);
  j["gamma_kind"] = to_string(sol.kind);
  json cands = json::array();
  for (const auto& g : sol.gammas) {
    json c;
    const auto a = angles_of(g);
    c["theta"] = a.theta;
    c["phi"] = a.phi;
    c["gamma"] = to_json(g);
    c["residual"] = gamma_residual(m, g);
    try {
      const TransferReport r = check_tc(s, g, labels::C1, {labels::C2, labels::W2});
      c["degenerate"] = false;
      c["overlap"] = r.overlap;
      c["p_up"] = r.p_up;
      c["p_down"] = r.p_down;
      c["entropy"] = r.entropy;
      c["p_proj"] = r.p_proj;
      c["tc_satisfied"] = r.tc_satisfied;
      c["schmidt_agrees"] = r.schmidt_agrees;
      c["pre_logneg"] = r.pre_logneg;
      c["post_logneg"] = r.post_logneg;
    } catch (const DegenerateOutcome&) {
      c["degenerate"] = true;
    }
    cands.push_back(c);
  }
  j["candidates"] = cands;

  const CoinBlocks blocks(s);
  json branches = json::array();
  double total = 0.0;
  for (const auto& [c1, g] : pm_basis()) {
    for (const auto& [c2, d] : pm_basis()) {
      const BranchResult b = evaluate_branch(blocks, g, d);
      json e;
      e["outcome"] = std::string{c1, c2};
      e["probability"] = b.probability;
      e["degenerate"] = b.degenerate;
      e["walker_logneg"] = b.logneg;
      if (!b.degenerate) e["walkers"] = sparse_amplitudes(walker_state(blocks.project(g, d)));
      total += b.probability;
      branches.push_back(e);
    }
  }
  j["pm_branches"] = branches;
  j["total_probability"] = total;
  return j;
}

struct ScanOutput {
  std::string csv;
  json summary;
};

inline ScanOutput cmd_scan(const RunConfig& cfg) {
  const std::size_t steps = cfg.steps_or(4);
  WalkSpec spec = WalkSpec::from(cfg.named_coin(), steps);
  spec.lattice_size = cfg.lattice;
  const auto [up, down] = branch_outputs(spec);
  const PureState s = evolve_both(coin_entangled_state(required_lattice(0, steps), cfg.p1), spec);
  const Grid grid(cfg.n_theta, cfg.n_phi);
  const BranchPair bp(up, down, labels::C1);
  const auto single = scan_projections(bp, grid, cfg.p1, cfg.threads);
  DoubleScanOptions opt;
  opt.threads = cfg.threads;
  const auto dbl = double_projection_scan(s, grid, opt);

  std::string csv = "theta,phi,overlap,p_up,p_down,entropy,post_logneg,branch_prob\n";
  csv.reserve(grid.size() * 120);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& r = single[i];
    csv += fmt(r.theta) + ',' + fmt(r.phi) + ',' + fmt(r.point.overlap) + ',' + fmt(r.point.p_up) + ',' +
           fmt(r.point.p_down) + ',' + fmt(r.point.entropy) + ',' + fmt(dbl[i].logneg()) + ',' +
           fmt(dbl[i].branch_prob()) + '\n';
  }

  json j;
  j["command"] = "scan";
  j["steps"] = steps;
  j["coin"] = coin_json(cfg);
  j["grid"] = {grid.n_theta, grid.n_phi};
  json zeros = json::array();
  for (const auto& z : refine_overlap_zeros(bp, single, grid, cfg.p1)) {
    zeros.push_back({{"theta", z.angles.theta},
                     {"phi", z.angles.phi},
                     {"overlap", z.point.overlap},
                     {"p_up", z.point.p_up},
                     {"p_down", z.point.p_down},
                     {"entropy", z.point.entropy}});
  }
  j["overlap_zeros"] = zeros;
  double max_n = 0.0;
  for (const auto& r : dbl) max_n = std::max(max_n, r.logneg());
  j["max_logneg_grid"] = max_n;
  json peaks = json::array();
  for (const auto& p : refine_double_peaks(s, dbl, grid, opt)) {
    peaks.push_back({{"theta", p.angles.theta},
                     {"phi", p.angles.phi},
                     {"logneg", p.row.logneg()},
                     {"transfer_probability", p.transfer_probability}});
  }
  j["logneg_peaks"] = peaks;
  return {std::move(csv), std::move(j)};
}

struct AccumulateOutput {
  std::string csv;
  json report;
};

inline AccumulateOutput cmd_accumulate(const RunConfig& cfg) {
  std::string csv = "iteration,steps,logneg,probability\n";
  json j;
  j["command"] = "accumulate";
  j["coin"] = coin_json(cfg);
  j["iterations"] = cfg.iterations;
  j["p1"] = cfg.p1;
  AccumulationTrace trace;
  json branches = json::array();
  if (cfg.coin == CoinKind::identity && cfg.strategy == "pm") {
    IdentityOptions opt;
    opt.p1 = cfg.p1;
    opt.threads = cfg.threads;
    const bool exhaustive = cfg.iterations <= 6;
    const IdentityResult r = exhaustive ? accumulate_identity(cfg.iterations, opt)
                                        : accumulate_identity_trajectory(cfg.iterations, cfg.seed.value_or(0), opt);
    j["mode"] = exhaustive ? "exhaustive" : "trajectory";
    trace = r.trace;
    for (const auto& b : r.branches) {
      branches.push_back({{"label", b.label},
                          {"probability", b.probability},
                          {"logneg", b.logneg},
                          {"sign_pattern", b.sign_pattern}});
    }
  } else {
    GenericOptions opt;
    opt.coin = cfg.named_coin();
    opt.strategy = cfg.strategy == "grid" ? ProjectionStrategy::best_grid : ProjectionStrategy::fixed_pm;
    opt.p1 = cfg.p1;
    opt.threads = cfg.threads;
    const GenericResult r = accumulate_generic(cfg.iterations, opt);
    j["mode"] = cfg.strategy == "grid" ? "best_grid" : "fixed_pm";
    trace = r.trace;
    for (const auto& it : r.iterations) {
      json outcomes = json::array();
      static const std::array<const char*, 4> names{"++", "+-", "-+", "--"};
      for (std::size_t k = 0; k < 4; ++k) {
        outcomes.push_back({{"outcome", names[k]},
                            {"probability", it.outcomes[k].probability},
                            {"logneg", it.outcomes[k].logneg}});
      }
      branches.push_back({{"iteration", it.record.iteration},
                          {"theta", it.basis.theta},
                          {"phi", it.basis.phi},
                          {"chosen", it.chosen},
                          {"outcomes", outcomes}});
    }
  }
  json rows = json::array();
  for (const auto& t : trace) {
    csv += std::to_string(t.iteration) + ',' + std::to_string(t.steps) + ',' + fmt(t.logneg) + ',' + fmt(t.probability) + '\n';
    rows.push_back({{"iteration", t.iteration}, {"steps", t.steps}, {"logneg", t.logneg}, {"probability", t.probability}});
  }
  j["trace"] = rows;
  j["branches"] = branches;
  return {std::move(csv), std::move(j)};
}

inline json cmd_retrieve(const RunConfig& cfg) {
  std::vector<int> signs{1, 1};
  if (cfg.input == "minus") signs = {1, -1};
  if (cfg.input == "product") signs = {1};
  const PureState in = retrieval_input(state_from_signs(signs));
  json j;
  j["command"] = "retrieve";
  j["input"] = cfg.input;
  json one = json::array();
  double total = 0.0;
  for (const auto& o : retrieve(in, kPair1)) {
    one.push_back({{"outcome", o.label}, {"probability", o.probability}, {"logneg", o.logneg}});
    total += o.probability;
  }
  j["outcomes"] = one;
  j["total_probability"] = total;
  json both = json::array();
  for (const auto& o : retrieve_both(in)) {
    both.push_back({{"outcome", o.label}, {"probability", o.probability}, {"coin_logneg", o.logneg}});
  }
  j["both_outcomes"] = both;
  return j;
}

inline json cmd_photonic(const RunConfig&) {
  json j;
  j["command"] = "photonic-reload";
  json runs = json::array();
  for (int sign : {1, -1}) {
    double combined = 0.0;
    for (bool coins_minus : {false, true}) {
      const auto r = photonic::run_reload(sign, coins_minus);
      combined += r.probability;
      runs.push_back({{"walker_sign", sign > 0 ? "+" : "-"},
                      {"input_coins", coins_minus ? "--" : "++"},
                      {"coincidence_probability", r.probability},
                      {"fidelity_printed_target", r.fidelity_printed},
                      {"fidelity_coin_flipped_target", r.fidelity_coin_flipped},
                      {"coin_logneg", r.coin_logneg},
                      {"walker_logneg", r.walker_logneg}});
    }
    j[sign > 0 ? "combined_probability_plus" : "combined_probability_minus"] = combined;
  }
  j["runs"] = runs;
  return j;
}

/// Runs `cfg.command` and writes its artifacts; `out` receives anything
/// without a path.
inline void run(const RunConfig& cfg, std::ostream& out) {
  validate(cfg);
  if (cfg.command == "transfer") {
    emit(cfg.out, dump(cmd_transfer(cfg)), out);
  } else if (cfg.command == "scan") {
    const ScanOutput s = cmd_scan(cfg);
    emit(cfg.out, s.csv, out);
    if (!cfg.summary.empty()) emit(cfg.summary, dump(s.summary), out);
  } else if (cfg.command == "accumulate") {
    const AccumulateOutput a = cmd_accumulate(cfg);
    emit(cfg.out, a.csv, out);
    if (!cfg.summary.empty()) emit(cfg.summary, dump(a.report), out);
  } else if (cfg.command == "retrieve") {
    emit(cfg.out, dump(cmd_retrieve(cfg)), out);
  } else if (cfg.command == "photonic-reload") {
    emit(cfg.out, dump(cmd_photonic(cfg)), out);
  } else {
    throw ConfigError("unknown command '" + cfg.command + "'");
  }
}

}  // namespace qwe::cli
