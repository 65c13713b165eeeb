// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "d2d/analysis.hpp"
#include "d2d/metrics.hpp"
#include "d2d/simulator.hpp"
#include "d2d/threshold_utility.hpp"

using namespace d2d;

namespace {

// Golden concept run.
constexpr std::int64_t kGoldenFrames = 100000;
constexpr double kGoldenW = 1.224;
constexpr double kGoldenTol = 0.005;
constexpr double kGoldenSeconds = 30.0;

// Oracle agreement.
constexpr int kRandomScenarios = 20;
constexpr std::int64_t kAgreementFrames = 100000;
constexpr double kAgreementRelTol = 0.01;
constexpr double kAgreementSeconds = 300.0;

// Exact chain.
constexpr double kStableMassFloor = 0.5;
constexpr double kChainSeconds = 60.0;

// Potentials.
constexpr int kPotentialSamples = 10000;
constexpr double kGammaC = 12.776;
constexpr double kGammaTol = 0.001;
constexpr double kGammaD = 22.0;

// Main presets.
constexpr int kMainSeeds = 5;
constexpr double kPathlossLo = 3.5e6, kPathlossHi = 6.5e6;
constexpr double kFadingLo = 4.0e6, kFadingHi = 8.0e6;
constexpr double kMainSeconds = 900.0;

// Invariants.
constexpr int kOrthogonalityTrials = 10000;
constexpr double kMeanRelTol = 1e-12;
constexpr double kRowSumTol = 1e-12;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const char* name, bool pass, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string tuple_str(const AllocationTuple& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.size(); ++i) {
    s += (i ? "," : "") + (t[i] < 0 ? std::string("-") : "c" + std::to_string(t[i] + 1));
  }
  return s + ")";
}

void golden_concept() {
  const auto t0 = Clock::now();
  auto cfg = preset("concept");
  cfg.horizon = kGoldenFrames;
  const auto s = run_experiment(cfg);
  const double secs = seconds_since(t0);
  const std::set<AllocationTuple> expect{{1, 2, 0}, {2, 0, 1}};
  std::string realized;
  for (const auto& t : s.best_content_allocations) realized += (realized.empty() ? "" : " ") + tuple_str(t);
  const bool pass = std::abs(s.max_content_social_bps - kGoldenW) <= kGoldenTol &&
                    s.best_content_allocations == expect && secs < kGoldenSeconds;
  report("golden concept run", pass,
         fmt("max all-content social utility %.5f bps (target %.3f +/- %.3f), allocations %s, "
             "%lld frames, %.1f s",
             s.max_content_social_bps, kGoldenW, kGoldenTol, realized.c_str(),
             static_cast<long long>(kGoldenFrames), secs));
}

struct Agreement {
  bool ok = false;
  double w_visited = 0.0;
  double w_star = 0.0;
  bool feasible = false;
};

Agreement agreement_for(ScenarioConfig cfg) {
  cfg.horizon = kAgreementFrames;
  const auto world = make_world(cfg);
  const auto cal = calibrate(cfg, world);
  const auto game = make_game(cfg, world, cal);
  const auto opt = brute_force_optimum(game);
  RunOptions ro;
  ro.count_profiles_from = kAgreementFrames / 2 + 1;
  const auto s = run_experiment(cfg, ro);
  const auto top = most_visited(s.profile_visits);
  Agreement a;
  a.w_star = opt.w_star;
  const auto u = game.utilities(*top);
  a.w_visited = social_utility(u);
  a.feasible = game.feasible(u);
  a.ok = a.feasible && a.w_visited >= (1.0 - kAgreementRelTol) * opt.w_star;
  return a;
}

void oracle_agreement() {
  const auto t0 = Clock::now();
  int agree = 0, total = 0;
  std::string misses;
  const auto illus = agreement_for(preset("concept"));
  ++total;
  agree += illus.ok;
  if (!illus.ok) misses += fmt("concept %.4f/%.4f", illus.w_visited, illus.w_star);
  for (int i = 1; i <= kRandomScenarios; ++i) {
    auto cfg = preset("random-small");
    cfg.topology_seed = static_cast<std::uint64_t>(i);
    cfg.seed = static_cast<std::uint64_t>(i);
    const auto a = agreement_for(cfg);
    ++total;
    agree += a.ok;
    if (!a.ok) {
      misses += fmt("%sdrop %d %.4f/%.4f%s", misses.empty() ? "" : "; ", i, a.w_visited, a.w_star,
                    a.feasible ? "" : " infeasible");
    }
  }
  const double secs = seconds_since(t0);
  report("oracle agreement", agree == total && secs < kAgreementSeconds,
         fmt("%d/%d scenarios with the most-visited profile within %.0f%% of W* over the last half of "
             "%lld frames, %.1f s; misses (visited/W*): %s",
             agree, total, 100.0 * kAgreementRelTol, static_cast<long long>(kAgreementFrames), secs,
             misses.empty() ? "none" : misses.c_str()));
}

void exact_stability() {
  const auto t0 = Clock::now();
  const auto cfg = preset("tiny-dtmc");
  const auto world = make_world(cfg);
  const auto cal = calibrate(cfg, world);
  const auto game = make_game(cfg, world, cal);
  const auto opt = brute_force_optimum(game);
  std::vector<DtmcSolve> family;
  std::vector<double> mass;
  for (double eps : {0.2, 0.1, 0.05}) {
    auto chain = build_exact_dtmc(game, cfg.k, eps);
    auto pi = stationary_distribution(chain.transition);
    double m = 0.0;
    for (std::size_t i = 0; i < chain.size(); ++i) {
      if (check_stable_state(chain.states[i], game, opt).passes()) m += pi(static_cast<Eigen::Index>(i));
    }
    mass.push_back(m);
    family.push_back({eps, std::move(chain), std::move(pi)});
  }
  const auto stable = stochastically_stable_set(family);
  bool all_pass = !stable.empty();
  for (const auto& s : stable) all_pass = all_pass && check_stable_state(s, game, opt).passes();
  const double secs = seconds_since(t0);
  const bool pass = mass[0] < mass[1] && mass[1] < mass[2] && mass[2] > kStableMassFloor &&
                    all_pass && secs < kChainSeconds;
  report("exact stability", pass,
         fmt("%zu states; optimal all-content mass %.4f / %.4f / %.4f at eps 0.2 / 0.1 / 0.05; "
             "%zu stable state(s), all content, aligned and optimal: %s; %.2f s",
             family[0].chain.size(), mass[0], mass[1], mass[2], stable.size(),
             all_pass ? "yes" : "no", secs));
}

void potentials() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int ordered = 0;
  for (int i = 0; i < kPotentialSamples; ++i) {
    const std::size_t n = 1 + rng() % 20;
    std::vector<double> r(n);
    for (double& x : r) x = std::clamp(unit(rng), 1e-9, 1.0 - 1e-9);
    const double k = static_cast<double>(n) + 1e-6 + 50.0 * unit(rng);
    const auto g = stochastic_potentials(r, k, 1 + rng() % 10);
    ordered += g.content < g.discontent;
  }
  const std::vector<double> r{0.4076, 0.4076, 0.4089};
  const double k = 11.0;
  const auto g = stochastic_potentials(r, k, 2);
  const auto graph = content_discontent_graph(k, r);
  const auto t3 = min_resistance_tree(graph, 1);
  const auto t1 = min_resistance_tree(graph, 0);
  auto edge_set = [](const RootedTree& t) {
    std::set<std::pair<std::size_t, std::size_t>> s;
    for (const auto& e : t.edges) s.insert({e.from, e.to});
    return s;
  };
  const std::set<std::pair<std::size_t, std::size_t>> want3{{2, 0}, {0, 1}}, want1{{1, 0}, {2, 0}};
  const double sum = discontent_cost(r);
  const bool trees = edge_set(t3) == want3 && std::abs(t3.resistance - (k + sum)) < 1e-12 &&
                     edge_set(t1) == want1 && std::abs(t1.resistance - 2.0 * k) < 1e-12;
  const bool pass = ordered == kPotentialSamples && std::abs(g.content - kGammaC) <= kGammaTol &&
                    g.discontent == kGammaD && trees;
  report("stochastic potentials", pass,
         fmt("gamma_C < gamma_D on %d/%d random inputs; gamma_C = %.4f, gamma_D = %.1f; "
             "content-root tree resistance %.4f, discontent-root tree resistance %.1f, edges as expected: %s",
             ordered, kPotentialSamples, g.content, g.discontent, t3.resistance, t1.resistance,
             trees ? "yes" : "no"));
}

void main_presets() {
  const auto t0 = Clock::now();
  double pathloss = 0.0, fading = 0.0;
  std::string per_seed;
  for (int seed = 1; seed <= kMainSeeds; ++seed) {
    auto p = preset("main-pathloss");
    p.seed = static_cast<std::uint64_t>(seed);
    auto f = preset("main-fading");
    f.seed = static_cast<std::uint64_t>(seed);
    const double a = run_experiment(p).mean_social_bps;
    const double b = run_experiment(f).mean_social_bps;
    pathloss += a / kMainSeeds;
    fading += b / kMainSeeds;
    per_seed += fmt("%s%.2f/%.2f", per_seed.empty() ? "" : " ", a / 1e6, b / 1e6);
  }
  const double secs = seconds_since(t0);
  const bool pass = pathloss >= kPathlossLo && pathloss <= kPathlossHi && fading >= kFadingLo &&
                    fading <= kFadingHi && secs < kMainSeconds;
  report("main presets", pass,
         fmt("pathloss mean %.2f Mbps in [%.1f, %.1f], fading mean %.2f Mbps in [%.1f, %.1f] over "
             "%d seeds (per seed %s), %.1f s",
             pathloss / 1e6, kPathlossLo / 1e6, kPathlossHi / 1e6, fading / 1e6, kFadingLo / 1e6,
             kFadingHi / 1e6, kMainSeeds, per_seed.c_str(), secs));
}

std::string run_bytes(const ScenarioConfig& cfg) {
  std::string out = csv_header(cfg.mode, cfg.n_d) + "\n";
  RunOptions ro;
  ro.sink = [&](const EpochRecord& r) { out += csv_row(r) + "\n"; };
  run_experiment(cfg, ro);
  return out;
}

void invariants() {
  std::vector<std::string> broken;
  std::mt19937_64 rng(77);

  // Orthogonal allocation.
  for (int t = 0; t < kOrthogonalityTrials; ++t) {
    const std::size_t n_c = 1 + rng() % 10, n_d = 1 + rng() % 10, k = 1 + rng() % n_c;
    const ListSpace space(n_c, k);
    std::uniform_int_distribution<std::int64_t> pick(0, space.size() - 1);
    std::vector<D2dList> lists;
    for (std::size_t d = 0; d < n_d; ++d) lists.push_back(space.unrank(pick(rng)));
    const auto p = alloc_bs(lists, rr_sequence(1 + rng() % n_d, n_d), n_c,
                            [&](int, int) { return rng() % 2 == 0; });
    std::set<int> used;
    for (const auto& a : p.assignment) {
      if (a && !used.insert(*a).second) {
        broken.push_back("orthogonality");
        t = kOrthogonalityTrials;
        break;
      }
    }
  }

  // Utility bounds and mood-state exclusion over learning runs.
  bool bounds = true, exclusion = true;
  for (const char* name : {"concept", "random-small", "main-pathloss"}) {
    auto cfg = preset(name);
    cfg.horizon = 3000;
    const auto world = make_world(cfg);
    const auto cal = calibrate(cfg, world);
    RunOptions ro;
    ro.sink = [&](const EpochRecord& r) {
      for (std::size_t d = 0; d < r.players.size(); ++d) {
        const auto& p = r.players[d];
        bounds = bounds && p.utility > 0.0 && p.utility < 1.0;
        exclusion = exclusion && !(p.mood == Mood::Content && p.utility < cal.r_tgt[d]);
      }
    };
    run_experiment(cfg, ro);
  }
  auto fcfg = preset("main-fading");
  fcfg.horizon = 50;
  const auto fcal = calibrate(fcfg, make_world(fcfg));
  RunOptions fro;
  fro.sink = [&](const EpochRecord& r) {
    for (std::size_t d = 0; d < r.players.size(); ++d) {
      const auto& p = r.players[d];
      bounds = bounds && p.utility > 0.0 && p.utility < 1.0;
      exclusion = exclusion && !(p.mood == Mood::Content && p.utility < fcal.r_tgt[d]);
    }
  };
  run_experiment(fcfg, fro);
  if (!bounds) broken.push_back("utility bounds");
  if (!exclusion) broken.push_back("mood-state exclusion");

  // Round-robin rotation: first subframe d1..dN, then shifted by one each subframe.
  bool rr = rr_sequence(1, 3) == std::vector<int>{0, 1, 2} &&
            rr_sequence(2, 3) == std::vector<int>{1, 2, 0} &&
            rr_sequence(3, 3) == std::vector<int>{2, 0, 1};
  for (std::size_t n = 1; n <= 16; ++n) {
    for (std::size_t s = 1; s <= n; ++s) {
      const auto o = rr_sequence(s, n);
      for (std::size_t j = 0; j < n; ++j) rr = rr && o[j] == static_cast<int>((j + s - 1) % n);
    }
  }
  if (!rr) broken.push_back("round-robin rotation");

  // Running mean against a recomputed mean.
  ThresholdState th(2, 4, 0.01);
  std::vector<std::vector<double>> obs(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const int c = static_cast<int>(rng() % 4);
    const double x = unit(rng);
    obs[static_cast<std::size_t>(c)].push_back(x);
    mc_update(th, c, x);
  }
  for (std::size_t c = 0; c < 4; ++c) {
    const double mean = std::accumulate(obs[c].begin(), obs[c].end(), 0.0) / obs[c].size();
    worst = std::max(worst, std::abs(th.r_a[c] - mean) / mean);
  }
  if (worst > kMeanRelTol) broken.push_back(fmt("running mean (rel err %.2e)", worst));

  // Row-stochastic exact chains.
  const auto tiny = preset("tiny-dtmc");
  const auto tw = make_world(tiny);
  const auto game = make_game(tiny, tw, calibrate(tiny, tw));
  double row_err = 0.0;
  for (double eps : {0.0, 0.2, 0.1, 0.05, 1e-3}) {
    row_err = std::max(row_err, max_row_sum_error(build_exact_dtmc(game, tiny.k, eps).transition));
  }
  if (row_err > kRowSumTol) broken.push_back(fmt("row sums (err %.2e)", row_err));

  // Seeded reruns.
  for (const char* name : {"concept", "main-pathloss", "main-fading"}) {
    auto cfg = preset(name);
    cfg.horizon = cfg.mode == Mode::PathlossFrame ? 1000 : 20;
    if (run_bytes(cfg) != run_bytes(cfg)) broken.push_back(std::string("rerun ") + name);
  }

  std::string detail = fmt(
      "orthogonality over %d random allocations, utility bounds, mood-state exclusion, round-robin "
      "rotation, running mean (worst rel err %.1e), chain row sums (worst err %.1e), byte-identical "
      "reruns",
      kOrthogonalityTrials, worst, row_err);
  if (!broken.empty()) {
    detail += "; broken:";
    for (const auto& b : broken) detail += " " + b;
  }
  report("invariant suites", broken.empty(), detail);
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria{golden_concept, oracle_agreement, exact_stability,
                                                    potentials, main_presets, invariants};
  for (const auto& c : criteria) {
    try {
      c();
    } catch (const std::exception& e) {
      report("criterion", false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
