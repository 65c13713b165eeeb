#pragma once

// Experiment driver: builds the drop (topology and static shadowing) from a
// seed, wraps it as a per-subframe channel environment, derives rate
// targets and runs the learning loop frame by frame or superframe by
// superframe.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "d2d/analysis.hpp"
#include "d2d/channel.hpp"
#include "d2d/learning.hpp"
#include "d2d/scenario.hpp"
#include "d2d/threshold_utility.hpp"
#include "d2d/topology.hpp"

namespace d2d {

/// Independent RNG streams derived from one seed.
enum class Stream : std::uint32_t {
  Topology = 1,
  Shadowing = 2,
  Learning = 3,
  Mobility = 4,
  Calibration = 5,
};

inline Rng make_stream(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

/// Node positions plus the static shadowing of every link.
struct World {
  Topology topology;
  LinkGainTable shadow;
  ChannelConfig channel;
  PowerConfig power;

  std::size_t num_cu() const { return topology.num_cu(); }
  std::size_t num_d2d() const { return topology.num_d2d(); }

  double cu_to_bs(std::size_t c) const {
    return channel.pathloss_at(distance(topology.cu_positions[c], topology.bs)) * shadow.g_cB[c];
  }
  double d2d_to_bs(std::size_t d) const {
    return channel.pathloss_at(distance(topology.d2d_tx[d], topology.bs)) * shadow.g_dB[d];
  }
  double d2d_direct(std::size_t d) const {
    return channel.pathloss_at(distance(topology.d2d_tx[d], topology.d2d_rx[d])) * shadow.g_d[d];
  }
  double cu_to_rx(std::size_t c, std::size_t d) const {
    return channel.pathloss_at(distance(topology.cu_positions[c], topology.d2d_rx[d])) *
           shadow.cu_to_rx(c, d);
  }

  /// Pathloss times shadowing at the current positions.
  LinkGainTable gains() const {
    LinkGainTable g(num_cu(), num_d2d());
    for (std::size_t c = 0; c < num_cu(); ++c) g.g_cB[c] = cu_to_bs(c);
    for (std::size_t d = 0; d < num_d2d(); ++d) {
      g.g_dB[d] = d2d_to_bs(d);
      g.g_d[d] = d2d_direct(d);
    }
    for (std::size_t c = 0; c < num_cu(); ++c) {
      for (std::size_t d = 0; d < num_d2d(); ++d) g.cu_to_rx(c, d) = cu_to_rx(c, d);
    }
    return g;
  }
};

inline World make_world(const ScenarioConfig& cfg) {
  cfg.validate();
  World w;
  w.channel = cfg.channel;
  w.power = cfg.power;
  if (cfg.topology == TopologyKind::Concept) {
    w.topology = concept_topology(cfg.concept_layout);
  } else {
    Rng topo_rng = make_stream(cfg.topology_seed.value_or(cfg.seed), Stream::Topology);
    w.topology = uniform_topology(cfg.n_c, cfg.n_d, cfg.cell_radius_m, cfg.pair_range_m, topo_rng);
  }
  w.topology.validate(cfg.pair_range_m);

  Rng shadow_rng = make_stream(cfg.topology_seed.value_or(cfg.seed), Stream::Shadowing);
  const double sigma = cfg.channel.shadowing_sigma_db;
  w.shadow = LinkGainTable(cfg.n_c, cfg.n_d);
  for (double& g : w.shadow.g_cB) g = sample_shadowing(sigma, shadow_rng);
  for (double& g : w.shadow.g_dB) g = sample_shadowing(sigma, shadow_rng);
  for (double& g : w.shadow.g_d) g = sample_shadowing(sigma, shadow_rng);
  for (double& g : w.shadow.g_cd) g = sample_shadowing(sigma, shadow_rng);
  return w;
}

inline double link_rate_bps(const ChannelConfig& ch, const PowerConfig& pw, double g_d,
                            double g_cd) {
  return d2d_rate(ch.rate_bandwidth(), pw.p_d_mw, g_d, pw.p_c_mw, g_cd, ch.ue_noise_mw());
}

/// Deterministic environment of a drop without fast fading or mobility.
inline StaticEnvironment static_environment(const World& world, const ScenarioConfig& cfg) {
  const LinkGainTable g = world.gains();
  const BsChannelView bs(g);
  StaticEnvironment env(world.num_cu(), world.num_d2d());
  for (std::size_t c = 0; c < world.num_cu(); ++c) {
    for (std::size_t d = 0; d < world.num_d2d(); ++d) {
      const double rate = link_rate_bps(world.channel, world.power, g.g_d[d], g.cu_to_rx(c, d));
      const bool pass = !cfg.allocation_test ||
                        allocation_test(c, d, bs, world.power, world.channel.bs_noise_mw(),
                                        cfg.gamma_tgt_db);
      env.set(static_cast<int>(c), static_cast<int>(d), rate, pass);
    }
  }
  return env;
}

/// Time-varying environment: CUs move every subframe and, when enabled, each
/// link draws a fresh fast-fading factor per subframe.
class FadingEnvironment {
 public:
  FadingEnvironment(World world, const ScenarioConfig& cfg)
      : world_(std::move(world)),
        allocation_test_(cfg.allocation_test),
        gamma_tgt_db_(cfg.gamma_tgt_db),
        mobility_enabled_(cfg.mobility_enabled),
        mobility_(cfg.mobility),
        mobility_rng_(make_stream(cfg.seed, Stream::Mobility)),
        base_(world_.gains()),
        now_(base_) {
    mobility_.cell_radius_m = world_.topology.cell_radius_m;
    for (const auto& p : world_.topology.cu_positions) {
      movers_.push_back(start_mobility(p, mobility_));
    }
  }

  void begin_subframe(Rng& rng) {
    if (mobility_enabled_) {
      for (std::size_t c = 0; c < movers_.size(); ++c) {
        movers_[c] = mobility_step(movers_[c], mobility_, mobility_rng_);
        world_.topology.cu_positions[c] = movers_[c].position;
        base_.g_cB[c] = world_.cu_to_bs(c);
        for (std::size_t d = 0; d < world_.num_d2d(); ++d) {
          base_.cu_to_rx(c, d) = world_.cu_to_rx(c, d);
        }
      }
    }
    const bool fading = world_.channel.fast_fading;
    auto draw = [&](double base) { return base * sample_fast_fading(fading, rng); };
    for (std::size_t c = 0; c < base_.n_c; ++c) now_.g_cB[c] = draw(base_.g_cB[c]);
    for (std::size_t d = 0; d < base_.n_d; ++d) now_.g_dB[d] = draw(base_.g_dB[d]);
    for (std::size_t d = 0; d < base_.n_d; ++d) now_.g_d[d] = draw(base_.g_d[d]);
    for (std::size_t i = 0; i < base_.g_cd.size(); ++i) now_.g_cd[i] = draw(base_.g_cd[i]);
  }

  bool passes(int c, int d) const {
    if (!allocation_test_) return true;
    return allocation_test(static_cast<std::size_t>(c), static_cast<std::size_t>(d),
                           BsChannelView(now_), world_.power, world_.channel.bs_noise_mw(),
                           gamma_tgt_db_);
  }

  double rate_bps(int c, int d) const {
    const auto dd = static_cast<std::size_t>(d);
    return link_rate_bps(world_.channel, world_.power, now_.g_d[dd],
                         now_.cu_to_rx(static_cast<std::size_t>(c), dd));
  }

  std::size_t num_cu() const { return world_.num_cu(); }
  const World& world() const { return world_; }
  const LinkGainTable& current_gains() const { return now_; }

 private:
  World world_;
  bool allocation_test_;
  double gamma_tgt_db_;
  bool mobility_enabled_;
  MobilityParams mobility_;
  Rng mobility_rng_;
  std::vector<MobilityState> movers_;
  LinkGainTable base_;
  LinkGainTable now_;
};

/// Rate divisor: the configured value, or margin times the best single-link
/// rate (pathloss and shadowing, interference from the CU included).
inline double resolve_normalization(const World& world, const ScenarioConfig& cfg) {
  if (cfg.normalization_bps > 0.0) return cfg.normalization_bps;
  const LinkGainTable g = world.gains();
  double peak = 0.0;
  for (std::size_t c = 0; c < world.num_cu(); ++c) {
    for (std::size_t d = 0; d < world.num_d2d(); ++d) {
      peak = std::max(peak, link_rate_bps(world.channel, world.power, g.g_d[d], g.cu_to_rx(c, d)));
    }
  }
  return cfg.normalization_margin * peak;
}

struct Calibration {
  double normalization_bps = 1.0;
  std::vector<double> r_tgt;          // normalized
  std::vector<double> observed_norm;  // utilities the targets were taken from
  std::vector<D2dList> lists;         // lists used for the calibration epoch
};

namespace detail {

/// Mean per-player rate over `frames` frames of fixed lists.
template <class Env>
std::vector<double> mean_rates(const std::vector<D2dList>& lists, Env env, std::size_t frames,
                               Rng& rng) {
  std::vector<double> total(lists.size(), 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    const auto play = play_frame(lists, env, rng);
    for (std::size_t d = 0; d < lists.size(); ++d) total[d] += play.mean_rate_bps[d];
  }
  for (double& t : total) t /= static_cast<double>(frames);
  return total;
}

}  // namespace detail

/// Rate targets from one calibration epoch played on a copy of the drop:
/// the baseline lists, or lists drawn uniformly from a dedicated stream.
inline Calibration calibrate(const ScenarioConfig& cfg, const World& world) {
  Calibration cal;
  cal.normalization_bps = resolve_normalization(world, cfg);
  const ListSpace space(cfg.n_c, cfg.list_len);
  Rng rng = make_stream(cfg.seed, Stream::Calibration);

  switch (cfg.target_rule) {
    case TargetRule::None:
      cal.r_tgt.assign(cfg.n_d, 0.0);
      return cal;
    case TargetRule::Explicit:
      cal.r_tgt = cfg.explicit_targets;
      return cal;
    case TargetRule::BaselineProfile:
      cal.lists = cfg.baseline_lists;
      break;
    case TargetRule::FirstEpoch: {
      std::uniform_int_distribution<ListRank> any(0, space.size() - 1);
      for (std::size_t d = 0; d < cfg.n_d; ++d) cal.lists.push_back(space.unrank(any(rng)));
      break;
    }
  }

  std::vector<double> rates;
  if (cfg.mode == Mode::PathlossFrame) {
    rates = detail::mean_rates(cal.lists, static_environment(world, cfg), 1, rng);
  } else {
    rates = detail::mean_rates(cal.lists, FadingEnvironment(world, cfg), cfg.n_d, rng);
  }
  for (double r : rates) {
    const double u = clamp_utility(r / cal.normalization_bps);
    cal.observed_norm.push_back(u);
    cal.r_tgt.push_back(cfg.target_fraction * u);
  }
  return cal;
}

/// Deterministic game of a pathloss scenario, for the oracle and the exact
/// chain.
inline DeterministicGame make_game(const ScenarioConfig& cfg, const World& world,
                                   const Calibration& cal) {
  return DeterministicGame(static_environment(world, cfg), cfg.list_len, cal.normalization_bps,
                           cal.r_tgt);
}

// ---------------------------------------------------------------------------
// Experiment loop.

struct EpochRecord {
  std::int64_t epoch = 0;  // 1-based frame or superframe
  double social_utility_bps = 0.0;
  double social_utility_norm = 0.0;
  double normalized_mood = 0.0;
  std::vector<PlayerState> players;
  std::vector<AllocationProfile> allocations;  // filled when tracing
};

struct RunOptions {
  std::function<void(const EpochRecord&)> sink;
  bool keep_allocations = false;
  // Count action-profile visits from this epoch on (pathloss mode; 0 = off).
  std::int64_t count_profiles_from = 0;
  // Social optimum in normalized units, for the at-optimum fraction.
  std::optional<double> w_star;
  double w_star_tol = 1e-9;
};

using AllocationTuple = std::vector<int>;  // CU per player, -1 = none

struct RunSummary {
  std::int64_t epochs = 0;
  Calibration calibration;
  double mean_social_bps = 0.0;
  double mean_social_norm = 0.0;
  double mean_mood = 0.0;
  double max_social_bps = -std::numeric_limits<double>::infinity();
  // Best social utility among epochs where every player is content, and the
  // per-subframe allocations realized in those epochs.
  double max_content_social_bps = -std::numeric_limits<double>::infinity();
  std::set<AllocationTuple> best_content_allocations;
  std::optional<double> fraction_at_optimum;
  std::map<ActionProfile, std::int64_t> profile_visits;
};

inline AllocationTuple allocation_tuple(const AllocationProfile& p) {
  AllocationTuple t;
  for (std::size_t d = 0; d < p.assignment.size(); ++d) {
    const auto c = p.transmitting_on(d);
    t.push_back(c ? *c : -1);
  }
  return t;
}

namespace detail {

inline void accumulate(RunSummary& s, const EpochRecord& rec, const RunOptions& opt,
                       std::int64_t& at_optimum) {
  s.mean_social_bps += rec.social_utility_bps;
  s.mean_social_norm += rec.social_utility_norm;
  s.mean_mood += rec.normalized_mood;
  s.max_social_bps = std::max(s.max_social_bps, rec.social_utility_bps);
  if (rec.normalized_mood == 1.0) {
    const bool first = !std::isfinite(s.max_content_social_bps);
    const double tol = first ? 0.0 : 1e-9 * std::max(1.0, std::abs(s.max_content_social_bps));
    if (first || rec.social_utility_bps > s.max_content_social_bps + tol) {
      s.max_content_social_bps = rec.social_utility_bps;
      s.best_content_allocations.clear();
    }
    if (rec.social_utility_bps >= s.max_content_social_bps - tol) {
      for (const auto& a : rec.allocations) s.best_content_allocations.insert(allocation_tuple(a));
    }
  }
  if (opt.w_star && rec.social_utility_norm >= *opt.w_star - opt.w_star_tol) ++at_optimum;
  if (opt.count_profiles_from > 0 && rec.epoch >= opt.count_profiles_from) {
    ActionProfile p;
    for (const auto& pl : rec.players) p.push_back(pl.list);
    ++s.profile_visits[p];
  }
}

}  // namespace detail

/// Runs cfg.horizon epochs. Every output is a function of (cfg, seed).
inline RunSummary run_experiment(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
  const World world = make_world(cfg);
  RunSummary summary;
  summary.calibration = calibrate(cfg, world);
  const auto& cal = summary.calibration;
  const LearningParams params = cfg.learning(cal.r_tgt, cal.normalization_bps);
  params.validate();
  const ListSpace lists(cfg.n_c, cfg.list_len);

  Rng rng = make_stream(cfg.seed, Stream::Learning);
  std::vector<PlayerState> players(cfg.n_d);
  std::int64_t at_optimum = 0;

  EpochRecord rec;
  if (cfg.mode == Mode::PathlossFrame) {
    StaticEnvironment env = static_environment(world, cfg);
    for (std::int64_t n = 1; n <= cfg.horizon; ++n) {
      FrameOutcome out = run_frame(players, env, lists, params, rng);
      rec.epoch = n;
      rec.social_utility_bps = out.social_utility_bps;
      rec.social_utility_norm = out.social_utility_norm;
      rec.normalized_mood = out.normalized_mood;
      rec.players = players;
      rec.allocations = std::move(out.allocations);
      detail::accumulate(summary, rec, opt, at_optimum);
      if (opt.sink) opt.sink(rec);
    }
  } else {
    FadingEnvironment env(world, cfg);
    std::vector<ThresholdState> thresholds(cfg.n_d, ThresholdState(cfg.n_d, cfg.n_c, cfg.delta));
    SuperframeClock clock(cfg.n_d);
    for (std::int64_t n = 1; n <= cfg.horizon; ++n) {
      SuperframeOutcome out = run_superframe(players, thresholds, env, clock, lists, params, rng,
                                             opt.keep_allocations);
      rec.epoch = n;
      rec.social_utility_bps = out.social_utility_bps;
      rec.social_utility_norm = out.social_utility_norm;
      rec.normalized_mood = out.normalized_mood;
      rec.players = players;
      rec.allocations = std::move(out.allocations);
      detail::accumulate(summary, rec, opt, at_optimum);
      if (opt.sink) opt.sink(rec);
    }
  }

  summary.epochs = cfg.horizon;
  const double h = static_cast<double>(cfg.horizon);
  summary.mean_social_bps /= h;
  summary.mean_social_norm /= h;
  summary.mean_mood /= h;
  if (opt.w_star) summary.fraction_at_optimum = static_cast<double>(at_optimum) / h;
  return summary;
}

/// Action profile with the most visits; ties go to the smallest profile.
inline std::optional<ActionProfile> most_visited(const std::map<ActionProfile, std::int64_t>& v) {
  std::optional<ActionProfile> best;
  std::int64_t count = -1;
  for (const auto& [p, n] : v) {
    if (n > count) {
      count = n;
      best = p;
    }
  }
  return best;
}

}  // namespace d2d
