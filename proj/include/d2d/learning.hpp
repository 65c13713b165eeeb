#pragma once

// Mood-based distributed learning for the D2D players: list selection,
// frame utility, mood update and the per-frame orchestration with the BS.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "d2d/allocator.hpp"

namespace d2d {

using Rng = std::mt19937_64;
using ListRank = std::int64_t;

enum class Mood { Content, Discontent };

inline const char* to_string(Mood m) { return m == Mood::Content ? "C" : "D"; }

/// Utilities live in the open interval (0,1); they are clamped to
/// [kUtilityFloor, 1 - kUtilityFloor] after normalization.
inline constexpr double kUtilityFloor = 1e-9;

inline double clamp_utility(double u) {
  if (!(u >= kUtilityFloor)) return kUtilityFloor;
  if (u > 1.0 - kUtilityFloor) return 1.0 - kUtilityFloor;
  return u;
}

struct PlayerState {
  ListRank list = 0;
  double utility = kUtilityFloor;
  Mood mood = Mood::Discontent;

  friend bool operator==(const PlayerState&, const PlayerState&) = default;
};

struct LearningParams {
  double epsilon = 0.5;
  double k = 11.0;
  std::vector<double> r_tgt;        // normalized target per player
  double normalization_bps = 1.0;   // raw rate that maps to utility 1
  std::size_t n_c = 3;
  std::size_t n_d = 3;
  std::size_t list_len = 1;
  // 0 compares utilities exactly; otherwise relative tolerance.
  double utility_rel_tol = 0.0;

  /// Exploration parameters must satisfy 0 < epsilon < 1 and k > n_d.
  /// `unperturbed` admits epsilon == 0 for the unperturbed process.
  void validate(bool unperturbed = false) const {
    const bool eps_ok = unperturbed ? (epsilon >= 0.0 && epsilon < 1.0)
                                    : (epsilon > 0.0 && epsilon < 1.0);
    if (!eps_ok) throw std::invalid_argument("epsilon must lie in (0,1)");
    if (!(k > static_cast<double>(n_d))) {
      throw std::invalid_argument("k must exceed the number of D2D players (k=" +
                                  std::to_string(k) + ", N_D=" + std::to_string(n_d) + ")");
    }
    if (!(normalization_bps > 0.0)) {
      throw std::invalid_argument("normalization must be > 0");
    }
    if (list_len == 0 || list_len > n_c) {
      throw std::invalid_argument("list length must satisfy 1 <= K <= N_C");
    }
    if (ListSpace(n_c, list_len).size() < 2) {
      throw std::invalid_argument("need at least two lists (L >= 2)");
    }
    if (!r_tgt.empty() && r_tgt.size() != n_d) {
      throw std::invalid_argument("r_tgt must have one entry per player");
    }
  }

  double explore_probability() const { return std::pow(epsilon, k); }
  double target(std::size_t d) const { return r_tgt.empty() ? 0.0 : r_tgt[d]; }
};

/// Probability that a player whose configuration changed becomes content.
inline double content_probability(double epsilon, double utility) {
  return std::pow(epsilon, 1.0 - utility);
}

inline bool utilities_equal(double a, double b, double rel_tol) {
  if (rel_tol <= 0.0) return a == b;
  return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
}

/// Content: keep w.p. 1 - eps^k, otherwise uniform over the other L - 1
/// lists. Discontent: uniform over all L lists.
inline ListRank select_list(const PlayerState& prev, ListRank num_lists,
                            const LearningParams& params, Rng& rng) {
  if (prev.mood == Mood::Discontent) {
    std::uniform_int_distribution<ListRank> any(0, num_lists - 1);
    return any(rng);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) >= params.explore_probability()) return prev.list;
  std::uniform_int_distribution<ListRank> other(0, num_lists - 2);
  const ListRank pick = other(rng);
  return pick >= prev.list ? pick + 1 : pick;
}

/// Frame average of the per-subframe rates, normalized and clamped.
inline double frame_utility(std::span<const double> subframe_rates_bps,
                            std::size_t n_d, double normalization_bps) {
  if (subframe_rates_bps.size() != n_d) {
    throw std::invalid_argument("frame_utility: expected one rate per subframe");
  }
  double sum = 0.0;
  for (double r : subframe_rates_bps) {
    if (r < 0.0) throw std::invalid_argument("frame_utility: negative rate");
    sum += r;
  }
  return clamp_utility(sum / static_cast<double>(n_d) / normalization_bps);
}

/// Mood after a frame. Consumes one uniform draw only in the probabilistic
/// branch.
inline Mood update_mood(const PlayerState& prev, ListRank new_list, double new_utility,
                        double r_tgt, const LearningParams& params, Rng& rng) {
  if (prev.mood == Mood::Content && prev.list == new_list &&
      utilities_equal(prev.utility, new_utility, params.utility_rel_tol)) {
    return Mood::Content;
  }
  if (new_utility >= r_tgt) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return unit(rng) < content_probability(params.epsilon, new_utility) ? Mood::Content
                                                                        : Mood::Discontent;
  }
  return Mood::Discontent;
}

/// Fraction of content players.
inline double normalized_mood(std::span<const PlayerState> players) {
  if (players.empty()) return 0.0;
  std::size_t content = 0;
  for (const auto& p : players) content += p.mood == Mood::Content ? 1 : 0;
  return static_cast<double>(content) / static_cast<double>(players.size());
}

// ---------------------------------------------------------------------------
// Channel environments seen by a frame. An environment provides, for the
// current subframe, whether a reuse passes the allocation test and the rate
// the player would observe:
//
//   void   begin_subframe(Rng&);
//   bool   passes(int cu, int player) const;
//   double rate_bps(int cu, int player) const;
//   size_t num_cu() const;
//
// Players only ever read their own rate; the BS only reads `passes`.

/// Result of playing N_D subframes with fixed lists.
struct FramePlay {
  std::vector<double> mean_rate_bps;          // per player
  std::vector<AllocationProfile> allocations; // per subframe
};

template <class Env>
FramePlay play_frame(const std::vector<D2dList>& lists, Env& env, Rng& rng) {
  const std::size_t n_d = lists.size();
  FramePlay play;
  play.mean_rate_bps.assign(n_d, 0.0);
  play.allocations.reserve(n_d);
  for (std::size_t s = 1; s <= n_d; ++s) {
    env.begin_subframe(rng);
    auto profile = alloc_bs(lists, rr_sequence(s, n_d), env.num_cu(),
                            [&env](int c, int d) { return env.passes(c, d); });
    for (std::size_t d = 0; d < n_d; ++d) {
      if (auto c = profile.transmitting_on(d)) {
        play.mean_rate_bps[d] += env.rate_bps(*c, static_cast<int>(d));
      }
    }
    play.allocations.push_back(std::move(profile));
  }
  for (double& r : play.mean_rate_bps) r /= static_cast<double>(n_d);
  return play;
}

/// Deterministic environment: a fixed rate and test outcome per (CU, player).
/// This is the pathloss-only channel.
class StaticEnvironment {
 public:
  StaticEnvironment(std::size_t n_c, std::size_t n_d)
      : n_c_(n_c), n_d_(n_d), rate_(n_c * n_d, 0.0), pass_(n_c * n_d, true) {}

  void begin_subframe(Rng&) {}
  bool passes(int c, int d) const { return pass_[idx(c, d)]; }
  double rate_bps(int c, int d) const { return rate_[idx(c, d)]; }
  std::size_t num_cu() const { return n_c_; }
  std::size_t num_d2d() const { return n_d_; }

  void set(int c, int d, double rate_bps, bool pass = true) {
    rate_[idx(c, d)] = rate_bps;
    pass_[idx(c, d)] = pass;
  }

 private:
  std::size_t idx(int c, int d) const {
    return static_cast<std::size_t>(c) * n_d_ + static_cast<std::size_t>(d);
  }
  std::size_t n_c_;
  std::size_t n_d_;
  std::vector<double> rate_;
  std::vector<bool> pass_;
};

struct FrameOutcome {
  std::vector<double> mean_rate_bps;
  double social_utility_bps = 0.0;   // sum of raw frame-average rates
  double social_utility_norm = 0.0;  // sum of normalized utilities
  double normalized_mood = 0.0;
  std::vector<AllocationProfile> allocations;
};

/// Optional switches for the unperturbed process. With both set the frame
/// behaves as epsilon -> 0: content players never explore and changed
/// configurations never turn content.
struct Perturbation {
  bool exploration = true;
  bool content_draws = true;
};

/// One frame of the learning loop: list selection, N_D subframes of BS
/// allocation, utility, mood. RNG use is ordered: players' selections in
/// index order, then the environment, then moods in index order.
template <class Env>
FrameOutcome run_frame(std::vector<PlayerState>& players, Env& env,
                       const ListSpace& lists, const LearningParams& params, Rng& rng,
                       Perturbation perturbation = {}) {
  const std::size_t n_d = players.size();
  if (n_d != params.n_d || lists.num_cu() != params.n_c || env.num_cu() != params.n_c) {
    throw std::invalid_argument("run_frame: dimension mismatch");
  }

  std::vector<ListRank> ranks(n_d);
  std::vector<D2dList> chosen(n_d);
  for (std::size_t d = 0; d < n_d; ++d) {
    const bool frozen = !perturbation.exploration && players[d].mood == Mood::Content;
    ranks[d] = frozen ? players[d].list : select_list(players[d], lists.size(), params, rng);
    chosen[d] = lists.unrank(ranks[d]);
  }

  FramePlay play = play_frame(chosen, env, rng);

  FrameOutcome out;
  out.mean_rate_bps = play.mean_rate_bps;
  out.allocations = std::move(play.allocations);
  for (std::size_t d = 0; d < n_d; ++d) {
    const double utility = clamp_utility(out.mean_rate_bps[d] / params.normalization_bps);
    Mood mood;
    if (!perturbation.content_draws) {
      const bool unchanged = players[d].mood == Mood::Content && players[d].list == ranks[d] &&
                             utilities_equal(players[d].utility, utility, params.utility_rel_tol);
      mood = unchanged ? Mood::Content : Mood::Discontent;
    } else {
      mood = update_mood(players[d], ranks[d], utility, params.target(d), params, rng);
    }
    players[d] = PlayerState{ranks[d], utility, mood};
    out.social_utility_bps += out.mean_rate_bps[d];
    out.social_utility_norm += utility;
  }
  out.normalized_mood = normalized_mood(players);
  return out;
}

}  // namespace d2d
