#pragma once

// Threshold-gated utility for time-varying channels. A frame is repeated
// N_D times to form a superframe; lists and moods change only at superframe
// boundaries. Each player keeps, per CU, a running mean of the rates seen on
// that CU and a committed value that only moves when the mean drifts by more
// than delta. Its utility is the committed rate of the CUs it received in
// the first frame of the superframe.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "d2d/learning.hpp"

namespace d2d {

/// Subframe counter (1-based, global) with frame/superframe arithmetic.
class SuperframeClock {
 public:
  explicit SuperframeClock(std::size_t n_d, std::int64_t subframe = 0)
      : n_d_(static_cast<std::int64_t>(n_d)), subframe_(subframe) {
    if (n_d == 0) throw std::invalid_argument("SuperframeClock: N_D must be >= 1");
  }

  void tick() { ++subframe_; }
  std::int64_t subframe() const { return subframe_; }
  std::int64_t superframe_length() const { return n_d_ * n_d_; }

  /// m such that subframes m*N_D^2 + 1 ... (m+1)*N_D^2 form the superframe.
  std::int64_t superframe_index() const { return (subframe_ - 1) / superframe_length(); }
  std::int64_t offset() const { return (subframe_ - 1) % superframe_length(); }

  bool started() const { return subframe_ >= 1; }
  bool in_first_frame() const { return started() && offset() < n_d_; }
  bool at_first_frame_end() const { return started() && offset() == n_d_ - 1; }
  bool at_superframe_end() const { return started() && subframe_ % superframe_length() == 0; }

  /// 1-based subframe position inside the current frame.
  std::size_t subframe_in_frame() const { return static_cast<std::size_t>(offset() % n_d_) + 1; }

 private:
  std::int64_t n_d_;
  std::int64_t subframe_;
};

struct ThresholdState {
  std::vector<std::optional<int>> a_d;  // first-frame CUs; nullopt = no transmission
  std::size_t cursor = 0;               // x
  std::vector<std::int64_t> n_d;        // observations per CU
  std::vector<double> r_a;              // running mean (normalized)
  std::vector<double> u_d;              // committed value; 0 = never committed
  double delta = 0.01;

  ThresholdState() = default;
  ThresholdState(std::size_t num_d2d, std::size_t num_cu, double threshold)
      : a_d(num_d2d), n_d(num_cu, 0), r_a(num_cu, 0.0), u_d(num_cu, 0.0), delta(threshold) {}
};

/// Records the CU received in the current first-frame subframe.
inline void record_first_frame(ThresholdState& state, const SuperframeClock& clock,
                               std::optional<int> cu) {
  if (!clock.in_first_frame()) {
    throw std::logic_error("record_first_frame: outside the first frame of a superframe");
  }
  state.a_d.at(state.cursor) = cu;
  ++state.cursor;
  if (clock.at_first_frame_end()) state.cursor = 0;
}

/// Folds one normalized rate observation on CU c into its running mean.
inline void mc_update(ThresholdState& state, int cu, double rate_norm) {
  const auto c = static_cast<std::size_t>(cu);
  state.n_d.at(c) += 1;
  const double n = static_cast<double>(state.n_d[c]);
  state.r_a[c] = (1.0 - 1.0 / n) * state.r_a[c] + (1.0 / n) * rate_norm;
}

/// Commits drifted means and returns the superframe utility. Subframes that
/// carried no transmission count as the utility floor.
inline double superframe_utility(ThresholdState& state, const SuperframeClock& clock) {
  if (!clock.at_superframe_end()) {
    throw std::logic_error("superframe_utility: not at a superframe boundary");
  }
  for (std::size_t c = 0; c < state.u_d.size(); ++c) {
    if (state.u_d[c] == 0.0 || std::abs(state.u_d[c] - state.r_a[c]) > state.delta) {
      state.u_d[c] = state.r_a[c];
    }
  }
  double sum = 0.0;
  for (const auto& entry : state.a_d) {
    sum += entry ? state.u_d[static_cast<std::size_t>(*entry)] : kUtilityFloor;
  }
  return clamp_utility(sum / static_cast<double>(state.a_d.size()));
}

struct SuperframeOutcome {
  double social_utility_bps = 0.0;   // committed utilities scaled back to bps
  double social_utility_norm = 0.0;
  double normalized_mood = 0.0;
  std::vector<AllocationProfile> allocations;  // all N_D^2 subframes
};

/// One superframe: list selection, N_D frames of BS allocation with per-CU
/// averaging, then the threshold utility and mood update.
template <class Env>
SuperframeOutcome run_superframe(std::vector<PlayerState>& players,
                                 std::vector<ThresholdState>& thresholds, Env& env,
                                 SuperframeClock& clock, const ListSpace& lists,
                                 const LearningParams& params, Rng& rng,
                                 bool keep_allocations = false) {
  const std::size_t n_d = players.size();
  if (n_d != params.n_d || thresholds.size() != n_d || env.num_cu() != params.n_c ||
      lists.num_cu() != params.n_c) {
    throw std::invalid_argument("run_superframe: dimension mismatch");
  }
  if (clock.started() && !clock.at_superframe_end()) {
    throw std::logic_error("run_superframe: clock not at a superframe boundary");
  }

  std::vector<ListRank> ranks(n_d);
  std::vector<D2dList> chosen(n_d);
  for (std::size_t d = 0; d < n_d; ++d) {
    ranks[d] = select_list(players[d], lists.size(), params, rng);
    chosen[d] = lists.unrank(ranks[d]);
  }

  SuperframeOutcome out;
  const std::int64_t total = clock.superframe_length();
  for (std::int64_t i = 0; i < total; ++i) {
    clock.tick();
    env.begin_subframe(rng);
    auto profile = alloc_bs(chosen, rr_sequence(clock.subframe_in_frame(), n_d), env.num_cu(),
                            [&env](int c, int d) { return env.passes(c, d); });
    for (std::size_t d = 0; d < n_d; ++d) {
      const auto cu = profile.transmitting_on(d);
      if (clock.in_first_frame()) record_first_frame(thresholds[d], clock, cu);
      if (cu) {
        const double rate = env.rate_bps(*cu, static_cast<int>(d));
        mc_update(thresholds[d], *cu, clamp_utility(rate / params.normalization_bps));
      }
    }
    if (keep_allocations) out.allocations.push_back(std::move(profile));
  }

  for (std::size_t d = 0; d < n_d; ++d) {
    const double utility = superframe_utility(thresholds[d], clock);
    const Mood mood = update_mood(players[d], ranks[d], utility, params.target(d), params, rng);
    players[d] = PlayerState{ranks[d], utility, mood};
    out.social_utility_norm += utility;
  }
  out.social_utility_bps = out.social_utility_norm * params.normalization_bps;
  out.normalized_mood = normalized_mood(players);
  return out;
}

}  // namespace d2d
