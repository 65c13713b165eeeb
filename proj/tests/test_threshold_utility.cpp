#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "d2d/threshold_utility.hpp"

using namespace d2d;

TEST(Clock, SuperframeArithmetic) {
  SuperframeClock clock(3);
  EXPECT_FALSE(clock.started());
  EXPECT_EQ(clock.superframe_length(), 9);
  std::vector<bool> first, end;
  for (int i = 0; i < 18; ++i) {
    clock.tick();
    first.push_back(clock.in_first_frame());
    end.push_back(clock.at_superframe_end());
    EXPECT_EQ(clock.superframe_index(), i / 9);
    EXPECT_EQ(clock.subframe_in_frame(), static_cast<std::size_t>(i % 3) + 1);
  }
  const std::vector<bool> f{1, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0};
  const std::vector<bool> e{0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1};
  EXPECT_EQ(first, f);
  EXPECT_EQ(end, e);
}

TEST(FirstFrame, Recording) {
  ThresholdState s(3, 3, 0.01);
  SuperframeClock clock(3);
  const std::optional<int> cus[3] = {1, 2, 0};
  for (auto c : cus) {
    clock.tick();
    record_first_frame(s, clock, c);
  }
  EXPECT_EQ(s.a_d, (std::vector<std::optional<int>>{1, 2, 0}));
  EXPECT_EQ(s.cursor, 0u);
  clock.tick();
  EXPECT_THROW(record_first_frame(s, clock, 2), std::logic_error);
  EXPECT_EQ(s.a_d, (std::vector<std::optional<int>>{1, 2, 0}));
}

TEST(FirstFrame, UnassignedReadsAsFloor) {
  ThresholdState s(3, 3, 0.01);
  SuperframeClock clock(3);
  for (std::optional<int> c : {std::optional<int>{0}, std::optional<int>{}, std::optional<int>{0}}) {
    clock.tick();
    record_first_frame(s, clock, c);
  }
  mc_update(s, 0, 0.6);
  for (int i = 0; i < 6; ++i) clock.tick();
  EXPECT_NEAR(superframe_utility(s, clock), (0.6 + kUtilityFloor + 0.6) / 3.0, 1e-15);
}

TEST(RunningMean, Examples) {
  ThresholdState s(3, 3, 0.01);
  mc_update(s, 1, 0.4);
  EXPECT_DOUBLE_EQ(s.r_a[1], 0.4);
  EXPECT_EQ(s.n_d[1], 1);
  mc_update(s, 1, 0.6);
  EXPECT_DOUBLE_EQ(s.r_a[1], 0.5);
  ThresholdState t(3, 3, 0.01);
  for (double x : {0.3, 0.6, 0.9}) mc_update(t, 2, x);
  EXPECT_NEAR(t.r_a[2], 0.6, 1e-12);
}

TEST(RunningMean, MatchesBruteForceMean) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cu(0, 4);
  ThresholdState s(4, 5, 0.01);
  std::vector<std::vector<double>> obs(5);
  for (int i = 0; i < 100000; ++i) {
    const int c = cu(rng);
    const double x = u(rng);
    obs[static_cast<std::size_t>(c)].push_back(x);
    mc_update(s, c, x);
    if (i % 997 == 0 || i == 99999) {
      for (std::size_t k = 0; k < 5; ++k) {
        if (obs[k].empty()) continue;
        const double mean = std::accumulate(obs[k].begin(), obs[k].end(), 0.0) / obs[k].size();
        ASSERT_NEAR(s.r_a[k], mean, 1e-12 * mean) << "cu " << k << " after " << i;
      }
    }
  }
}

namespace {

// Reaches the end of the first superframe with a_d = [1, 2, 0].
SuperframeClock at_first_end(ThresholdState& s) {
  SuperframeClock clock(3);
  for (int c : {1, 2, 0}) {
    clock.tick();
    record_first_frame(s, clock, c);
  }
  for (int i = 0; i < 6; ++i) clock.tick();
  return clock;
}

}  // namespace

TEST(Commit, FirstCommitAndArithmetic) {
  ThresholdState s(3, 3, 0.01);
  s.r_a = {0.4, 0.5, 0.6};
  auto clock = at_first_end(s);
  EXPECT_NEAR(superframe_utility(s, clock), 0.5, 1e-15);
  EXPECT_EQ(s.u_d, s.r_a);
}

TEST(Commit, Hysteresis) {
  ThresholdState s(3, 3, 0.01);
  s.r_a = {0.4, 0.5, 0.6};
  auto clock = at_first_end(s);
  superframe_utility(s, clock);
  s.r_a = {0.405, 0.52, 0.6};
  for (int i = 0; i < 9; ++i) clock.tick();
  superframe_utility(s, clock);
  EXPECT_DOUBLE_EQ(s.u_d[0], 0.4);
  EXPECT_DOUBLE_EQ(s.u_d[1], 0.52);
  EXPECT_DOUBLE_EQ(s.u_d[2], 0.6);
  clock.tick();
  EXPECT_THROW(superframe_utility(s, clock), std::logic_error);
}

TEST(Superframe, StaticChannelMatchesFrameUtility) {
  StaticEnvironment env(3, 3);
  const double rates[3][3] = {{3e6, 4e6, 2e6}, {5e6, 1e6, 6e6}, {2.5e6, 7e6, 3.5e6}};
  for (int c = 0; c < 3; ++c) {
    for (int d = 0; d < 3; ++d) env.set(c, d, rates[c][d]);
  }
  const ListSpace lists(3, 2);
  LearningParams p;
  p.epsilon = 0.5;
  p.k = 11.0;
  p.n_c = 3;
  p.n_d = 3;
  p.list_len = 2;
  p.normalization_bps = 10e6;
  p.r_tgt.assign(3, 0.0);

  Rng rng(2);
  std::vector<PlayerState> players(3);
  std::vector<ThresholdState> th(3, ThresholdState(3, 3, 0.01));
  SuperframeClock clock(3);
  for (int n = 0; n < 300; ++n) {
    const auto out = run_superframe(players, th, env, clock, lists, p, rng, true);
    ASSERT_EQ(out.allocations.size(), 9u);
    ASSERT_TRUE(clock.at_superframe_end());
    // Frame utility of the same lists under the deterministic channel.
    std::vector<D2dList> chosen;
    for (const auto& pl : players) chosen.push_back(lists.unrank(pl.list));
    Rng unused(0);
    auto e = env;
    const auto play = play_frame(chosen, e, unused);
    double social = 0.0;
    for (std::size_t d = 0; d < 3; ++d) {
      const double expect = clamp_utility(play.mean_rate_bps[d] / p.normalization_bps);
      // Committed values differ from the current means only within delta.
      ASSERT_NEAR(players[d].utility, expect, 0.01 + 1e-12);
      social += players[d].utility;
    }
    ASSERT_NEAR(out.social_utility_norm, social, 1e-12);
    ASSERT_NEAR(out.social_utility_bps, social * 10e6, 1e-3);
  }
}

TEST(Superframe, FirstSuperframeIsExact) {
  StaticEnvironment env(2, 2);
  env.set(0, 0, 2e6);
  env.set(1, 0, 4e6);
  env.set(0, 1, 3e6);
  env.set(1, 1, 1e6);
  const ListSpace lists(2, 1);
  LearningParams p;
  p.epsilon = 0.5;
  p.k = 3.0;
  p.n_c = 2;
  p.n_d = 2;
  p.normalization_bps = 10e6;
  Rng rng(3);
  std::vector<PlayerState> players(2);
  std::vector<ThresholdState> th(2, ThresholdState(2, 2, 0.01));
  SuperframeClock clock(2);
  run_superframe(players, th, env, clock, lists, p, rng);
  std::vector<D2dList> chosen{lists.unrank(players[0].list), lists.unrank(players[1].list)};
  Rng unused(0);
  const auto play = play_frame(chosen, env, unused);
  for (std::size_t d = 0; d < 2; ++d) {
    EXPECT_NEAR(players[d].utility, clamp_utility(play.mean_rate_bps[d] / 10e6), 1e-15);
  }
}
