#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "d2d/topology.hpp"

using namespace d2d;

TEST(Disk, UniformArea) {
  std::mt19937_64 rng(5);
  const int n = 100000;
  int inner = 0;
  double sum_x = 0.0;
  for (int i = 0; i < n; ++i) {
    const Position p = place_uniform_disk(250.0, rng);
    ASSERT_LE(p.norm(), 250.0);
    inner += p.norm() <= 125.0;
    sum_x += p.x;
  }
  EXPECT_NEAR(static_cast<double>(inner) / n, 0.25, 0.01);
  EXPECT_NEAR(sum_x / n, 0.0, 3.0);
  EXPECT_THROW(place_uniform_disk(0.0, rng), std::domain_error);
}

TEST(Disk, ReceiverNearTransmitter) {
  std::mt19937_64 rng(6);
  const Position tx{240.0, 0.0};
  const int n = 100000;
  for (int i = 0; i < 2000; ++i) {
    const Position rx = place_receiver_near(tx, 50.0, 250.0, rng);
    ASSERT_LE(distance(rx, tx), 50.0);
    ASSERT_LE(rx.norm(), 250.0);
  }
  const Position centre{0.0, 0.0};
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += distance(place_receiver_near(centre, 50.0, 250.0, rng), centre);
  EXPECT_NEAR(sum / n, 2.0 / 3.0 * 50.0, 0.5);
}

TEST(Drop, UniformTopologyValid) {
  std::mt19937_64 rng(8);
  const Topology t = uniform_topology(10, 10, 250.0, 50.0, rng);
  EXPECT_EQ(t.num_cu(), 10u);
  EXPECT_EQ(t.num_d2d(), 10u);
  EXPECT_NO_THROW(t.validate(50.0));
  Topology bad = t;
  bad.cu_positions[0] = {300.0, 0.0};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Concept, Geometry) {
  const Topology t = concept_topology();
  ASSERT_EQ(t.num_cu(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(t.cu_positions[i].norm(), 50.0, 1e-12);
    EXPECT_NEAR(t.d2d_tx[i].norm(), 100.0, 1e-12);
    EXPECT_NEAR(t.d2d_rx[i].norm(), 100.0, 1e-12);
    EXPECT_NEAR(distance(t.d2d_tx[i], t.d2d_rx[i]), 17.43, 0.01);
  }
  EXPECT_NEAR(2.0 * 100.0 * std::sin(deg_to_rad(5.0)), 17.431, 1e-3);
}

TEST(Geometry, DistanceSymmetric) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const Position a = place_uniform_disk(100.0, rng), b = place_uniform_disk(100.0, rng);
    EXPECT_EQ(distance(a, b), distance(b, a));
  }
}

TEST(Mobility, OneStepDisplacement) {
  std::mt19937_64 rng(10);
  MobilityParams p{1.0, 1e-5, 250.0, 1e-3};
  auto s = start_mobility({0.0, 0.0}, p);
  const auto next = mobility_step(s, p, rng);
  EXPECT_NEAR(distance(s.position, next.position), 0.001, 1e-12);
}

TEST(Mobility, HoldingTimeMean) {
  std::mt19937_64 rng(12);
  const int n = 10000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(sample_holding_time(1e-5, rng));
  EXPECT_NEAR(sum / n, 99999.0, 3000.0);
}

TEST(Mobility, StaysInsideCell) {
  std::mt19937_64 rng(13);
  // Small cell and fast node so the boundary is hit constantly.
  MobilityParams p{20.0, 1e-3, 1.0, 1e-3};
  auto s = start_mobility({0.99, 0.0}, p);
  for (int i = 0; i < 1000000; ++i) {
    s = mobility_step(s, p, rng);
    ASSERT_LE(s.position.norm(), 1.0) << "step " << i;
    ASSERT_GE(s.remaining_subframes, 0);
  }
}

TEST(Mobility, Limits) {
  std::mt19937_64 rng(14);
  MobilityParams p{0.0, 0.5, 250.0, 1e-3};
  auto s = start_mobility({10.0, -3.0}, p);
  for (int i = 0; i < 100; ++i) s = mobility_step(s, p, rng);
  EXPECT_EQ(s.position, (Position{10.0, -3.0}));

  MobilityParams q{1.0, 1.0, 250.0, 1e-3};
  auto t = start_mobility({0.0, 0.0}, q);
  for (int i = 0; i < 100; ++i) {
    t = mobility_step(t, q, rng);
    EXPECT_EQ(t.remaining_subframes, 0);
  }
  EXPECT_THROW((MobilityParams{1.0, 0.0, 250.0, 1e-3}.validate()), std::invalid_argument);
}
