#pragma once

// Node placement and CU mobility inside a single circular cell centred on
// the BS at the origin.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace d2d {

struct Position {
  double x = 0.0;
  double y = 0.0;

  double norm() const { return std::hypot(x, y); }
  friend bool operator==(const Position&, const Position&) = default;
};

inline double distance(const Position& a, const Position& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

inline Position polar(double radius, double angle_rad) {
  return {radius * std::cos(angle_rad), radius * std::sin(angle_rad)};
}

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct Topology {
  Position bs{};
  std::vector<Position> cu_positions;
  std::vector<Position> d2d_tx;
  std::vector<Position> d2d_rx;
  double cell_radius_m = 250.0;

  std::size_t num_cu() const { return cu_positions.size(); }
  std::size_t num_d2d() const { return d2d_tx.size(); }

  /// Throws if a node lies outside the cell or a receiver is farther than
  /// pair_range_m from its transmitter (pass <= 0 to skip the pairing check).
  void validate(double pair_range_m = 0.0) const {
    if (d2d_tx.size() != d2d_rx.size()) {
      throw std::invalid_argument("topology: tx/rx count mismatch");
    }
    constexpr double slack = 1e-9;
    auto inside = [&](const Position& p) {
      return std::isfinite(p.x) && std::isfinite(p.y) &&
             p.norm() <= cell_radius_m + slack;
    };
    for (const auto* group : {&cu_positions, &d2d_tx, &d2d_rx}) {
      for (const auto& p : *group) {
        if (!inside(p)) throw std::invalid_argument("topology: node outside cell");
      }
    }
    if (pair_range_m > 0.0) {
      for (std::size_t d = 0; d < d2d_tx.size(); ++d) {
        if (distance(d2d_tx[d], d2d_rx[d]) > pair_range_m + slack) {
          throw std::invalid_argument("topology: receiver out of pairing range");
        }
      }
    }
  }
};

/// Uniform point in a disk of the given radius centred on the origin.
template <class Rng>
Position place_uniform_disk(double radius_m, Rng& rng) {
  if (!(radius_m > 0.0)) {
    throw std::domain_error("place_uniform_disk: radius must be positive");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r = radius_m * std::sqrt(unit(rng));
  const double theta = 2.0 * std::numbers::pi * unit(rng);
  return polar(r, theta);
}

/// Uniform point within range_m of tx, redrawn until it falls in the cell.
template <class Rng>
Position place_receiver_near(const Position& tx, double range_m,
                             double cell_radius_m, Rng& rng) {
  if (tx.norm() > cell_radius_m) {
    throw std::domain_error("place_receiver_near: transmitter outside cell");
  }
  for (;;) {
    const Position offset = place_uniform_disk(range_m, rng);
    const Position rx{tx.x + offset.x, tx.y + offset.y};
    if (rx.norm() <= cell_radius_m) return rx;
  }
}

/// Uniform drop: CUs and D2D transmitters uniform in the cell, each
/// receiver uniform within pair_range_m of its transmitter.
template <class Rng>
Topology uniform_topology(std::size_t n_c, std::size_t n_d, double cell_radius_m,
                          double pair_range_m, Rng& rng) {
  Topology topo;
  topo.cell_radius_m = cell_radius_m;
  for (std::size_t c = 0; c < n_c; ++c) {
    topo.cu_positions.push_back(place_uniform_disk(cell_radius_m, rng));
  }
  for (std::size_t d = 0; d < n_d; ++d) {
    const Position tx = place_uniform_disk(cell_radius_m, rng);
    topo.d2d_tx.push_back(tx);
    topo.d2d_rx.push_back(place_receiver_near(tx, pair_range_m, cell_radius_m, rng));
  }
  return topo;
}

/// Angular layout of the three-CU / three-pair illustration. CUs sit on the
/// inner semicircle, receivers on the outer one, and each transmitter is
/// rotated from its receiver by tx_offset_deg (10 degrees in magnitude).
struct ConceptLayout {
  double inner_radius_m = 50.0;
  double outer_radius_m = 100.0;
  std::array<double, 3> cu_angles_deg{0.0, 90.0, 180.0};
  std::array<double, 3> rx_angles_deg{0.0, 90.0, 180.0};
  std::array<double, 3> tx_offset_deg{10.0, 10.0, -10.0};
};

inline Topology concept_topology(const ConceptLayout& layout = {}) {
  Topology topo;
  topo.cell_radius_m = layout.outer_radius_m;
  for (std::size_t i = 0; i < 3; ++i) {
    topo.cu_positions.push_back(
        polar(layout.inner_radius_m, deg_to_rad(layout.cu_angles_deg[i])));
    const double rx_angle = layout.rx_angles_deg[i];
    topo.d2d_rx.push_back(polar(layout.outer_radius_m, deg_to_rad(rx_angle)));
    topo.d2d_tx.push_back(polar(layout.outer_radius_m,
                                deg_to_rad(rx_angle + layout.tx_offset_deg[i])));
  }
  return topo;
}

// ---------------------------------------------------------------------------
// Mobility: constant speed, uniform heading held for a geometric number of
// subframes, no pause, redirected inward at the cell edge.

struct MobilityParams {
  double speed_m_s = 1.0;
  double change_prob = 1e-5;  // p of the geometric holding time
  double cell_radius_m = 250.0;
  double subframe_s = 1e-3;

  void validate() const {
    if (speed_m_s < 0.0) throw std::invalid_argument("mobility speed must be >= 0");
    if (!(change_prob > 0.0) || change_prob > 1.0) {
      throw std::invalid_argument("mobility change probability must be in (0,1]");
    }
    if (!(cell_radius_m > 0.0) || !(subframe_s > 0.0)) {
      throw std::invalid_argument("mobility radius and step must be > 0");
    }
  }
};

struct MobilityState {
  Position position{};
  double direction_rad = 0.0;
  double speed_m_s = 1.0;
  std::int64_t remaining_subframes = 0;
};

/// Geometric number of failures before the first success, mean (1-p)/p.
template <class Rng>
std::int64_t sample_holding_time(double p, Rng& rng) {
  if (p >= 1.0) return 0;
  std::geometric_distribution<std::int64_t> geom(p);
  return geom(rng);
}

inline MobilityState start_mobility(const Position& start,
                                    const MobilityParams& params) {
  MobilityState s;
  s.position = start;
  s.speed_m_s = params.speed_m_s;
  s.remaining_subframes = 0;
  return s;
}

/// Advances one subframe. A leg that would leave the cell is cut at the
/// current sample (the last whole subframe inside) and a new inward heading
/// is drawn that keeps the next step inside.
template <class Rng>
MobilityState mobility_step(MobilityState state, const MobilityParams& params,
                            Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double step = state.speed_m_s * params.subframe_s;
  const double radius = params.cell_radius_m;

  if (state.remaining_subframes <= 0) {
    state.direction_rad = 2.0 * std::numbers::pi * unit(rng);
    state.remaining_subframes =
        std::max<std::int64_t>(1, sample_holding_time(params.change_prob, rng));
  }

  const Position next{state.position.x + step * std::cos(state.direction_rad),
                      state.position.y + step * std::sin(state.direction_rad)};
  if (next.norm() <= radius) {
    state.position = next;
    --state.remaining_subframes;
    return state;
  }

  // Boundary contact: stay put this subframe and turn inward.
  const double inward = std::atan2(-state.position.y, -state.position.x);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double heading = inward + (unit(rng) - 0.5) * std::numbers::pi;
    const Position probe{state.position.x + step * std::cos(heading),
                         state.position.y + step * std::sin(heading)};
    state.direction_rad = heading;
    if (probe.norm() <= radius) break;
  }
  // Straight to the centre always stays inside if nothing else did.
  const Position probe{state.position.x + step * std::cos(state.direction_rad),
                       state.position.y + step * std::sin(state.direction_rad)};
  if (probe.norm() > radius) state.direction_rad = inward;
  state.remaining_subframes =
      std::max<std::int64_t>(1, sample_holding_time(params.change_prob, rng));
  return state;
}

}  // namespace d2d
