#pragma once

#include <array>
#include <cmath>

#include "deepcq/rng.hpp"

namespace deepcq {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Vec2& a, const Vec2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Simulation area. `region_scale` multiplies both dimensions (the radio
/// range is unchanged, so a larger scale means a sparser network).
struct Arena {
  double width = 1000.0;
  double height = 300.0;
  double region_scale = 1.0;
  double radio_range = 250.0;

  double effective_width() const { return width * region_scale; }
  double effective_height() const { return height * region_scale; }
};

struct NodeKinematics {
  Vec2 position;
  double speed = 0.0;    // meters per slot
  double heading = 0.0;  // radians
};

/// Five equal-width vertical bands between the source side (left) and the
/// destination side (right). The center band has twice the speed variance of
/// the mid bands; the two edge bands have half of it.
struct RegionLayout {
  std::array<double, 5> multipliers{0.5, 1.0, 2.0, 1.0, 0.5};

  double multiplier_at(const Arena& arena, double x) const;
  int band_at(const Arena& arena, double x) const;
};

enum class MobilityModel { Static, GaussMarkov, RandomWaypoint };

struct MobilityParams {
  MobilityModel model = MobilityModel::GaussMarkov;
  double alpha = 0.75;             // Gauss-Markov memory in [0, 1]
  double mean_speed = 2.0;         // m/slot
  double speed_variance = 1.0;     // stationary speed variance, before scaling
  double heading_variance = 0.09;  // rad^2 per slot at alpha = 0
  double speed_min = 0.5;          // random-waypoint leg speed range, m/slot
  double speed_max = 4.0;
  double dynamic_scale = 1.0;      // multiplies mean speed and both variances
};

/// One Gauss-Markov slot: advance the position along the current heading,
/// reflect at the arena walls, then update speed and heading with the
/// first-order recurrence  v' = a v + (1-a) v_mean + sqrt(1-a^2) sigma w.
/// `region_multiplier` scales the speed variance (the 5-band layout).
NodeKinematics gauss_markov_step(const NodeKinematics& k,
                                 const MobilityParams& p,
                                 double region_multiplier, const Arena& arena,
                                 RngStream& rng);

/// Random-waypoint leg state.
struct WaypointState {
  Vec2 target;
  double leg_speed = 0.0;
};

/// One random-waypoint slot: move toward the waypoint; on arrival pick a new
/// uniform waypoint and a new uniform leg speed (zero pause time).
NodeKinematics random_waypoint_step(const NodeKinematics& k, WaypointState& wp,
                                    const MobilityParams& p, const Arena& arena,
                                    RngStream& rng);

/// Reflects a position into the arena, flipping the heading component that
/// crossed a wall. Positions further out than one full arena length are
/// folded repeatedly.
Vec2 reflect_into_arena(Vec2 pos, double& heading, const Arena& arena);

}  // namespace deepcq
