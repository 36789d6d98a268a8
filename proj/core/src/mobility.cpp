#include "deepcq/mobility.hpp"

#include <algorithm>
#include <cmath>

namespace deepcq {

int RegionLayout::band_at(const Arena& arena, double x) const {
  const double w = arena.effective_width();
  if (w <= 0.0) return 0;
  int band = static_cast<int>(x / (w / 5.0));
  return std::clamp(band, 0, 4);
}

double RegionLayout::multiplier_at(const Arena& arena, double x) const {
  return multipliers[static_cast<std::size_t>(band_at(arena, x))];
}

Vec2 reflect_into_arena(Vec2 pos, double& heading, const Arena& arena) {
  const double w = arena.effective_width();
  const double h = arena.effective_height();
  // Fold along each axis independently; each fold mirrors the heading
  // component for that axis.
  while (pos.x < 0.0 || pos.x > w) {
    if (pos.x < 0.0) {
      pos.x = -pos.x;
    } else {
      pos.x = 2.0 * w - pos.x;
    }
    heading = std::atan2(std::sin(heading), -std::cos(heading));
  }
  while (pos.y < 0.0 || pos.y > h) {
    if (pos.y < 0.0) {
      pos.y = -pos.y;
    } else {
      pos.y = 2.0 * h - pos.y;
    }
    heading = std::atan2(-std::sin(heading), std::cos(heading));
  }
  return pos;
}

NodeKinematics gauss_markov_step(const NodeKinematics& k,
                                 const MobilityParams& p,
                                 double region_multiplier, const Arena& arena,
                                 RngStream& rng) {
  NodeKinematics next = k;

  // Advance with the current speed and heading, then reflect.
  next.position.x += k.speed * std::cos(k.heading);
  next.position.y += k.speed * std::sin(k.heading);
  next.position = reflect_into_arena(next.position, next.heading, arena);

  // Speed recurrence. The sqrt(1 - a^2) noise gain keeps the stationary
  // variance at exactly sigma^2 independent of alpha.
  const double a = p.alpha;
  const double gain = std::sqrt(std::max(0.0, 1.0 - a * a));
  const double mean_speed = p.mean_speed * p.dynamic_scale;
  const double speed_sigma = std::sqrt(p.speed_variance * p.dynamic_scale *
                                       region_multiplier);
  double speed =
      a * next.speed + (1.0 - a) * mean_speed + gain * speed_sigma * rng.normal();
  next.speed = std::abs(speed);

  // Heading random walk around the current heading: the mean reverts to
  // wherever the node is already pointing, so direction drifts freely.
  const double heading_sigma = std::sqrt(p.heading_variance * p.dynamic_scale);
  next.heading += gain * heading_sigma * rng.normal();
  // Keep the angle in [-pi, pi] to avoid unbounded growth.
  next.heading = std::atan2(std::sin(next.heading), std::cos(next.heading));

  return next;
}

NodeKinematics random_waypoint_step(const NodeKinematics& k, WaypointState& wp,
                                    const MobilityParams& p, const Arena& arena,
                                    RngStream& rng) {
  NodeKinematics next = k;
  const double remaining = distance(k.position, wp.target);
  const double step = wp.leg_speed;

  if (remaining <= step) {
    // Snap to the waypoint and immediately start the next leg (no pause).
    next.position = wp.target;
    wp.target = {rng.uniform(0.0, arena.effective_width()),
                 rng.uniform(0.0, arena.effective_height())};
    const double lo = p.speed_min * p.dynamic_scale;
    const double hi = p.speed_max * p.dynamic_scale;
    wp.leg_speed = rng.uniform(lo, hi);
  } else {
    const double f = step / remaining;
    next.position.x += (wp.target.x - k.position.x) * f;
    next.position.y += (wp.target.y - k.position.y) * f;
  }

  next.speed = wp.leg_speed;
  next.heading = std::atan2(wp.target.y - next.position.y,
                            wp.target.x - next.position.x);
  return next;
}

}  // namespace deepcq
