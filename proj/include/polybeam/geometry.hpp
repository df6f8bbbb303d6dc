#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polybeam/common.hpp"

namespace polybeam {

// Direction of arrival. Azimuth is measured from the positive x-axis,
// elevation from the positive z-axis (polar angle). Azimuth wraps into
// [0, 360); elevation outside [0, 180] is rejected.
struct Direction {
  double az = 0.0;  // degrees, [0, 360)
  double el = 0.0;  // degrees, [0, 180]

  Direction() = default;
  Direction(double az_deg, double el_deg) {
    if (!std::isfinite(az_deg) || !std::isfinite(el_deg))
      throw InvalidArgument("Direction: angles must be finite");
    if (el_deg < 0.0 || el_deg > 180.0)
      throw InvalidArgument("Direction: elevation " + std::to_string(el_deg) +
                            " outside [0, 180]");
    az = std::fmod(az_deg, 360.0);
    if (az < 0.0) az += 360.0;
    el = el_deg;
  }

  Eigen::Vector3d unit_vector() const {
    const double azr = deg2rad(az), elr = deg2rad(el);
    return {std::sin(elr) * std::cos(azr), std::sin(elr) * std::sin(azr),
            std::cos(elr)};
  }

  bool operator==(const Direction& o) const { return az == o.az && el == o.el; }
};

struct ArrayGeometry {
  std::vector<Eigen::Vector3d> mic_positions;  // meters
  std::vector<std::string> labels;

  int num_mics() const { return static_cast<int>(mic_positions.size()); }

  void validate() const {
    if (mic_positions.empty())
      throw InvalidArgument("ArrayGeometry: need at least one microphone");
    for (const auto& p : mic_positions)
      if (!p.allFinite())
        throw InvalidArgument("ArrayGeometry: non-finite microphone position");
    for (std::size_t i = 0; i < mic_positions.size(); ++i)
      for (std::size_t j = i + 1; j < mic_positions.size(); ++j)
        if ((mic_positions[i] - mic_positions[j]).norm() < 1e-9)
          throw InvalidArgument("ArrayGeometry: microphones " +
                                std::to_string(i) + " and " + std::to_string(j) +
                                " coincide");
    if (!labels.empty() && labels.size() != mic_positions.size())
      throw InvalidArgument("ArrayGeometry: label count mismatch");
  }
};

// Directions with solid-angle quadrature weights summing to 4*pi.
struct DesignGrid {
  std::vector<Direction> directions;
  std::vector<double> quad_weights;

  int size() const { return static_cast<int>(directions.size()); }
};

// Runtime steering variables; both lie in [-1, 1].
struct SteeringState {
  double d_phi = 0.0;
  double d_theta = 0.0;

  SteeringState() = default;
  SteeringState(double dp, double dt) : d_phi(dp), d_theta(dt) {
    if (!std::isfinite(dp) || !std::isfinite(dt))
      throw SteeringRangeError("SteeringState: factors must be finite");
    if (dp < -1.0 || dp > 1.0 || dt < -1.0 || dt > 1.0)
      throw SteeringRangeError("SteeringState: factors (" + std::to_string(dp) +
                               ", " + std::to_string(dt) + ") outside [-1, 1]");
  }

  bool operator==(const SteeringState& o) const {
    return d_phi == o.d_phi && d_theta == o.d_theta;
  }
};

// Equal-angle sphere grid: rings at elevations step..180-step plus the two
// poles. Ring weights follow sin(el)*dEl*dAz, poles get a polar-cap weight,
// and everything is rescaled so the weights sum to exactly 4*pi.
// Ordering is elevation-major (north pole first), azimuth-minor.
inline DesignGrid make_design_grid(double step_deg) {
  const double ratio = step_deg > 0.0 ? 180.0 / step_deg : 0.0;
  if (!(step_deg > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9)
    throw InvalidArgument("make_design_grid: step " + std::to_string(step_deg) +
                          " does not divide 180");
  const int n_rings = static_cast<int>(std::lround(ratio)) - 1;
  const int n_az = static_cast<int>(std::lround(360.0 / step_deg));
  const double step_rad = deg2rad(step_deg);

  DesignGrid grid;
  grid.directions.reserve(static_cast<std::size_t>(n_rings) * n_az + 2);
  grid.quad_weights.reserve(grid.directions.capacity());

  const double cap_weight = 2.0 * kPi * (1.0 - std::cos(step_rad / 2.0));
  grid.directions.emplace_back(0.0, 0.0);
  grid.quad_weights.push_back(cap_weight);
  for (int r = 1; r <= n_rings; ++r) {
    const double el = r * step_deg;
    const double ring_weight = std::sin(deg2rad(el)) * step_rad * step_rad;
    for (int a = 0; a < n_az; ++a) {
      grid.directions.emplace_back(a * step_deg, el);
      grid.quad_weights.push_back(ring_weight);
    }
  }
  grid.directions.emplace_back(0.0, 180.0);
  grid.quad_weights.push_back(cap_weight);

  double total = 0.0;
  for (double w : grid.quad_weights) total += w;
  const double scale = 4.0 * kPi / total;
  for (double& w : grid.quad_weights) w *= scale;
  return grid;
}

// Maps a frontal-hemisphere direction onto the steering variables:
// d = (angle - 90) / 90 for azimuth and elevation alike.
inline SteeringState interpolation_factors(const Direction& dir) {
  if (dir.az > 180.0)
    throw SteeringRangeError("interpolation_factors: azimuth " +
                             std::to_string(dir.az) +
                             " outside the frontal hemisphere [0, 180]");
  return SteeringState((dir.az - 90.0) / 90.0, (dir.el - 90.0) / 90.0);
}

// Great-circle angle between two directions, in degrees.
inline double angular_distance(const Direction& a, const Direction& b) {
  const double c = a.unit_vector().dot(b.unit_vector());
  return rad2deg(std::acos(std::clamp(c, -1.0, 1.0)));
}

// Cartesian product of azimuth and elevation samples, elevation-major.
inline std::vector<Direction> make_pld_grid(std::array<double, 2> az_range,
                                            std::array<double, 2> el_range,
                                            double step_deg) {
  const auto check_range = [&](std::array<double, 2> r, const char* name) {
    if (r[0] > r[1])
      throw InvalidArgument(std::string("make_pld_grid: empty ") + name +
                            " range");
    if (r[0] < 0.0 || r[1] > 180.0)
      throw InvalidArgument(std::string("make_pld_grid: ") + name +
                            " range outside [0, 180]");
    const double span = r[1] - r[0];
    if (span > 0.0) {
      if (!(step_deg > 0.0))
        throw InvalidArgument("make_pld_grid: step must be positive");
      const double ratio = span / step_deg;
      if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw InvalidArgument(std::string("make_pld_grid: step does not divide ") +
                              name + " span");
    }
  };
  check_range(az_range, "azimuth");
  check_range(el_range, "elevation");

  const auto samples = [&](std::array<double, 2> r) {
    std::vector<double> v;
    const int n = r[1] > r[0]
                      ? static_cast<int>(std::lround((r[1] - r[0]) / step_deg))
                      : 0;
    for (int i = 0; i <= n; ++i) v.push_back(r[0] + i * step_deg);
    return v;
  };

  std::vector<Direction> out;
  for (double el : samples(el_range))
    for (double az : samples(az_range)) out.emplace_back(az, el);
  return out;
}

}  // namespace polybeam
