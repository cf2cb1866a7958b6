#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "radnav/geodesy.hpp"
#include "radnav/radar.hpp"
#include "radnav/types.hpp"

namespace radnav {

/// Own-ship position/velocity estimate (ECEF) with 6x6 covariance.
struct NavState {
  double time = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat6 covariance = Mat6::Identity();

  Mat3 position_covariance() const { return covariance.topLeftCorner<3, 3>(); }
};

struct ImuModel {
  double accel_noise_sigma = 0.02;  // m/s^2 per axis, per sample
  double update_rate_hz = 100.0;

  double dt() const { return 1.0 / update_rate_hz; }
};

/// Sampled ECEF satellite trajectory with linear interpolation.
struct SatelliteEphemeris {
  int64_t sat_id = 0;
  std::vector<double> times;
  std::vector<Vec3> positions;
  double rcs_m2 = 1.0;

  void validate() const {
    if (times.size() < 2 || times.size() != positions.size())
      throw std::invalid_argument("SatelliteEphemeris: need >= 2 samples");
    for (size_t i = 1; i < times.size(); ++i)
      if (times[i] <= times[i - 1])
        throw std::invalid_argument("SatelliteEphemeris: non-increasing time");
  }

  Vec3 position_at(double t) const {
    if (t < times.front() - 1e-9 || t > times.back() + 1e-9)
      throw std::out_of_range("SatelliteEphemeris: query outside span for sat " +
                              std::to_string(sat_id));
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const size_t hi = std::min(times.size() - 1,
                               static_cast<size_t>(std::max<ptrdiff_t>(
                                   1, it - times.begin())));
    const size_t lo = hi - 1;
    const double f = (t - times[lo]) / (times[hi] - times[lo]);
    return positions[lo] + f * (positions[hi] - positions[lo]);
  }
};

/// Discretized double-integrator propagation driven by measured
/// acceleration. Covariance uses the exact discrete transition and the
/// white-acceleration process noise
///   Q(dt) = sigma^2 [[dt^4/4, dt^3/2], [dt^3/2, dt^2]]  per axis.
inline NavState imu_propagate(const NavState& state, const Vec3& measured_accel,
                              double dt, const ImuModel& imu) {
  if (dt <= 0) throw std::invalid_argument("imu_propagate: dt <= 0");
  NavState out = state;
  out.time = state.time + dt;
  out.position = state.position + state.velocity * dt +
                 0.5 * dt * dt * measured_accel;
  out.velocity = state.velocity + dt * measured_accel;

  Mat6 f = Mat6::Identity();
  f.topRightCorner<3, 3>() = dt * Mat3::Identity();
  const double s2 = imu.accel_noise_sigma * imu.accel_noise_sigma;
  Mat6 q = Mat6::Zero();
  q.topLeftCorner<3, 3>() = s2 * dt * dt * dt * dt / 4.0 * Mat3::Identity();
  q.topRightCorner<3, 3>() = s2 * dt * dt * dt / 2.0 * Mat3::Identity();
  q.bottomLeftCorner<3, 3>() = q.topRightCorner<3, 3>();
  q.bottomRightCorner<3, 3>() = s2 * dt * dt * Mat3::Identity();
  out.covariance = symmetrize(f * state.covariance * f.transpose() + q);
  return out;
}

/// Radar measurement frame: spherical coordinates of a satellite (or
/// target) relative to the antenna. ECEF baseline -> local NED at the
/// own position -> body frame via the attitude -> (az, el, range).
inline Vec3 ecef_to_measurement(const Vec3& own_position, const Attitude& att,
                                const Vec3& sat_position) {
  const Vec3 baseline = sat_position - own_position;
  if (baseline.norm() < 1e-9)
    throw std::invalid_argument("ecef_to_measurement: zero baseline");
  const Mat3 t_ned = ned_rotation_at(own_position);
  const Vec3 c = ned_to_body(att) * (t_ned * baseline);
  const double r = c.norm();
  return {std::atan2(c.y(), c.x()), std::asin(-c.z() / r), r};
}

/// Inverse of ecef_to_measurement for a noiseless triple.
inline Vec3 measurement_to_ecef(const Vec3& own_position, const Attitude& att,
                                double az, double el, double range) {
  const Vec3 body{range * std::cos(el) * std::cos(az),
                  range * std::cos(el) * std::sin(az),
                  -range * std::sin(el)};
  const Mat3 t_ned = ned_rotation_at(own_position);
  return own_position + t_ned.transpose() * (body_to_ned(att) * body);
}

/// Measurement Jacobian w.r.t. the 6-d nav state by central differences.
/// Velocity columns are zero (the transform is position-only). The step
/// is scale-aware: ranges of 1e6 m need steps well above unit scale.
inline Mat36 numeric_jacobian(const Vec3& own_position, const Attitude& att,
                              const Vec3& sat_position) {
  Mat36 h = Mat36::Zero();
  const double step = std::max(1e-3, 1e-8 * own_position.norm());
  for (int j = 0; j < 3; ++j) {
    Vec3 plus = own_position, minus = own_position;
    plus[j] += step;
    minus[j] -= step;
    const Vec3 zp = ecef_to_measurement(plus, att, sat_position);
    const Vec3 zm = ecef_to_measurement(minus, att, sat_position);
    h(0, j) = wrap_angle(zp[0] - zm[0]) / (2.0 * step);
    h(1, j) = wrap_angle(zp[1] - zm[1]) / (2.0 * step);
    h(2, j) = (zp[2] - zm[2]) / (2.0 * step);
  }
  return h;
}

struct EkfUpdateResult {
  NavState state;
  bool rejected = false;
  double mahalanobis2 = 0.0;
};

/// Standard EKF measurement update with gating and Joseph-form
/// covariance. Angular innovations are wrapped to principal ranges.
inline EkfUpdateResult ekf_update(const NavState& state, const Measurement& meas,
                                  const Attitude& att, const Vec3& sat_position,
                                  double gate_sigma = 5.0) {
  if (meas.noise.sigma_az <= 0 || meas.noise.sigma_el <= 0 ||
      meas.noise.sigma_range <= 0)
    throw std::invalid_argument("ekf_update: non-positive noise sigma");

  const Vec3 predicted = ecef_to_measurement(state.position, att, sat_position);
  Vec3 innovation{wrap_angle(meas.az - predicted[0]),
                  wrap_angle(meas.el - predicted[1]),
                  meas.range - predicted[2]};

  const Mat36 h = numeric_jacobian(state.position, att, sat_position);
  Mat3 r = Mat3::Zero();
  r(0, 0) = meas.noise.sigma_az * meas.noise.sigma_az;
  r(1, 1) = meas.noise.sigma_el * meas.noise.sigma_el;
  r(2, 2) = meas.noise.sigma_range * meas.noise.sigma_range;

  const Mat3 s = h * state.covariance * h.transpose() + r;
  const Mat3 s_inv = s.inverse();
  const double d2 = innovation.dot(s_inv * innovation);

  EkfUpdateResult out;
  out.mahalanobis2 = d2;
  if (d2 > gate_sigma * gate_sigma * 3.0) {
    out.state = state;
    out.rejected = true;
    return out;
  }

  const Mat63 k = state.covariance * h.transpose() * s_inv;
  const Vec6 dx = k * innovation;
  NavState next = state;
  next.position += dx.head<3>();
  next.velocity += dx.tail<3>();
  const Mat6 ikh = Mat6::Identity() - k * h;
  next.covariance = symmetrize(ikh * state.covariance * ikh.transpose() +
                               k * r * k.transpose());
  out.state = next;
  return out;
}

/// Satellites inside the antenna field of regard (body frame) and above
/// the local-horizon elevation mask.
inline std::vector<int64_t> visible_satellites(
    const std::vector<SatelliteEphemeris>& ephemerides, double time,
    const Vec3& own_position, const Attitude& att, double min_elevation_rad,
    double field_of_regard_rad) {
  std::vector<int64_t> out;
  const Mat3 t_ned = ned_rotation_at(own_position);
  const Mat3 n2b = ned_to_body(att);
  for (const auto& eph : ephemerides) {
    if (time < eph.times.front() || time > eph.times.back()) continue;
    const Vec3 baseline = eph.position_at(time) - own_position;
    const Vec3 ned = t_ned * baseline;
    const double horizon_el = std::asin(-ned.z() / ned.norm());
    if (horizon_el < min_elevation_rad) continue;
    const Vec3 body = n2b * ned;
    const double az = std::atan2(body.y(), body.x());
    const double el = std::asin(-body.z() / body.norm());
    if (std::abs(az) <= field_of_regard_rad && std::abs(el) <= field_of_regard_rad)
      out.push_back(eph.sat_id);
  }
  return out;
}

struct NoSatelliteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Candidate for the satellite-selection rule: id plus line-of-sight
/// vector from the estimated own position.
struct SatCandidate {
  int64_t sat_id = 0;
  Vec3 los = Vec3::Zero();
};

/// Selection rule: maximize p^T P p / |p|^2 over the candidate
/// directions, i.e. look along the largest projected navigation
/// position uncertainty. Ties break toward the lower sat_id.
inline int64_t select_satellite(const std::vector<SatCandidate>& candidates,
                                const Mat3& position_cov) {
  if (candidates.empty())
    throw NoSatelliteError("select_satellite: no candidates");
  double best_score = -1.0;
  int64_t best_id = 0;
  bool first = true;
  for (const auto& c : candidates) {
    const double n2 = c.los.squaredNorm();
    if (n2 <= 0) continue;
    const double score = c.los.dot(position_cov * c.los) / n2;
    if (first || score > best_score ||
        (score == best_score && c.sat_id < best_id)) {
      best_score = score;
      best_id = c.sat_id;
      first = false;
    }
  }
  if (first) throw NoSatelliteError("select_satellite: degenerate candidates");
  return best_id;
}

/// One planned satellite illumination inside a navigation update
/// configuration, carrying everything the covariance forecast needs.
struct PlannedNavDwell {
  int64_t sat_id = 0;
  double time = 0.0;  // absolute execution time
  Dwell dwell;
  double predicted_snr = 0.0;
  double detection_probability = 0.0;
  MeasurementNoise noise;
  Vec3 sat_position = Vec3::Zero();  // at execution time
};

/// Expected navigation covariance at the end of the planning interval,
/// covariance-only: propagate with IMU process noise, and at each
/// planned dwell apply the Riccati measurement update with the
/// information scaled by that dwell's detection probability.
inline Mat6 forecast_covariance_after_update(
    const NavState& state, const Attitude& att,
    const std::vector<PlannedNavDwell>& config, double horizon_s,
    const ImuModel& imu) {
  if (horizon_s <= 0)
    throw std::invalid_argument("forecast_covariance_after_update: horizon <= 0");

  auto propagate_cov = [&](const Mat6& p, double dt) -> Mat6 {
    if (dt <= 0) return p;
    Mat6 f = Mat6::Identity();
    f.topRightCorner<3, 3>() = dt * Mat3::Identity();
    const double s2 = imu.accel_noise_sigma * imu.accel_noise_sigma;
    // Continuous-equivalent accumulation of the per-sample IMU noise
    // (PSD sigma^2 * ts) over the whole gap.
    const double ts = imu.dt();
    Mat6 q = Mat6::Zero();
    q.topLeftCorner<3, 3>() =
        s2 * ts * (dt * dt * dt / 3.0) * Mat3::Identity();
    q.topRightCorner<3, 3>() = s2 * ts * (dt * dt / 2.0) * Mat3::Identity();
    q.bottomLeftCorner<3, 3>() = q.topRightCorner<3, 3>();
    q.bottomRightCorner<3, 3>() = s2 * ts * dt * Mat3::Identity();
    return symmetrize(f * p * f.transpose() + q);
  };

  Mat6 p = state.covariance;
  Vec3 own = state.position;
  double t = state.time;
  std::vector<PlannedNavDwell> sorted = config;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.time < b.time; });

  for (const auto& d : sorted) {
    p = propagate_cov(p, d.time - t);
    own += state.velocity * std::max(0.0, d.time - t);
    t = std::max(t, d.time);
    if (d.detection_probability <= 0.0) continue;
    const Mat36 h = numeric_jacobian(own, att, d.sat_position);
    Mat3 r = Mat3::Zero();
    r(0, 0) = d.noise.sigma_az * d.noise.sigma_az;
    r(1, 1) = d.noise.sigma_el * d.noise.sigma_el;
    r(2, 2) = d.noise.sigma_range * d.noise.sigma_range;
    const Mat3 s = h * p * h.transpose() + r;
    const Mat63 k = p * h.transpose() * s.inverse();
    p = symmetrize(p - d.detection_probability * k * s * k.transpose());
  }
  p = propagate_cov(p, state.time + horizon_s - t);
  return p;
}

}  // namespace radnav
