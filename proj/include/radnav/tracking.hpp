#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "radnav/nav.hpp"
#include "radnav/radar.hpp"
#include "radnav/types.hpp"

namespace radnav {

enum class TrackStatus { kTentative, kConfirmed, kDropped };

/// Constant-velocity target track in ECEF.
struct Track {
  int64_t track_id = 0;
  int64_t target_id = 0;  // oracle association label
  double time = 0.0;
  Vec6 state = Vec6::Zero();  // position (3), velocity (3)
  Mat6 covariance = Mat6::Identity();
  double last_update = 0.0;
  TrackStatus status = TrackStatus::kTentative;
  int detections = 0;
  int opportunities = 0;  // dwell opportunities since initiation
  int consecutive_misses = 0;

  Vec3 position() const { return state.head<3>(); }
  Vec3 velocity() const { return state.tail<3>(); }
};

struct TrackTaskQuality {
  double q_track = 0.0;
  double u_track = 0.0;
};

/// CV transition with white-acceleration process noise of the given
/// intensity ((m/s^2)^2).
inline Track cv_predict(const Track& track, double dt,
                        double process_noise_intensity) {
  if (dt < 0) throw std::invalid_argument("cv_predict: dt < 0");
  Track out = track;
  if (dt == 0) return out;
  out.time = track.time + dt;
  out.state.head<3>() += dt * track.state.tail<3>();

  Mat6 f = Mat6::Identity();
  f.topRightCorner<3, 3>() = dt * Mat3::Identity();
  const double q = process_noise_intensity;
  Mat6 qm = Mat6::Zero();
  qm.topLeftCorner<3, 3>() = q * dt * dt * dt / 3.0 * Mat3::Identity();
  qm.topRightCorner<3, 3>() = q * dt * dt / 2.0 * Mat3::Identity();
  qm.bottomLeftCorner<3, 3>() = qm.topRightCorner<3, 3>();
  qm.bottomRightCorner<3, 3>() = q * dt * Mat3::Identity();
  out.covariance = symmetrize(f * track.covariance * f.transpose() + qm);
  return out;
}

/// Track quality from the 6x6 covariance (position block already
/// inflated by the navigation error where applicable):
///   q = 10 / det(P)^(1/6),  u = (1 - exp(-10 q)) / 10.
inline TrackTaskQuality track_quality(const Mat6& p_track_plus_nav) {
  Eigen::LLT<Mat6> llt(symmetrize(p_track_plus_nav));
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("track_quality: covariance not positive definite");
  // det(P)^(1/6) = (prod diag(L))^(1/3), stable for mixed-unit covariances.
  const Mat6 l = llt.matrixL();
  double det_sixth = 1.0;
  for (int i = 0; i < 6; ++i) det_sixth *= std::cbrt(l(i, i));
  TrackTaskQuality q;
  q.q_track = 10.0 / det_sixth;
  q.u_track = (1.0 - std::exp(-10.0 * q.q_track)) / 10.0;
  return q;
}

struct TrackUpdateResult {
  Track track;
  bool rejected = false;
};

/// EKF update against a body-frame radar measurement. The measurement
/// function is evaluated at the *estimated* own position; the own-position
/// uncertainty is projected through the measurement Jacobian and added to
/// the measurement covariance, which is how the self-localization error
/// couples into tracking here.
inline TrackUpdateResult ekf_track_update(const Track& track,
                                          const Measurement& meas,
                                          const NavState& own_nav,
                                          const Attitude& att,
                                          double gate_sigma = 5.0) {
  const Vec3 predicted =
      ecef_to_measurement(own_nav.position, att, track.position());
  Vec3 innovation{wrap_angle(meas.az - predicted[0]),
                  wrap_angle(meas.el - predicted[1]),
                  meas.range - predicted[2]};

  // Jacobian w.r.t. the target position: central differences on the
  // second argument of the transform.
  Mat36 h = Mat36::Zero();
  const double step = std::max(1e-3, 1e-8 * track.position().norm());
  for (int j = 0; j < 3; ++j) {
    Vec3 plus = track.position(), minus = track.position();
    plus[j] += step;
    minus[j] -= step;
    const Vec3 zp = ecef_to_measurement(own_nav.position, att, plus);
    const Vec3 zm = ecef_to_measurement(own_nav.position, att, minus);
    h(0, j) = wrap_angle(zp[0] - zm[0]) / (2.0 * step);
    h(1, j) = wrap_angle(zp[1] - zm[1]) / (2.0 * step);
    h(2, j) = (zp[2] - zm[2]) / (2.0 * step);
  }

  Mat3 r = Mat3::Zero();
  r(0, 0) = meas.noise.sigma_az * meas.noise.sigma_az;
  r(1, 1) = meas.noise.sigma_el * meas.noise.sigma_el;
  r(2, 2) = meas.noise.sigma_range * meas.noise.sigma_range;
  // Own-position uncertainty seen through the measurement geometry.
  const Mat36 h_own = numeric_jacobian(own_nav.position, att, track.position());
  r += h_own.leftCols<3>() * own_nav.position_covariance() *
       h_own.leftCols<3>().transpose();

  const Mat3 s = h * track.covariance * h.transpose() + r;
  const Mat3 s_inv = s.inverse();
  const double d2 = innovation.dot(s_inv * innovation);

  TrackUpdateResult out;
  if (d2 > gate_sigma * gate_sigma * 3.0) {
    out.track = track;
    out.rejected = true;
    return out;
  }

  const Mat63 k = track.covariance * h.transpose() * s_inv;
  Track next = track;
  next.state += k * innovation;
  const Mat6 ikh = Mat6::Identity() - k * h;
  next.covariance = symmetrize(ikh * track.covariance * ikh.transpose() +
                               k * r * k.transpose());
  next.last_update = track.time;
  out.track = next;
  return out;
}

/// Planned dwell against a track, for the covariance-only forecast.
struct PlannedTrackDwell {
  double time = 0.0;
  double detection_probability = 0.0;
  MeasurementNoise noise;
};

/// Quality of a track at the planning horizon given the planned dwells:
/// Riccati recursion with expected-information updates, then the
/// forecast navigation position covariance is added onto the position
/// block before evaluating the quality.
inline TrackTaskQuality forecast_track_quality(
    const Track& track, const NavState& own_nav, const Attitude& att,
    const std::vector<PlannedTrackDwell>& planned, double horizon_s,
    const Mat3& nav_forecast_pos_cov, double process_noise_intensity) {
  if (horizon_s <= 0)
    throw std::invalid_argument("forecast_track_quality: horizon <= 0");

  Track work = track;
  std::vector<PlannedTrackDwell> sorted = planned;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.time < b.time; });

  for (const auto& d : sorted) {
    if (d.time > work.time)
      work = cv_predict(work, d.time - work.time, process_noise_intensity);
    if (d.detection_probability <= 0.0) continue;
    Mat36 h = Mat36::Zero();
    const double step = std::max(1e-3, 1e-8 * work.position().norm());
    for (int j = 0; j < 3; ++j) {
      Vec3 plus = work.position(), minus = work.position();
      plus[j] += step;
      minus[j] -= step;
      const Vec3 zp = ecef_to_measurement(own_nav.position, att, plus);
      const Vec3 zm = ecef_to_measurement(own_nav.position, att, minus);
      h(0, j) = wrap_angle(zp[0] - zm[0]) / (2.0 * step);
      h(1, j) = wrap_angle(zp[1] - zm[1]) / (2.0 * step);
      h(2, j) = (zp[2] - zm[2]) / (2.0 * step);
    }
    Mat3 r = Mat3::Zero();
    r(0, 0) = d.noise.sigma_az * d.noise.sigma_az;
    r(1, 1) = d.noise.sigma_el * d.noise.sigma_el;
    r(2, 2) = d.noise.sigma_range * d.noise.sigma_range;
    const Mat3 s = h * work.covariance * h.transpose() + r;
    const Mat63 k = work.covariance * h.transpose() * s.inverse();
    work.covariance = symmetrize(work.covariance -
                                 d.detection_probability * k * s * k.transpose());
  }
  const double remaining = track.time + horizon_s - work.time;
  if (remaining > 0)
    work = cv_predict(work, remaining, process_noise_intensity);

  Mat6 total = work.covariance;
  total.topLeftCorner<3, 3>() += nav_forecast_pos_cov;
  return track_quality(total);
}

/// New tentative track from a search detection: position by inverting
/// the measurement at the estimated own position; position covariance
/// from the linearized transform of the measurement noise plus the
/// navigation covariance; zero velocity with a large prior.
inline Track initiate_track(const Measurement& meas, const NavState& own_nav,
                            const Attitude& att, double initial_velocity_sigma,
                            int64_t track_id, int64_t target_id, double time) {
  Track t;
  t.track_id = track_id;
  t.target_id = target_id;
  t.time = time;
  t.last_update = time;
  t.status = TrackStatus::kTentative;
  t.detections = 1;

  const Vec3 pos =
      measurement_to_ecef(own_nav.position, att, meas.az, meas.el, meas.range);
  t.state.head<3>() = pos;

  // d(ecef)/d(az, el, range) by central differences around the measurement.
  Mat3 j;
  const double daz = 1e-6, del = 1e-6, dr = 1e-3;
  j.col(0) = (measurement_to_ecef(own_nav.position, att, meas.az + daz, meas.el,
                                  meas.range) -
              measurement_to_ecef(own_nav.position, att, meas.az - daz, meas.el,
                                  meas.range)) /
             (2 * daz);
  j.col(1) = (measurement_to_ecef(own_nav.position, att, meas.az, meas.el + del,
                                  meas.range) -
              measurement_to_ecef(own_nav.position, att, meas.az, meas.el - del,
                                  meas.range)) /
             (2 * del);
  j.col(2) = (measurement_to_ecef(own_nav.position, att, meas.az, meas.el,
                                  meas.range + dr) -
              measurement_to_ecef(own_nav.position, att, meas.az, meas.el,
                                  meas.range - dr)) /
             (2 * dr);
  Mat3 r = Mat3::Zero();
  r(0, 0) = meas.noise.sigma_az * meas.noise.sigma_az;
  r(1, 1) = meas.noise.sigma_el * meas.noise.sigma_el;
  r(2, 2) = meas.noise.sigma_range * meas.noise.sigma_range;

  t.covariance.setZero();
  t.covariance.topLeftCorner<3, 3>() =
      symmetrize(j * r * j.transpose()) + own_nav.position_covariance();
  t.covariance.bottomRightCorner<3, 3>() =
      initial_velocity_sigma * initial_velocity_sigma * Mat3::Identity();
  return t;
}

}  // namespace radnav
