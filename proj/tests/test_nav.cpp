#include "radnav/nav.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "radnav/rng.hpp"
#include "test_util.hpp"

using namespace radnav;

namespace {

Vec3 own_at(double lat_deg = 47, double lon_deg = 11, double h = 1830) {
  return geodetic_to_ecef({deg2rad(lat_deg), deg2rad(lon_deg), h});
}

/// Place a point at the given NED offset from the own position.
Vec3 ned_offset(const Vec3& own, const Vec3& ned) {
  return own + ned_rotation_at(own).transpose() * ned;
}

SatelliteEphemeris static_sat(int64_t id, const Vec3& pos, double t0 = 0,
                              double t1 = 1e4) {
  SatelliteEphemeris e;
  e.sat_id = id;
  e.times = {t0, t1};
  e.positions = {pos, pos};
  return e;
}

MeasurementNoise nominal_noise() { return {2.07e-3, 2.07e-3, 1.0063}; }

}  // namespace

TEST(ImuPropagate, BallisticCoast) {
  NavState s;
  s.position = Vec3(1, 2, 3);
  s.velocity = Vec3(10, -5, 0);
  const ImuModel imu{0.0, 100.0};
  const NavState out = imu_propagate(s, Vec3::Zero(), 2.0, imu);
  EXPECT_NEAR((out.position - Vec3(21, -8, 3)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((out.velocity - s.velocity).norm(), 0.0, 1e-12);
}

TEST(ImuPropagate, ConstantAcceleration) {
  NavState s;
  const NavState out = imu_propagate(s, Vec3(1, 0, 0), 2.0, ImuModel{});
  EXPECT_NEAR(out.position.x(), 2.0, 1e-12);
  EXPECT_NEAR(out.velocity.x(), 2.0, 1e-12);
}

TEST(ImuPropagate, CovarianceTraceGrows) {
  NavState s;
  s.covariance = Mat6::Identity();
  double prev = s.covariance.trace();
  const ImuModel imu{0.02, 100.0};
  for (int i = 0; i < 100; ++i) {
    s = imu_propagate(s, Vec3::Zero(), imu.dt(), imu);
    EXPECT_GT(s.covariance.trace(), prev);
    prev = s.covariance.trace();
  }
}

TEST(EcefToMeasurement, SatelliteDueNorth) {
  const Vec3 own = own_at();
  const Vec3 sat = ned_offset(own, Vec3(1000, 0, 0));
  const Vec3 z = ecef_to_measurement(own, Attitude{}, sat);
  EXPECT_NEAR(z[0], 0.0, 1e-12);
  EXPECT_NEAR(z[1], 0.0, 1e-12);
  EXPECT_NEAR(z[2], 1000.0, 1e-9);
}

TEST(EcefToMeasurement, SatelliteStraightUp) {
  const Vec3 own = own_at();
  const Vec3 sat = ned_offset(own, Vec3(0, 0, -1000));
  const Vec3 z = ecef_to_measurement(own, Attitude{}, sat);
  EXPECT_NEAR(z[1], deg2rad(90), 1e-9);
  EXPECT_NEAR(z[2], 1000.0, 1e-9);
}

TEST(EcefToMeasurement, YawRotatesAzimuth) {
  const Vec3 own = own_at();
  const Vec3 sat = ned_offset(own, Vec3(1000, 0, 0));
  const Vec3 z = ecef_to_measurement(own, Attitude{deg2rad(90), 0, 0}, sat);
  EXPECT_NEAR(z[0], deg2rad(-90), 1e-12);
  EXPECT_NEAR(z[1], 0.0, 1e-12);
}

TEST(EcefToMeasurement, ZeroBaselineRejected) {
  const Vec3 own = own_at();
  EXPECT_THROW(ecef_to_measurement(own, Attitude{}, own), std::invalid_argument);
}

TEST(MeasurementInverse, RoundTripsAtLongRange) {
  Rng rng(77);
  for (int i = 0; i < 300; ++i) {
    const Vec3 own = own_at(rng.uniform(-60, 60), rng.uniform(-170, 170),
                            rng.uniform(0, 12000));
    const Attitude att{rng.uniform(-3, 3), rng.uniform(-0.5, 0.5),
                       rng.uniform(-0.6, 0.6)};
    const double range = rng.uniform(1e3, 1e7);
    const Vec3 dir =
        Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()).normalized();
    const Vec3 sat = own + range * dir;
    const Vec3 z = ecef_to_measurement(own, att, sat);
    const Vec3 back = measurement_to_ecef(own, att, z[0], z[1], z[2]);
    EXPECT_LT((back - sat).norm(), 1e-6);
  }
}

TEST(NumericJacobian, RangeRowIsNegativeUnitLos) {
  const Vec3 own = own_at();
  const Vec3 sat = ned_offset(own, Vec3(5e5, 2e5, -8e5));
  const Mat36 h = numeric_jacobian(own, Attitude{0.3, 0.05, -0.1}, sat);
  const Vec3 los = (sat - own).normalized();
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(h(2, j), -los[j], 1e-6);
  EXPECT_NEAR(h.rightCols<3>().norm(), 0.0, 0.0);
}

TEST(NumericJacobian, MatchesSymbolicOracle) {
  Rng rng(123);
  for (int i = 0; i < 100; ++i) {
    const Vec3 own = own_at(rng.uniform(-60, 60), rng.uniform(-170, 170),
                            rng.uniform(0, 15000));
    const Attitude att{rng.uniform(-3, 3), rng.uniform(-0.4, 0.4),
                       rng.uniform(-0.5, 0.5)};
    // Keep a margin from the zenith singularity of the spherical frame.
    Vec3 ned(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1.2, -0.05));
    if (ned.head<2>().norm() < 0.3) ned.x() += 0.5;
    const Vec3 sat = ned_offset(own, ned.normalized() * rng.uniform(4e5, 2.5e6));
    const Mat36 num = numeric_jacobian(own, att, sat);
    const Mat36 sym = testutil::symbolic_measurement_jacobian(own, att, sat);
    EXPECT_LT((num - sym).norm() / sym.norm(), 1e-5)
        << "geometry " << i << "\nnum\n" << num << "\nsym\n" << sym;
  }
}

TEST(NumericJacobian, SelfConsistentAcrossStepSizes) {
  // Central differences at a 10x smaller step agree to 1e-4 relative.
  const Vec3 own = own_at();
  const Attitude att{0.7, 0.1, -0.2};
  const Vec3 sat = ned_offset(own, Vec3(8e5, -3e5, -9e5));
  const Mat36 coarse = numeric_jacobian(own, att, sat);
  Mat36 fine = Mat36::Zero();
  const double step = std::max(1e-3, 1e-8 * own.norm()) / 10.0;
  for (int j = 0; j < 3; ++j) {
    Vec3 plus = own, minus = own;
    plus[j] += step;
    minus[j] -= step;
    const Vec3 zp = ecef_to_measurement(plus, att, sat);
    const Vec3 zm = ecef_to_measurement(minus, att, sat);
    for (int r = 0; r < 3; ++r)
      fine(r, j) = (r < 2 ? wrap_angle(zp[r] - zm[r]) : zp[r] - zm[r]) /
                   (2.0 * step);
  }
  EXPECT_LT((coarse - fine).norm() / fine.norm(), 1e-4);
}

TEST(EkfUpdate, HugeNoiseLeavesStateAlone) {
  const Vec3 own = own_at();
  NavState s;
  s.position = own;
  s.covariance = Mat6::Identity() * 100.0;
  const Vec3 sat = ned_offset(own, Vec3(1e6, 2e5, -8e5));
  const Vec3 z = ecef_to_measurement(own, Attitude{}, sat);
  Measurement m{z[0], z[1], z[2], {1e6, 1e6, 1e12}};
  const auto out = ekf_update(s, m, Attitude{}, sat);
  EXPECT_FALSE(out.rejected);
  EXPECT_LT((out.state.position - s.position).norm(), 1e-6);
  EXPECT_LT((out.state.covariance - s.covariance).norm(), 1e-3);
}

TEST(EkfUpdate, PosteriorSpdAndTraceShrinks) {
  const Vec3 own = own_at();
  NavState s;
  s.position = own;
  s.covariance = Mat6::Identity() * 1e4;
  s.covariance.bottomRightCorner<3, 3>() = Mat3::Identity() * 100.0;
  const Vec3 sat = ned_offset(own, Vec3(1e6, 2e5, -8e5));
  const Vec3 z = ecef_to_measurement(own, Attitude{}, sat);
  Measurement m{z[0], z[1], z[2], nominal_noise()};
  const auto out = ekf_update(s, m, Attitude{}, sat);
  EXPECT_TRUE(is_spd(out.state.covariance));
  EXPECT_LT(out.state.covariance.trace(), s.covariance.trace());
}

TEST(EkfUpdate, LineOfSightVarianceCollapses) {
  // Monte-Carlo over seeded trials: with an exact range-quality
  // measurement the posterior error along the line of sight drops
  // below 3 sigma_range.
  Rng rng(2025);
  const Vec3 own_true = own_at();
  const Vec3 sat = ned_offset(own_true, Vec3(7e5, 1e5, -7e5));
  const Vec3 los = (sat - own_true).normalized();
  int ok = 0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    NavState s;
    s.position = own_true + Vec3(rng.gaussian(0, 100), rng.gaussian(0, 100),
                                 rng.gaussian(0, 100));
    s.covariance = Mat6::Identity() * 1e4;
    s.covariance.bottomRightCorner<3, 3>() = Mat3::Identity() * 100.0;
    const Vec3 z = ecef_to_measurement(own_true, Attitude{}, sat);
    Measurement m{z[0], z[1], z[2], {1e-4, 1e-4, 0.1}};
    const auto out = ekf_update(s, m, Attitude{}, sat, 1e9);
    const double along = std::abs((out.state.position - own_true).dot(los));
    if (along < 3 * 0.1) ++ok;
  }
  EXPECT_GT(ok, trials * 0.95);
}

TEST(EkfUpdate, GateRejectsGrossOutlier) {
  const Vec3 own = own_at();
  NavState s;
  s.position = own;
  s.covariance = Mat6::Identity();
  const Vec3 sat = ned_offset(own, Vec3(1e6, 0, -5e5));
  const Vec3 z = ecef_to_measurement(own, Attitude{}, sat);
  Measurement m{z[0], z[1], z[2] + 1e5, nominal_noise()};
  const auto out = ekf_update(s, m, Attitude{}, sat);
  EXPECT_TRUE(out.rejected);
  EXPECT_LT((out.state.position - s.position).norm(), 1e-12);
}

TEST(CovarianceStaysSpd, RandomOperationSequences) {
  Rng rng(9);
  const Vec3 own0 = own_at();
  for (int trial = 0; trial < 20; ++trial) {
    NavState s;
    s.position = own0;
    s.velocity = Vec3(100, 10, 0);
    s.covariance = Mat6::Identity() * 1e4;
    const ImuModel imu{0.02, 100.0};
    for (int step = 0; step < 200; ++step) {
      if (rng.uniform() < 0.8) {
        s = imu_propagate(
            s, Vec3(rng.gaussian(0, 1), rng.gaussian(0, 1), rng.gaussian(0, 1)),
            rng.uniform(0.001, 0.5), imu);
      } else {
        const Vec3 ned(rng.uniform(-1, 1), rng.uniform(-1, 1),
                       rng.uniform(-1.5, -0.2));
        const Vec3 sat =
            ned_offset(s.position, ned.normalized() * rng.uniform(5e5, 2e6));
        const Vec3 z = ecef_to_measurement(s.position, Attitude{}, sat);
        Measurement m{z[0] + rng.gaussian(0, 2e-3), z[1] + rng.gaussian(0, 2e-3),
                      z[2] + rng.gaussian(0, 1.0), nominal_noise()};
        s = ekf_update(s, m, Attitude{}, sat).state;
      }
      ASSERT_TRUE(is_spd(s.covariance)) << "trial " << trial << " step " << step;
    }
  }
}

TEST(VisibleSatellites, EmptyAndDirectional) {
  const Vec3 own = own_at();
  const Attitude att{};  // nose pointing north
  EXPECT_TRUE(visible_satellites({}, 0, own, att, deg2rad(10), deg2rad(60)).empty());

  std::vector<SatelliteEphemeris> eph;
  eph.push_back(static_sat(1, ned_offset(own, Vec3(7e5, 0, -5e5))));   // ahead
  eph.push_back(static_sat(2, ned_offset(own, Vec3(-7e5, 0, -5e5))));  // behind
  eph.push_back(static_sat(3, ned_offset(own, Vec3(7e5, 0, -2e4))));   // low el
  const auto vis = visible_satellites(eph, 100, own, att, deg2rad(10), deg2rad(60));
  ASSERT_EQ(vis.size(), 1u);
  EXPECT_EQ(vis[0], 1);
}

TEST(SelectSatellite, EigenDirectionAndTies) {
  Mat3 p = Vec3(100, 1, 1).asDiagonal();
  std::vector<SatCandidate> cands{{1, Vec3(1, 0, 0)}, {2, Vec3(0, 0, 1)}};
  EXPECT_EQ(select_satellite(cands, p), 1);
  // Identity covariance scores every direction equally: lowest id wins.
  std::vector<SatCandidate> tie{{5, Vec3(0, 1, 0)}, {3, Vec3(1, 0, 0)}};
  EXPECT_EQ(select_satellite(tie, Mat3::Identity()), 3);
  EXPECT_THROW(select_satellite({}, Mat3::Identity()), NoSatelliteError);
}

TEST(SelectSatellite, MatchesBruteForceAndScaleInvariant) {
  Rng rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Matrix3d a;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = rng.gaussian();
    const Mat3 p = a * a.transpose() + 0.1 * Mat3::Identity();
    std::vector<SatCandidate> cands;
    for (int i = 0; i < 10; ++i)
      cands.push_back(
          {i, Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()) * 1e6});
    const int64_t picked = select_satellite(cands, p);
    double best = -1;
    int64_t best_id = -1;
    for (const auto& c : cands) {
      const double score = c.los.dot(p * c.los) / c.los.squaredNorm();
      if (score > best) {
        best = score;
        best_id = c.sat_id;
      }
    }
    EXPECT_EQ(picked, best_id);

    auto scaled = cands;
    scaled[picked].los *= rng.uniform(0.1, 50.0);
    EXPECT_EQ(select_satellite(scaled, p), picked);
  }
}

TEST(ForecastCovariance, EmptyConfigGrowsDeterminant) {
  NavState s;
  s.position = own_at();
  s.covariance = Mat6::Identity() * 100.0;
  const ImuModel imu{0.02, 100.0};
  const Mat6 p = forecast_covariance_after_update(s, Attitude{}, {}, 10.0, imu);
  EXPECT_GT(p.determinant(), s.covariance.determinant());
  EXPECT_TRUE(is_spd(p));
}

TEST(ForecastCovariance, PerfectDwellCollapsesLineOfSight) {
  NavState s;
  s.position = own_at();
  s.covariance = Mat6::Identity() * 1e4;
  s.covariance.bottomRightCorner<3, 3>() = Mat3::Identity() * 1.0;
  const ImuModel imu{0.0, 100.0};
  const Vec3 sat = ned_offset(s.position, Vec3(7e5, 0, -7e5));
  PlannedNavDwell d;
  d.sat_id = 1;
  d.time = 0.0;
  d.detection_probability = 1.0;
  d.noise = {1e-5, 1e-5, 0.05};
  d.sat_position = sat;
  const Mat6 p =
      forecast_covariance_after_update(s, Attitude{}, {d}, 1e-6, imu);
  const Vec3 los = (sat - s.position).normalized();
  const double along = los.dot(p.topLeftCorner<3, 3>() * los);
  EXPECT_LT(along, 0.05 * 0.05 * 10);
  // Single-step Riccati identity on the range direction: the posterior
  // variance along the LOS approaches r / (1 + r / prior).
  const double prior = 1e4;
  const double expect = 1.0 / (1.0 / prior + 1.0 / (0.05 * 0.05));
  EXPECT_NEAR(along, expect, expect * 0.2);
}

TEST(ForecastCovariance, ZeroPdEqualsEmptyConfig) {
  NavState s;
  s.position = own_at();
  s.covariance = Mat6::Identity() * 400.0;
  const ImuModel imu{0.02, 100.0};
  PlannedNavDwell d;
  d.time = 5.0;
  d.detection_probability = 0.0;
  d.noise = nominal_noise();
  d.sat_position = ned_offset(s.position, Vec3(1e6, 0, -5e5));
  const Mat6 with = forecast_covariance_after_update(s, Attitude{}, {d}, 10.0, imu);
  const Mat6 without = forecast_covariance_after_update(s, Attitude{}, {}, 10.0, imu);
  EXPECT_LT((with - without).norm(), 1e-9);
}

TEST(FilterConsistency, NeesWithinChiSquareEnvelope) {
  // Straight-leg Monte Carlo with regular 3-satellite updates. The
  // per-epoch NEES averaged over runs must sit inside the 95 %
  // chi-square envelope at nearly all checkpoints.
  const int n_runs = 30;
  const double duration = 120.0;
  const ImuModel imu{0.02, 100.0};
  const Vec3 p0 = own_at();
  const Mat3 e2n = ned_rotation_at(p0);
  const Vec3 vel = e2n.transpose() * Vec3(0, 113.0, 0);

  std::vector<Vec3> sats = {ned_offset(p0, Vec3(9e5, 1e5, -6e5)),
                            ned_offset(p0, Vec3(3e5, 8e5, -7e5)),
                            ned_offset(p0, Vec3(6e5, -5e5, -9e5))};

  const int n_epochs = 12;
  std::vector<double> nees_sum(n_epochs, 0.0);

  for (int run = 0; run < n_runs; ++run) {
    Rng noise_rng(901, "nav-noise", run);
    Rng meas_rng(901, "meas", run);
    Rng init_rng(901, "init", run);

    Vec3 true_pos = p0;
    NavState est;
    est.position = p0 + Vec3(init_rng.gaussian(0, 100), init_rng.gaussian(0, 100),
                             init_rng.gaussian(0, 100));
    est.velocity = vel + Vec3(init_rng.gaussian(0, 10), init_rng.gaussian(0, 10),
                              init_rng.gaussian(0, 10));
    est.covariance = Mat6::Zero();
    est.covariance.topLeftCorner<3, 3>() = Mat3::Identity() * 1e4;
    est.covariance.bottomRightCorner<3, 3>() = Mat3::Identity() * 100.0;

    int epoch = 0;
    const double dt = imu.dt();
    const int n_steps = static_cast<int>(duration / dt);
    for (int k = 0; k < n_steps; ++k) {
      const Vec3 noise(noise_rng.gaussian(0, imu.accel_noise_sigma),
                       noise_rng.gaussian(0, imu.accel_noise_sigma),
                       noise_rng.gaussian(0, imu.accel_noise_sigma));
      est = imu_propagate(est, noise, dt, imu);  // true accel is zero
      true_pos += vel * dt;
      const double t = (k + 1) * dt;
      if (std::fmod(t, 10.0) < dt * 0.5 && epoch < n_epochs) {
        for (const auto& sat : sats) {
          const Vec3 z = ecef_to_measurement(true_pos, Attitude{}, sat);
          MeasurementNoise mn = nominal_noise();
          Measurement m{z[0] + meas_rng.gaussian(0, mn.sigma_az),
                        z[1] + meas_rng.gaussian(0, mn.sigma_el),
                        z[2] + meas_rng.gaussian(0, mn.sigma_range), mn};
          est = ekf_update(est, m, Attitude{}, sat).state;
        }
        Vec6 err;
        err.head<3>() = est.position - true_pos;
        err.tail<3>() = est.velocity - vel;
        nees_sum[epoch] += err.dot(est.covariance.llt().solve(err));
        ++epoch;
      }
    }
  }

  const double lo = testutil::chi2_quantile(0.025, 6.0 * n_runs) / n_runs;
  const double hi = testutil::chi2_quantile(0.975, 6.0 * n_runs) / n_runs;
  int inside = 0;
  double total = 0.0;
  for (int e = 0; e < n_epochs; ++e) {
    const double nees = nees_sum[e] / n_runs;
    total += nees;
    if (nees >= lo && nees <= hi) ++inside;
  }
  EXPECT_GE(inside, n_epochs - 1)
      << "envelope [" << lo << ", " << hi << "]";
  const double avg = total / n_epochs;
  EXPECT_GT(avg, lo);
  EXPECT_LT(avg, hi);
}
