#pragma once

#include <Eigen/Dense>

namespace radnav {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

namespace constants {
inline constexpr double kSpeedOfLight = 299792458.0;        // m/s
inline constexpr double kBoltzmann = 1.380649e-23;          // J/K
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEarthMu = 3.986004418e14;          // m^3/s^2
inline constexpr double kEarthRotationRate = 7.2921159e-5;  // rad/s
}  // namespace constants

inline double deg2rad(double deg) { return deg * constants::kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / constants::kPi; }

inline double db2lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin2db(double lin) { return 10.0 * std::log10(lin); }

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  using constants::kPi;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

/// Force exact symmetry on a covariance matrix (guards against drift
/// accumulated through repeated propagate/update cycles).
template <typename Derived>
inline auto symmetrize(const Eigen::MatrixBase<Derived>& m) {
  return ((m + m.transpose()) * 0.5).eval();
}

/// Cholesky-based SPD check.
inline bool is_spd(const MatX& m, double /*tol*/ = 0.0) {
  if (m.rows() != m.cols()) return false;
  Eigen::LLT<MatX> llt(symmetrize(m));
  return llt.info() == Eigen::Success;
}

}  // namespace radnav
