#pragma once

#include <cmath>
#include <stdexcept>

#include "radnav/types.hpp"

namespace radnav {

namespace wgs84 {
inline constexpr double kSemiMajor = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
inline constexpr double kSemiMinor = kSemiMajor * (1.0 - kFlattening);
inline constexpr double kEcc2 = kFlattening * (2.0 - kFlattening);
}  // namespace wgs84

struct Geodetic {
  double lat = 0.0;     // rad
  double lon = 0.0;     // rad
  double height = 0.0;  // m above the ellipsoid
};

/// Meridian radius of curvature M(lat).
inline double meridian_radius(double lat) {
  const double s = std::sin(lat);
  const double w2 = 1.0 - wgs84::kEcc2 * s * s;
  return wgs84::kSemiMajor * (1.0 - wgs84::kEcc2) / (w2 * std::sqrt(w2));
}

/// Prime-vertical radius of curvature N(lat).
inline double prime_vertical_radius(double lat) {
  const double s = std::sin(lat);
  return wgs84::kSemiMajor / std::sqrt(1.0 - wgs84::kEcc2 * s * s);
}

inline Vec3 geodetic_to_ecef(const Geodetic& g) {
  const double n = prime_vertical_radius(g.lat);
  const double clat = std::cos(g.lat), slat = std::sin(g.lat);
  return {(n + g.height) * clat * std::cos(g.lon),
          (n + g.height) * clat * std::sin(g.lon),
          (n * (1.0 - wgs84::kEcc2) + g.height) * slat};
}

/// ECEF -> geodetic by Bowring's iteration; converges to sub-micrometer
/// height accuracy in a handful of steps for aircraft/LEO geometries.
inline Geodetic ecef_to_geodetic(const Vec3& p) {
  using namespace wgs84;
  const double rho = std::hypot(p.x(), p.y());
  Geodetic g;
  g.lon = std::atan2(p.y(), p.x());
  if (rho < 1e-9) {  // polar axis
    g.lat = (p.z() >= 0.0) ? 0.5 * 3.14159265358979323846
                           : -0.5 * 3.14159265358979323846;
    g.height = std::abs(p.z()) - kSemiMinor;
    return g;
  }
  double lat = std::atan2(p.z(), rho * (1.0 - kEcc2));
  for (int i = 0; i < 8; ++i) {
    const double n = prime_vertical_radius(lat);
    const double h = rho / std::cos(lat) - n;
    const double next =
        std::atan2(p.z(), rho * (1.0 - kEcc2 * n / (n + h)));
    if (std::abs(next - lat) < 1e-14) {
      lat = next;
      break;
    }
    lat = next;
  }
  g.lat = lat;
  g.height = rho / std::cos(lat) - prime_vertical_radius(lat);
  return g;
}

/// Rotation taking ECEF vectors into the local north-east-down frame at
/// the given geodetic latitude/longitude.
inline Mat3 ned_rotation(double lat, double lon) {
  const double sf = std::sin(lat), cf = std::cos(lat);
  const double sl = std::sin(lon), cl = std::cos(lon);
  Mat3 r;
  r << -sf * cl, -sf * sl, cf,
       -sl,       cl,      0.0,
       -cf * cl, -cf * sl, -sf;
  return r;
}

inline Mat3 ned_rotation_at(const Vec3& ecef) {
  const Geodetic g = ecef_to_geodetic(ecef);
  return ned_rotation(g.lat, g.lon);
}

/// NED-referenced vehicle/antenna orientation, yaw-pitch-roll (z-y'-x'').
struct Attitude {
  double yaw = 0.0;    // rad, 0 = north, positive toward east
  double pitch = 0.0;  // rad
  double roll = 0.0;   // rad
};

/// Body -> NED direction cosine matrix.
inline Mat3 body_to_ned(const Attitude& att) {
  const double cy = std::cos(att.yaw), sy = std::sin(att.yaw);
  const double cp = std::cos(att.pitch), sp = std::sin(att.pitch);
  const double cr = std::cos(att.roll), sr = std::sin(att.roll);
  Mat3 rz, ry, rx;
  rz << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
  ry << cp, 0, sp, 0, 1, 0, -sp, 0, cp;
  rx << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
  return rz * ry * rx;
}

inline Mat3 ned_to_body(const Attitude& att) {
  return body_to_ned(att).transpose();
}

}  // namespace radnav
