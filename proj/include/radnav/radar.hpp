#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "radnav/rng.hpp"
#include "radnav/types.hpp"

namespace radnav {

/// Phased-array radar description. Defaults follow the nose-radar data
/// set used throughout the simulation: 10 GHz, 10 kW peak, 60x60
/// elements at half-wavelength spacing, 590 us max pulse at 10 % duty,
/// 86 MHz bandwidth, 42 dB broadside gain, 330 K / noise factor 2,
/// additional losses 0.5 (linear).
struct RadarParams {
  double frequency_hz = 10e9;
  double peak_power_w = 10e3;
  int elements_az = 60;
  int elements_el = 60;
  double element_spacing_az_m = 0.5 * constants::kSpeedOfLight / 10e9;
  double element_spacing_el_m = 0.5 * constants::kSpeedOfLight / 10e9;
  double max_pulse_duration_s = 590e-6;
  double duty_cycle = 0.10;
  double bandwidth_hz = 86e6;
  double broadside_gain = 15848.93192461113;  // 42 dB
  double noise_temperature_k = 330.0;
  double noise_factor = 2.0;
  double system_losses = 0.5;  // linear multiplier in the numerator
  double air_loss = 1.0;       // linear, >= 1 means attenuation
  double false_alarm_probability = 1e-6;
  double field_of_regard_rad = deg2rad(60.0);  // +/- limit per axis
  double max_dwell_timeline_s = 5.0;

  double wavelength_m() const { return constants::kSpeedOfLight / frequency_hz; }

  void validate() const {
    if (frequency_hz <= 0 || peak_power_w <= 0 || elements_az < 1 ||
        elements_el < 1 || element_spacing_az_m <= 0 ||
        element_spacing_el_m <= 0 || max_pulse_duration_s <= 0 ||
        bandwidth_hz <= 0 || broadside_gain <= 0 || noise_temperature_k <= 0 ||
        noise_factor <= 0 || system_losses <= 0 || air_loss <= 0)
      throw std::invalid_argument("RadarParams: non-positive parameter");
    if (duty_cycle <= 0 || duty_cycle > 1)
      throw std::invalid_argument("RadarParams: duty cycle outside (0,1]");
    if (false_alarm_probability <= 0 || false_alarm_probability >= 1)
      throw std::invalid_argument("RadarParams: Pfa outside (0,1)");
  }
};

enum class DwellPurpose { kSearch, kTrack, kNav };

/// One radar beam task instance: steering direction (boresight-relative
/// body angles) plus transmit time. Timeline cost is the antenna
/// occupancy, transmit time divided by the duty cycle.
struct Dwell {
  double steer_az = 0.0;  // rad
  double steer_el = 0.0;  // rad
  double transmit_time_s = 0.0;
  double timeline_cost_s = 0.0;
  DwellPurpose purpose = DwellPurpose::kSearch;
};

struct MeasurementNoise {
  double sigma_az = 0.0;     // rad
  double sigma_el = 0.0;     // rad
  double sigma_range = 0.0;  // m
};

struct Measurement {
  double az = 0.0;     // rad, body frame
  double el = 0.0;     // rad
  double range = 0.0;  // m
  MeasurementNoise noise;
};

/// Normalized one-dimensional array power pattern. Angles follow the
/// cosine-space convention (measured from the array axis, broadside at
/// pi/2). Unity at eval == steer; the classic sin(N psi/2)/(N sin(psi/2))
/// lobes elsewhere.
inline double array_factor(double eval_angle, double steer_angle,
                           int n_elements, double spacing_m,
                           double wavelength_m) {
  if (n_elements < 1) throw std::invalid_argument("array_factor: n_elements < 1");
  if (spacing_m <= 0 || wavelength_m <= 0)
    throw std::invalid_argument("array_factor: non-positive geometry");
  if (n_elements == 1) return 1.0;
  const double psi = 2.0 * constants::kPi * spacing_m / wavelength_m *
                     (std::cos(eval_angle) - std::cos(steer_angle));
  const double half = 0.5 * psi;
  const double denom = n_elements * std::sin(half);
  if (std::abs(denom) < 1e-12) {
    // coherent limit (includes eval == steer and grating directions)
    return 1.0;
  }
  const double ratio = std::sin(n_elements * half) / denom;
  return ratio * ratio;
}

/// Two-axis steered gain: G_bs * AF_az * AF_el. Angles here are
/// boresight-relative (0 = array normal); they map onto the cosine-space
/// convention by a 90 degree offset.
inline double gain(const RadarParams& p, double eval_az, double steer_az,
                   double eval_el, double steer_el) {
  const double h = 0.5 * constants::kPi;
  const double af_az = array_factor(h + eval_az, h + steer_az, p.elements_az,
                                    p.element_spacing_az_m, p.wavelength_m());
  const double af_el = array_factor(h + eval_el, h + steer_el, p.elements_el,
                                    p.element_spacing_el_m, p.wavelength_m());
  return p.broadside_gain * af_az * af_el;
}

/// Radar-equation SNR after matched-filter integration over the dwell's
/// transmit time, evaluated at the dwell's own steering direction:
///   SNR = P G^2 tau lambda^2 L rcs / ((4 pi)^3 R^4 k T n_f L_air)
inline double snr(const RadarParams& p, const Dwell& dwell, double range_m,
                  double rcs_m2) {
  if (range_m <= 0) throw std::invalid_argument("snr: range <= 0");
  if (rcs_m2 <= 0) throw std::invalid_argument("snr: rcs <= 0");
  if (dwell.transmit_time_s <= 0)
    throw std::invalid_argument("snr: transmit time <= 0");
  const double g =
      gain(p, dwell.steer_az, dwell.steer_az, dwell.steer_el, dwell.steer_el);
  const double lam = p.wavelength_m();
  const double num = p.peak_power_w * g * g * dwell.transmit_time_s * lam *
                     lam * p.system_losses * rcs_m2;
  const double four_pi = 4.0 * constants::kPi;
  const double den = four_pi * four_pi * four_pi * range_m * range_m *
                     range_m * range_m * constants::kBoltzmann *
                     p.noise_temperature_k * p.noise_factor * p.air_loss;
  return num / den;
}

/// SNR with the beam evaluated off its steering direction (pattern loss
/// applied); used when synthesizing detections against true geometry.
inline double snr_offset(const RadarParams& p, const Dwell& dwell,
                         double eval_az, double eval_el, double range_m,
                         double rcs_m2) {
  const double on_axis = snr(p, dwell, range_m, rcs_m2);
  const double g_on =
      gain(p, dwell.steer_az, dwell.steer_az, dwell.steer_el, dwell.steer_el);
  const double g_off = gain(p, eval_az, dwell.steer_az, eval_el, dwell.steer_el);
  const double ratio = g_off / g_on;
  return on_axis * ratio * ratio;  // two-way pattern
}

struct DwellInfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Minimal dwell reaching the target SNR at the given geometry,
/// quantized up to whole pulses of at most max_pulse_duration each.
/// Returns nullopt when the required antenna occupancy exceeds the
/// timeline cap (satellite too far or too small).
inline std::optional<Dwell> try_dwell_for_target_snr(
    const RadarParams& p, double steer_az, double steer_el, double range_m,
    double rcs_m2, double target_snr) {
  if (target_snr <= 0)
    throw std::invalid_argument("dwell_for_target_snr: target <= 0");
  Dwell probe{steer_az, steer_el, p.max_pulse_duration_s,
              p.max_pulse_duration_s / p.duty_cycle, DwellPurpose::kTrack};
  const double single_pulse = snr(p, probe, range_m, rcs_m2);
  const double pulses_exact = target_snr / single_pulse;
  // Reject before quantizing; extreme ranges ask for astronomical counts.
  if (pulses_exact * p.max_pulse_duration_s / p.duty_cycle >
      p.max_dwell_timeline_s * (1.0 + 1e-9) + p.max_pulse_duration_s / p.duty_cycle)
    return std::nullopt;
  const int n_pulses = std::max(1, static_cast<int>(std::ceil(pulses_exact - 1e-9)));
  Dwell d = probe;
  d.transmit_time_s = n_pulses * p.max_pulse_duration_s;
  d.timeline_cost_s = d.transmit_time_s / p.duty_cycle;
  if (d.timeline_cost_s > p.max_dwell_timeline_s + 1e-12) return std::nullopt;
  return d;
}

inline Dwell dwell_for_target_snr(const RadarParams& p, double steer_az,
                                  double steer_el, double range_m,
                                  double rcs_m2, double target_snr) {
  auto d = try_dwell_for_target_snr(p, steer_az, steer_el, range_m, rcs_m2,
                                    target_snr);
  if (!d)
    throw DwellInfeasibleError(
        "dwell_for_target_snr: required occupancy exceeds the timeline cap");
  return *d;
}

/// Monopulse-style angular accuracy: sigma = 0.628 * beamwidth / (2 sqrt(SNR)).
inline double angular_sigma(double beamwidth_rad, double snr_linear) {
  if (snr_linear <= 0) throw std::invalid_argument("angular_sigma: snr <= 0");
  return 0.628 * beamwidth_rad / (2.0 * std::sqrt(snr_linear));
}

/// Range accuracy from the waveform bandwidth: sigma_r = c / (sqrt(12) B).
inline double range_sigma(const RadarParams& p) {
  if (p.bandwidth_hz <= 0) throw std::invalid_argument("range_sigma: B <= 0");
  return constants::kSpeedOfLight / (std::sqrt(12.0) * p.bandwidth_hz);
}

/// Broadside 3 dB beamwidth per axis.
inline double beamwidth_az(const RadarParams& p) {
  return 0.886 * p.wavelength_m() / (p.elements_az * p.element_spacing_az_m);
}
inline double beamwidth_el(const RadarParams& p) {
  return 0.886 * p.wavelength_m() / (p.elements_el * p.element_spacing_el_m);
}

/// Scan-broadened beamwidth at a steering offset from broadside.
inline double steered_beamwidth(double broadside_bw, double steer_offset_rad) {
  const double c = std::max(0.5, std::cos(steer_offset_rad));
  return broadside_bw / c;
}

namespace detail {

/// Albersheim's single-pulse nonfluctuating requirement (dB) for a given
/// detection probability / false-alarm pair. Undefined (−inf) where the
/// log argument closes at very low Pd.
inline double albersheim_required_snr_db(double pd, double pfa) {
  const double a = std::log(0.62 / pfa);
  const double b = std::log(pd / (1.0 - pd));
  const double arg = a + 0.12 * a * b + 1.7 * b;
  if (arg <= 0.0) return -std::numeric_limits<double>::infinity();
  // N = 1: -5 log10(1) + (6.2 + 4.54 / sqrt(1.44)) log10(arg)
  return (6.2 + 4.54 / std::sqrt(1.44)) * std::log10(arg);
}

}  // namespace detail

/// Detection probability versus linear SNR, numeric inversion of
/// Albersheim's approximation. Below the approximation's validity floor
/// the curve bridges linearly (in linear SNR) down to the noise-only
/// limit Pd(0) = Pfa.
inline double detection_probability(double snr_linear, double pfa) {
  if (pfa <= 0.0 || pfa >= 1.0)
    throw std::invalid_argument("detection_probability: pfa outside (0,1)");
  if (snr_linear < 0.0)
    throw std::invalid_argument("detection_probability: snr < 0");
  if (snr_linear == 0.0) return pfa;

  // Lowest Pd where the approximation stays usable for this Pfa.
  const double a = std::log(0.62 / pfa);
  const double b_boundary = -a / (0.12 * a + 1.7);
  const double pd_floor =
      std::clamp(1.0 / (1.0 + std::exp(-(b_boundary + 0.5))), 0.05, 0.5);

  const double snr_db = lin2db(snr_linear);
  const double floor_db = detail::albersheim_required_snr_db(pd_floor, pfa);
  if (snr_db <= floor_db) {
    const double floor_lin = db2lin(floor_db);
    return pfa + (pd_floor - pfa) * (snr_linear / floor_lin);
  }

  double lo = pd_floor, hi = 1.0 - 1e-12;
  if (snr_db >= detail::albersheim_required_snr_db(hi, pfa)) return 1.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (detail::albersheim_required_snr_db(mid, pfa) <= snr_db)
      lo = mid;
    else
      hi = mid;
  }
  return std::clamp(0.5 * (lo + hi), 0.0, 1.0);
}

/// Spherical truth as seen from the antenna (body frame).
struct SphericalTruth {
  double az = 0.0;
  double el = 0.0;
  double range = 0.0;
};

/// Bernoulli detection draw followed by Gaussian measurement synthesis.
/// The SNR is evaluated at the true direction against the dwell's
/// steering, so mispointed beams detect less often. Angular sigmas use
/// the scan-broadened beamwidth at the dwell steering.
inline std::optional<Measurement> simulate_detection(
    Rng& rng, const RadarParams& p, const Dwell& dwell,
    const SphericalTruth& truth, double rcs_m2) {
  const double s =
      snr_offset(p, dwell, truth.az, truth.el, truth.range, rcs_m2);
  const double pd = detection_probability(s, p.false_alarm_probability);
  if (!rng.bernoulli(pd)) return std::nullopt;

  MeasurementNoise noise;
  const double snr_floor = std::max(s, 1e-9);
  noise.sigma_az = angular_sigma(
      steered_beamwidth(beamwidth_az(p), dwell.steer_az), snr_floor);
  noise.sigma_el = angular_sigma(
      steered_beamwidth(beamwidth_el(p), dwell.steer_el), snr_floor);
  noise.sigma_range = range_sigma(p);

  Measurement m;
  m.az = truth.az + noise.sigma_az * rng.gaussian();
  m.el = truth.el + noise.sigma_el * rng.gaussian();
  m.range = truth.range + noise.sigma_range * rng.gaussian();
  m.noise = noise;
  return m;
}

}  // namespace radnav
