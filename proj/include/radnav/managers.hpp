#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "radnav/nav.hpp"
#include "radnav/qram.hpp"
#include "radnav/radar.hpp"
#include "radnav/tracking.hpp"

namespace radnav {

enum class TaskKind { kSearch, kTrack, kNav };

inline const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kSearch: return "search";
    case TaskKind::kTrack: return "track";
    case TaskKind::kNav: return "nav";
  }
  return "?";
}

/// Tunables of the resource managers. Defaults are the values the
/// simulation was calibrated with; everything is overridable from the
/// scenario config.
struct ManagerConfig {
  double planning_interval_s = 10.0;
  // Navigation rule
  double nav_snr_target_db = 13.0;
  int max_nav_satellites = 3;
  double nav_interval_s = 10.0;  // fixed-interval schemes
  double min_elevation_rad = deg2rad(10.0);
  // Time-balanced scheduling
  int tb_priority_nav = 3;
  int tb_priority_track = 2;
  int tb_priority_search = 1;
  double tb_track_revisit_s = 1.0;
  double tb_search_revisit_s = 8.0;
  // Search sector (body frame)
  double search_az_min_rad = deg2rad(-60.0);
  double search_az_max_rad = deg2rad(60.0);
  double search_el_min_rad = deg2rad(-5.0);
  double search_el_max_rad = deg2rad(30.0);
  double search_instrumented_range_m = 100e3;
  double search_design_rcs_m2 = 0.1;
  std::vector<double> search_grants_s = {0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0};
  // Track task menu
  std::vector<double> track_snr_menu_db = {13.0, 17.0};
  int track_max_updates = 2;
  double track_process_noise = 9.0;  // (m/s^2)^2
  double track_initial_velocity_sigma = 200.0;
  int confirm_hits = 2;
  int confirm_window = 3;
  int drop_consecutive_misses = 3;
  double drop_det_sixth_root_m = 1e4;
  double gate_sigma = 5.0;
  // Q-RAM nav coupling switch (ablation support)
  bool coupling_enabled = true;
};

/// Raster-scan search sector derived from the radar beamwidth.
struct SearchSector {
  double az_min = 0, el_min = 0;
  double spacing = 0;
  int n_az = 0, n_el = 0;
  Dwell beam;

  int total_beams() const { return n_az * n_el; }

  /// Beam angles in raster order (rows of constant elevation).
  std::pair<double, double> beam_angles(int index) const {
    const int row = (index / n_az) % n_el;
    const int col = index % n_az;
    return {az_min + (col + 0.5) * spacing, el_min + (row + 0.5) * spacing};
  }
};

inline SearchSector make_search_sector(const RadarParams& radar,
                                       const ManagerConfig& mgr) {
  SearchSector s;
  s.spacing = beamwidth_az(radar);
  s.az_min = mgr.search_az_min_rad;
  s.el_min = mgr.search_el_min_rad;
  s.n_az = std::max(1, static_cast<int>(std::floor(
                           (mgr.search_az_max_rad - mgr.search_az_min_rad) /
                           s.spacing)));
  s.n_el = std::max(1, static_cast<int>(std::floor(
                           (mgr.search_el_max_rad - mgr.search_el_min_rad) /
                           s.spacing)));
  auto d = try_dwell_for_target_snr(radar, 0.0, 0.0,
                                    mgr.search_instrumented_range_m,
                                    mgr.search_design_rcs_m2,
                                    db2lin(mgr.nav_snr_target_db));
  if (d) {
    s.beam = *d;
  } else {
    s.beam.transmit_time_s = radar.max_pulse_duration_s;
    s.beam.timeline_cost_s = radar.max_pulse_duration_s / radar.duty_cycle;
  }
  s.beam.purpose = DwellPurpose::kSearch;
  return s;
}

/// One schedulable radar task instance.
struct RadarTaskRequest {
  TaskKind kind = TaskKind::kSearch;
  double due_time = 0.0;
  int priority = 0;
  Dwell dwell;
  int64_t subject_id = -1;  // track_id / sat_id / raster beam index
  // Navigation extras carried for execution-time bookkeeping.
  double predicted_snr = 0.0;
  double detection_probability = 0.0;
  MeasurementNoise noise;
};

struct PlanEntry {
  double start_time = 0.0;
  RadarTaskRequest request;
};

struct Plan {
  double interval_start = 0.0;
  double interval_end = 0.0;
  std::vector<PlanEntry> timeline;
  double declared_utility = 0.0;
  std::map<TaskKind, double> resource_by_kind;
  int chosen_nav_config = 0;  // number of satellite dwells this interval
  std::vector<std::string> warnings;

  double interval_length() const { return interval_end - interval_start; }

  void validate() const {
    double used = 0.0;
    double cursor = interval_start - 1e-9;
    for (const auto& e : timeline) {
      if (e.start_time < cursor)
        throw std::logic_error("Plan: overlapping dwells");
      if (e.start_time + e.request.dwell.timeline_cost_s >
          interval_end + 1e-6)
        throw std::logic_error("Plan: dwell exceeds interval");
      cursor = e.start_time + e.request.dwell.timeline_cost_s;
      used += e.request.dwell.timeline_cost_s;
    }
    if (used > interval_length() + 1e-6)
      throw std::logic_error("Plan: timeline overbooked");
  }
};

/// Time-balanced selection rule: the overdue task with the highest
/// priority goes first; with nothing overdue, the task due next.
/// Ties resolve toward the earlier due time, then input order.
inline const RadarTaskRequest& time_balanced_next(
    const std::vector<RadarTaskRequest>& tasks, double now) {
  if (tasks.empty())
    throw std::invalid_argument("time_balanced_next: no tasks");
  const RadarTaskRequest* best = nullptr;
  bool best_overdue = false;
  for (const auto& t : tasks) {
    const bool overdue = t.due_time < now;
    if (best == nullptr) {
      best = &t;
      best_overdue = overdue;
      continue;
    }
    if (overdue != best_overdue) {
      if (overdue) {
        best = &t;
        best_overdue = true;
      }
      continue;
    }
    if (overdue) {
      if (t.priority > best->priority ||
          (t.priority == best->priority && t.due_time < best->due_time)) {
        best = &t;
      }
    } else if (t.due_time < best->due_time) {
      best = &t;
    }
  }
  return *best;
}

/// Immutable planning input captured at the start of an interval.
struct WorldSnapshot {
  double time = 0.0;
  double interval_s = 10.0;
  NavState nav;
  Attitude attitude;
  std::vector<Track> tracks;
  const std::vector<SatelliteEphemeris>* ephemerides = nullptr;
  const RadarParams* radar = nullptr;
  ImuModel imu;
  const ManagerConfig* mgr = nullptr;
};

/// Mutable per-run scheduler bookkeeping carried between intervals.
struct SchedulerState {
  bool tb_nav_initialized = false;
  double tb_nav_due = 0.0;
  std::map<int64_t, double> tb_track_due;
  double tb_search_due = 0.0;
  std::deque<RadarTaskRequest> tb_pending_nav;
  double last_nav_plan_time = -1e18;
  int raster_cursor = 0;
};

namespace detail {

inline const SatelliteEphemeris* find_ephemeris(
    const std::vector<SatelliteEphemeris>& ephs, int64_t id) {
  for (const auto& e : ephs)
    if (e.sat_id == id) return &e;
  return nullptr;
}

}  // namespace detail

/// Chain of up to max_sats planned satellite dwells following the
/// selection rule: pick the direction of largest projected nav
/// uncertainty, forecast the covariance through that dwell, repeat.
/// Dwells are sized to the SNR target and stacked back to back from
/// start_time; infeasible candidates drop out of the running.
inline std::vector<PlannedNavDwell> build_nav_chain(const WorldSnapshot& w,
                                                    double start_time,
                                                    int max_sats) {
  const auto& mgr = *w.mgr;
  const auto& radar = *w.radar;
  std::vector<PlannedNavDwell> chain;
  if (max_sats <= 0) return chain;

  auto visible = visible_satellites(*w.ephemerides, w.time, w.nav.position,
                                    w.attitude, mgr.min_elevation_rad,
                                    radar.field_of_regard_rad);
  std::vector<int64_t> remaining = visible;
  double t = start_time;
  NavState forecast_state = w.nav;

  while (static_cast<int>(chain.size()) < max_sats && !remaining.empty()) {
    const Mat3 p_pos =
        forecast_covariance_after_update(forecast_state, w.attitude, chain,
                                         std::max(1e-3, t - w.nav.time),
                                         w.imu)
            .topLeftCorner<3, 3>();
    std::vector<SatCandidate> cands;
    for (int64_t id : remaining) {
      const auto* eph = detail::find_ephemeris(*w.ephemerides, id);
      if (!eph) continue;
      if (t < eph->times.front() || t > eph->times.back()) continue;
      cands.push_back({id, eph->position_at(t) - w.nav.position});
    }
    if (cands.empty()) break;
    const int64_t picked = select_satellite(cands, p_pos);
    remaining.erase(std::find(remaining.begin(), remaining.end(), picked));

    const auto* eph = detail::find_ephemeris(*w.ephemerides, picked);
    const Vec3 sat_pos = eph->position_at(t);
    const Vec3 z = ecef_to_measurement(w.nav.position, w.attitude, sat_pos);
    auto dwell = try_dwell_for_target_snr(radar, z[0], z[1], z[2], eph->rcs_m2,
                                          db2lin(mgr.nav_snr_target_db));
    if (!dwell) continue;  // out of reach; try the next best direction
    dwell->purpose = DwellPurpose::kNav;

    PlannedNavDwell pd;
    pd.sat_id = picked;
    pd.time = t;
    pd.dwell = *dwell;
    pd.predicted_snr = snr(radar, *dwell, z[2], eph->rcs_m2);
    pd.detection_probability =
        detection_probability(pd.predicted_snr, radar.false_alarm_probability);
    pd.noise.sigma_az = angular_sigma(
        steered_beamwidth(beamwidth_az(radar), z[0]), pd.predicted_snr);
    pd.noise.sigma_el = angular_sigma(
        steered_beamwidth(beamwidth_el(radar), z[1]), pd.predicted_snr);
    pd.noise.sigma_range = range_sigma(radar);
    pd.sat_position = sat_pos;
    chain.push_back(pd);
    t += dwell->timeline_cost_s;
  }
  return chain;
}

/// Requests for a rule-based navigation update (time-balanced and
/// fixed-interval Q-RAM schemes). Empty when no satellite is usable.
inline std::vector<RadarTaskRequest> rule_based_nav_request(
    const WorldSnapshot& w, double start_time) {
  std::vector<RadarTaskRequest> out;
  for (const auto& pd :
       build_nav_chain(w, start_time, w.mgr->max_nav_satellites)) {
    RadarTaskRequest r;
    r.kind = TaskKind::kNav;
    r.due_time = start_time;
    r.priority = w.mgr->tb_priority_nav;
    r.dwell = pd.dwell;
    r.subject_id = pd.sat_id;
    r.predicted_snr = pd.predicted_snr;
    r.detection_probability = pd.detection_probability;
    r.noise = pd.noise;
    out.push_back(r);
  }
  return out;
}

/// One enumerated navigation configuration: the first `config_id`
/// entries of the selection chain (0 = skip).
struct NavConfig {
  int config_id = 0;
  std::vector<PlannedNavDwell> dwells;
  double total_resource_s = 0.0;
};

inline std::vector<NavConfig> enumerate_nav_configs(const WorldSnapshot& w) {
  const auto chain =
      build_nav_chain(w, w.time, w.mgr->max_nav_satellites);
  std::vector<NavConfig> configs;
  configs.push_back({0, {}, 0.0});
  double acc = 0.0;
  for (size_t k = 0; k < chain.size(); ++k) {
    acc += chain[k].dwell.timeline_cost_s;
    if (acc > w.interval_s) break;  // a config must fit its own interval
    NavConfig c;
    c.config_id = static_cast<int>(k + 1);
    c.dwells.assign(chain.begin(), chain.begin() + k + 1);
    c.total_resource_s = acc;
    configs.push_back(std::move(c));
  }
  return configs;
}

/// Search quality/utility: q = (R, 10 / det(P')^(1/6)),
/// u = 0.01 R + 0.99 min(q2, 1). P' is the forecast navigation
/// position covariance.
inline std::pair<std::array<double, 2>, double> search_quality_utility(
    double allocated_resource_s, const Mat3& nav_forecast_pos_cov) {
  if (allocated_resource_s < 0)
    throw std::invalid_argument("search_quality_utility: R < 0");
  Eigen::LLT<Mat3> llt(symmetrize(nav_forecast_pos_cov));
  double q2;
  if (llt.info() != Eigen::Success) {
    // Singular (e.g. exactly zero) forecast covariance: perfect
    // self-localization, the quality term saturates.
    q2 = std::numeric_limits<double>::infinity();
  } else {
    const Mat3 l = llt.matrixL();
    double det_sixth = 1.0;
    for (int i = 0; i < 3; ++i) det_sixth *= std::cbrt(l(i, i));
    q2 = 10.0 / det_sixth;
  }
  const double u = 0.01 * allocated_resource_s + 0.99 * std::min(q2, 1.0);
  return {{allocated_resource_s, q2}, u};
}

/// Search task model: candidate antenna-time grants mapped onto raster
/// coverage, utility from search_quality_utility.
inline qram::TaskModel build_search_taskmodel(const SearchSector& sector,
                                              const ManagerConfig& mgr,
                                              const Mat3& nav_forecast_pos_cov,
                                              int64_t task_id) {
  qram::TaskModel t;
  t.task_id = task_id;
  int64_t cfg = 0;
  for (double grant : mgr.search_grants_s) {
    const int beams = static_cast<int>(grant / sector.beam.timeline_cost_s);
    const double resource = beams * sector.beam.timeline_cost_s;
    auto [q, u] = search_quality_utility(resource, nav_forecast_pos_cov);
    t.points.push_back({cfg++, {resource}, u, {q[0], q[1]}});
  }
  return t;
}

/// Track task model: {skip, 1..max updates} x SNR menu, dwells sized at
/// the predicted geometry, utilities from the covariance forecast under
/// the navigation coupling.
inline qram::TaskModel build_track_taskmodel(const WorldSnapshot& w,
                                             const Track& track,
                                             const Mat3& nav_forecast_pos_cov,
                                             int64_t task_id) {
  const auto& mgr = *w.mgr;
  const auto& radar = *w.radar;
  qram::TaskModel t;
  t.task_id = task_id;

  const Mat3 coupling =
      mgr.coupling_enabled ? nav_forecast_pos_cov : Mat3::Zero();

  // Skip configuration: propagated prior under the nav coupling.
  {
    const auto q = forecast_track_quality(track, w.nav, w.attitude, {},
                                          w.interval_s, coupling,
                                          mgr.track_process_noise);
    t.points.push_back({0, {0.0}, q.u_track, {q.q_track}});
  }

  int64_t cfg = 1;
  for (int updates = 1; updates <= mgr.track_max_updates; ++updates) {
    for (double snr_db : mgr.track_snr_menu_db) {
      std::vector<PlannedTrackDwell> dwells;
      double resource = 0.0;
      bool feasible = true;
      for (int j = 0; j < updates; ++j) {
        const double t_dwell =
            w.time + (j + 1.0) / (updates + 1.0) * w.interval_s;
        const Track pred = cv_predict(track, t_dwell - track.time,
                                      mgr.track_process_noise);
        const Vec3 own_pred =
            w.nav.position + w.nav.velocity * (t_dwell - w.nav.time);
        Vec3 z;
        try {
          z = ecef_to_measurement(own_pred, w.attitude, pred.position());
        } catch (const std::invalid_argument&) {
          feasible = false;
          break;
        }
        auto dwell = try_dwell_for_target_snr(radar, z[0], z[1], z[2],
                                              mgr.search_design_rcs_m2,
                                              db2lin(snr_db));
        if (!dwell) {
          feasible = false;
          break;
        }
        const double achieved = snr(radar, *dwell, z[2], mgr.search_design_rcs_m2);
        PlannedTrackDwell pd;
        pd.time = t_dwell;
        pd.detection_probability =
            detection_probability(achieved, radar.false_alarm_probability);
        pd.noise.sigma_az = angular_sigma(
            steered_beamwidth(beamwidth_az(radar), z[0]), achieved);
        pd.noise.sigma_el = angular_sigma(
            steered_beamwidth(beamwidth_el(radar), z[1]), achieved);
        pd.noise.sigma_range = range_sigma(radar);
        dwells.push_back(pd);
        resource += dwell->timeline_cost_s;
      }
      if (!feasible) {
        ++cfg;
        continue;
      }
      const auto q = forecast_track_quality(track, w.nav, w.attitude, dwells,
                                            w.interval_s, coupling,
                                            mgr.track_process_noise);
      t.points.push_back({cfg++, {resource}, q.u_track, {q.q_track}});
    }
  }
  return t;
}

namespace detail {

/// Sequential packer: fixed requests at their desired times (pushed
/// later on conflict), then search beams fill every remaining gap.
inline void place_on_timeline(Plan& plan,
                              std::vector<std::pair<double, RadarTaskRequest>>
                                  fixed,  // (desired time, request)
                              int search_beams, const SearchSector& sector,
                              SchedulerState& state) {
  std::stable_sort(fixed.begin(), fixed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  const double end = plan.interval_end;
  double cursor = plan.interval_start;
  std::vector<PlanEntry> placed;
  bool overflow = false;
  for (const auto& [desired, req] : fixed) {
    double start = std::max(cursor, std::min(desired, end - req.dwell.timeline_cost_s));
    if (start < cursor) start = cursor;
    if (start + req.dwell.timeline_cost_s > end + 1e-9) {
      overflow = true;
      break;
    }
    placed.push_back({start, req});
    cursor = start + req.dwell.timeline_cost_s;
  }
  if (overflow) {
    // Gapless fallback: everything fits because the budget was checked.
    placed.clear();
    cursor = plan.interval_start;
    for (const auto& [desired, req] : fixed) {
      placed.push_back({cursor, req});
      cursor += req.dwell.timeline_cost_s;
    }
  }

  // Fill gaps with search beams, advancing the raster cursor.
  std::vector<PlanEntry> full;
  double gap_start = plan.interval_start;
  int remaining = search_beams;
  auto fill_gap = [&](double from, double to) {
    double t = from;
    while (remaining > 0 && t + sector.beam.timeline_cost_s <= to + 1e-12) {
      RadarTaskRequest r;
      r.kind = TaskKind::kSearch;
      r.due_time = t;
      r.dwell = sector.beam;
      const auto [az, el] =
          sector.beam_angles(state.raster_cursor % sector.total_beams());
      r.dwell.steer_az = az;
      r.dwell.steer_el = el;
      r.subject_id = state.raster_cursor % sector.total_beams();
      ++state.raster_cursor;
      full.push_back({t, r});
      t += sector.beam.timeline_cost_s;
      --remaining;
    }
  };
  for (const auto& e : placed) {
    fill_gap(gap_start, e.start_time);
    full.push_back(e);
    gap_start = e.start_time + e.request.dwell.timeline_cost_s;
  }
  fill_gap(gap_start, end);

  std::stable_sort(full.begin(), full.end(), [](const auto& a, const auto& b) {
    return a.start_time < b.start_time;
  });
  plan.timeline = std::move(full);
  for (const auto& e : plan.timeline)
    plan.resource_by_kind[e.request.kind] += e.request.dwell.timeline_cost_s;
}

inline RadarTaskRequest nav_request_from_planned(const PlannedNavDwell& pd,
                                                 const ManagerConfig& mgr) {
  RadarTaskRequest r;
  r.kind = TaskKind::kNav;
  r.due_time = pd.time;
  r.priority = mgr.tb_priority_nav;
  r.dwell = pd.dwell;
  r.subject_id = pd.sat_id;
  r.predicted_snr = pd.predicted_snr;
  r.detection_probability = pd.detection_probability;
  r.noise = pd.noise;
  return r;
}

}  // namespace detail

/// Fixed-interval Q-RAM scheme: when a navigation update is due, its
/// rule-based dwells claim the floor of the budget; the remainder goes
/// through the Q-RAM solve over search and track task models.
inline Plan qram_fixed_plan(const WorldSnapshot& w, SchedulerState& state,
                            const SearchSector& sector) {
  const auto& mgr = *w.mgr;
  Plan plan;
  plan.interval_start = w.time;
  plan.interval_end = w.time + w.interval_s;

  std::vector<PlannedNavDwell> nav_dwells;
  if (w.time >= state.last_nav_plan_time + mgr.nav_interval_s - 1e-9) {
    nav_dwells = build_nav_chain(w, w.time, mgr.max_nav_satellites);
    double acc = 0.0;
    size_t keep = 0;
    for (; keep < nav_dwells.size(); ++keep) {
      if (acc + nav_dwells[keep].dwell.timeline_cost_s > w.interval_s) break;
      acc += nav_dwells[keep].dwell.timeline_cost_s;
    }
    if (keep < nav_dwells.size()) {
      plan.warnings.push_back("nav floor truncated to fit the interval");
      nav_dwells.resize(keep);
    }
    if (!nav_dwells.empty()) state.last_nav_plan_time = w.time;
  }

  double floor_cost = 0.0;
  for (const auto& d : nav_dwells) floor_cost += d.dwell.timeline_cost_s;

  const Mat3 p_forecast =
      mgr.coupling_enabled
          ? Mat3(forecast_covariance_after_update(w.nav, w.attitude, nav_dwells,
                                                  w.interval_s, w.imu)
                     .topLeftCorner<3, 3>())
          : Mat3(Mat3::Zero());

  std::vector<qram::TaskModel> tasks;
  tasks.push_back(build_search_taskmodel(sector, mgr, p_forecast, 0));
  int64_t tid = 1;
  for (const auto& trk : w.tracks)
    tasks.push_back(build_track_taskmodel(w, trk, p_forecast, tid++));

  const auto alloc = qram::solve(tasks, w.interval_s - floor_cost);
  plan.declared_utility = alloc.total_utility;
  plan.chosen_nav_config = static_cast<int>(nav_dwells.size());

  // Materialize chosen configurations.
  std::vector<std::pair<double, RadarTaskRequest>> fixed;
  for (const auto& d : nav_dwells)
    fixed.push_back({d.time, detail::nav_request_from_planned(d, mgr)});
  int search_beams = 0;
  tid = 1;
  for (size_t i = 0; i < tasks.size(); ++i) {
    const int64_t chosen_cfg = alloc.chosen.at(tasks[i].task_id);
    const auto& pt = *std::find_if(
        tasks[i].points.begin(), tasks[i].points.end(),
        [&](const auto& p) { return p.config_id == chosen_cfg; });
    if (tasks[i].task_id == 0) {
      search_beams =
          static_cast<int>(std::round(pt.resource[0] / sector.beam.timeline_cost_s));
      continue;
    }
    const auto& trk = w.tracks[i - 1];
    const int updates = static_cast<int>(std::ceil(
        static_cast<double>(chosen_cfg) / w.mgr->track_snr_menu_db.size()));
    const double per_dwell = updates > 0 ? pt.resource[0] / updates : 0.0;
    for (int j = 0; j < updates; ++j) {
      RadarTaskRequest r;
      r.kind = TaskKind::kTrack;
      r.priority = mgr.tb_priority_track;
      r.subject_id = trk.track_id;
      r.dwell.purpose = DwellPurpose::kTrack;
      r.dwell.timeline_cost_s = per_dwell;
      r.dwell.transmit_time_s = per_dwell * w.radar->duty_cycle;
      const double t_dwell = w.time + (j + 1.0) / (updates + 1.0) * w.interval_s;
      r.due_time = t_dwell;
      fixed.push_back({t_dwell, r});
    }
  }
  detail::place_on_timeline(plan, std::move(fixed), search_beams, sector, state);
  plan.validate();
  return plan;
}

/// Dependency-aware Q-RAM: re-optimize search/track utilities under the
/// forecast navigation covariance of every enumerated nav configuration,
/// charge each configuration its resource, keep the best branch.
inline Plan qram_nav_plan(const WorldSnapshot& w, SchedulerState& state,
                          const SearchSector& sector) {
  const auto& mgr = *w.mgr;
  const auto configs = enumerate_nav_configs(w);

  struct Branch {
    const NavConfig* config;
    qram::Allocation alloc;
    std::vector<qram::TaskModel> tasks;
    double score = 0.0;
  };
  std::vector<Branch> branches;
  branches.reserve(configs.size());

  for (const auto& c : configs) {
    Branch b;
    b.config = &c;
    const Mat3 p_forecast =
        mgr.coupling_enabled
            ? Mat3(forecast_covariance_after_update(w.nav, w.attitude, c.dwells,
                                                    w.interval_s, w.imu)
                       .topLeftCorner<3, 3>())
            : Mat3(Mat3::Zero());
    b.tasks.push_back(build_search_taskmodel(sector, mgr, p_forecast, 0));
    int64_t tid = 1;
    for (const auto& trk : w.tracks)
      b.tasks.push_back(build_track_taskmodel(w, trk, p_forecast, tid++));
    b.alloc = qram::solve(b.tasks, w.interval_s - c.total_resource_s);
    b.score = b.alloc.total_utility;
    branches.push_back(std::move(b));
  }

  // Argmax over branches; ties stay with the cheaper configuration
  // (branches are ordered by increasing nav resource).
  size_t best = 0;
  for (size_t i = 1; i < branches.size(); ++i)
    if (branches[i].score > branches[best].score + 1e-12) best = i;

  const Branch& win = branches[best];
  Plan plan;
  plan.interval_start = w.time;
  plan.interval_end = w.time + w.interval_s;
  plan.declared_utility = win.score;
  plan.chosen_nav_config = win.config->config_id;

  std::vector<std::pair<double, RadarTaskRequest>> fixed;
  for (const auto& d : win.config->dwells)
    fixed.push_back({d.time, detail::nav_request_from_planned(d, mgr)});
  int search_beams = 0;
  for (size_t i = 0; i < win.tasks.size(); ++i) {
    const int64_t chosen_cfg = win.alloc.chosen.at(win.tasks[i].task_id);
    const auto& pt = *std::find_if(
        win.tasks[i].points.begin(), win.tasks[i].points.end(),
        [&](const auto& p) { return p.config_id == chosen_cfg; });
    if (win.tasks[i].task_id == 0) {
      search_beams =
          static_cast<int>(std::round(pt.resource[0] / sector.beam.timeline_cost_s));
      continue;
    }
    const auto& trk = w.tracks[i - 1];
    const int updates = static_cast<int>(std::ceil(
        static_cast<double>(chosen_cfg) / mgr.track_snr_menu_db.size()));
    const double per_dwell = updates > 0 ? pt.resource[0] / updates : 0.0;
    for (int j = 0; j < updates; ++j) {
      RadarTaskRequest r;
      r.kind = TaskKind::kTrack;
      r.priority = mgr.tb_priority_track;
      r.subject_id = trk.track_id;
      r.dwell.purpose = DwellPurpose::kTrack;
      r.dwell.timeline_cost_s = per_dwell;
      r.dwell.transmit_time_s = per_dwell * w.radar->duty_cycle;
      const double t_dwell = w.time + (j + 1.0) / (updates + 1.0) * w.interval_s;
      r.due_time = t_dwell;
      fixed.push_back({t_dwell, r});
    }
  }
  detail::place_on_timeline(plan, std::move(fixed), search_beams, sector, state);
  plan.validate();
  return plan;
}

/// Rule-based time-balanced scheme, simulated over the interval: pick
/// the next task by the time-balance rule, append its dwell, repeat.
inline Plan time_balanced_plan(const WorldSnapshot& w, SchedulerState& state,
                               const SearchSector& sector) {
  const auto& mgr = *w.mgr;
  Plan plan;
  plan.interval_start = w.time;
  plan.interval_end = w.time + w.interval_s;

  if (!state.tb_nav_initialized) {
    state.tb_nav_due = w.time + mgr.nav_interval_s;
    state.tb_search_due = w.time;
    state.tb_nav_initialized = true;
  }
  for (const auto& trk : w.tracks)
    if (!state.tb_track_due.count(trk.track_id))
      state.tb_track_due[trk.track_id] = w.time;
  // Forget dropped tracks.
  for (auto it = state.tb_track_due.begin(); it != state.tb_track_due.end();) {
    const bool alive =
        std::any_of(w.tracks.begin(), w.tracks.end(), [&](const Track& t) {
          return t.track_id == it->first;
        });
    it = alive ? std::next(it) : state.tb_track_due.erase(it);
  }

  const int slice_beams = std::max(1, sector.n_az);  // one raster row
  const double slice_revisit =
      mgr.tb_search_revisit_s * slice_beams / sector.total_beams();

  double t = w.time;
  int nav_dwells_placed = 0;

  // Navigation dwells deferred from the previous interval execute first.
  while (!state.tb_pending_nav.empty() &&
         t + state.tb_pending_nav.front().dwell.timeline_cost_s <=
             plan.interval_end + 1e-12) {
    RadarTaskRequest r = state.tb_pending_nav.front();
    state.tb_pending_nav.pop_front();
    plan.timeline.push_back({t, r});
    t += r.dwell.timeline_cost_s;
    ++nav_dwells_placed;
    if (state.tb_pending_nav.empty())
      state.tb_nav_due = t + mgr.nav_interval_s;
  }

  const double min_cost = sector.beam.timeline_cost_s;
  while (t + min_cost <= plan.interval_end + 1e-12 &&
         state.tb_pending_nav.empty()) {
    std::vector<RadarTaskRequest> candidates;
    {
      RadarTaskRequest nav;
      nav.kind = TaskKind::kNav;
      nav.due_time = state.tb_nav_due;
      nav.priority = mgr.tb_priority_nav;
      candidates.push_back(nav);
    }
    for (const auto& trk : w.tracks) {
      RadarTaskRequest r;
      r.kind = TaskKind::kTrack;
      r.due_time = state.tb_track_due[trk.track_id];
      r.priority = mgr.tb_priority_track;
      r.subject_id = trk.track_id;
      candidates.push_back(r);
    }
    {
      RadarTaskRequest s;
      s.kind = TaskKind::kSearch;
      s.due_time = state.tb_search_due;
      s.priority = mgr.tb_priority_search;
      candidates.push_back(s);
    }

    const RadarTaskRequest& next = time_balanced_next(candidates, t);

    if (next.kind == TaskKind::kNav) {
      const auto chain = build_nav_chain(w, t, mgr.max_nav_satellites);
      if (chain.empty()) {
        // Nothing usable; try again one full interval later.
        state.tb_nav_due = t + mgr.nav_interval_s;
        continue;
      }
      bool deferred = false;
      for (const auto& pd : chain) {
        RadarTaskRequest r = detail::nav_request_from_planned(pd, mgr);
        if (!deferred &&
            t + r.dwell.timeline_cost_s <= plan.interval_end + 1e-12) {
          plan.timeline.push_back({t, r});
          t += r.dwell.timeline_cost_s;
          ++nav_dwells_placed;
        } else {
          deferred = true;
          state.tb_pending_nav.push_back(r);
        }
      }
      if (!deferred) state.tb_nav_due = t + mgr.nav_interval_s;
      continue;
    }

    if (next.kind == TaskKind::kTrack) {
      const auto trk_it =
          std::find_if(w.tracks.begin(), w.tracks.end(), [&](const Track& x) {
            return x.track_id == next.subject_id;
          });
      const Track pred =
          cv_predict(*trk_it, std::max(0.0, t - trk_it->time),
                     mgr.track_process_noise);
      const Vec3 own_pred =
          w.nav.position + w.nav.velocity * std::max(0.0, t - w.nav.time);
      bool placed = false;
      try {
        const Vec3 z = ecef_to_measurement(own_pred, w.attitude, pred.position());
        auto dwell = try_dwell_for_target_snr(*w.radar, z[0], z[1], z[2],
                                              mgr.search_design_rcs_m2,
                                              db2lin(mgr.nav_snr_target_db));
        if (dwell && t + dwell->timeline_cost_s <= plan.interval_end + 1e-12) {
          dwell->purpose = DwellPurpose::kTrack;
          RadarTaskRequest r;
          r.kind = TaskKind::kTrack;
          r.due_time = next.due_time;
          r.priority = next.priority;
          r.dwell = *dwell;
          r.subject_id = next.subject_id;
          plan.timeline.push_back({t, r});
          t += dwell->timeline_cost_s;
          placed = true;
        }
      } catch (const std::invalid_argument&) {
      }
      state.tb_track_due[next.subject_id] =
          (placed ? t : t + mgr.tb_track_revisit_s) + mgr.tb_track_revisit_s;
      continue;
    }

    // Search: one raster-row slice (or what still fits).
    int beams = slice_beams;
    const double room = plan.interval_end - t;
    beams = std::min(beams,
                     static_cast<int>(std::floor(room / sector.beam.timeline_cost_s)));
    if (beams <= 0) break;
    for (int i = 0; i < beams; ++i) {
      RadarTaskRequest r;
      r.kind = TaskKind::kSearch;
      r.due_time = state.tb_search_due;
      r.priority = mgr.tb_priority_search;
      r.dwell = sector.beam;
      const auto [az, el] =
          sector.beam_angles(state.raster_cursor % sector.total_beams());
      r.dwell.steer_az = az;
      r.dwell.steer_el = el;
      r.subject_id = state.raster_cursor % sector.total_beams();
      ++state.raster_cursor;
      plan.timeline.push_back({t, r});
      t += sector.beam.timeline_cost_s;
    }
    state.tb_search_due = t + slice_revisit;
  }

  plan.chosen_nav_config = nav_dwells_placed;
  for (const auto& e : plan.timeline)
    plan.resource_by_kind[e.request.kind] += e.request.dwell.timeline_cost_s;
  plan.validate();
  return plan;
}

}  // namespace radnav
