#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace radnav::qram {

/// One resource requirement (or bound), one component per resource type.
/// This artifact runs with a single type: seconds of antenna time per
/// planning interval.
using ResourceVector = std::vector<double>;

inline void check_resource(const ResourceVector& r) {
  if (r.empty()) throw std::invalid_argument("resource vector is empty");
  for (double v : r)
    if (!(v >= 0.0)) throw std::invalid_argument("resource component < 0");
}

/// Weighted scalarization of a resource vector used to order
/// configurations when several resource types exist.
inline double compound_resource(const ResourceVector& r,
                                const std::vector<double>& weights) {
  if (r.size() != weights.size())
    throw std::invalid_argument("compound_resource: dimension mismatch");
  bool any = false;
  double sum = 0.0;
  for (size_t j = 0; j < r.size(); ++j) {
    if (weights[j] < 0.0)
      throw std::invalid_argument("compound_resource: negative weight");
    if (weights[j] > 0.0) any = true;
    sum += weights[j] * r[j];
  }
  if (!any) throw std::invalid_argument("compound_resource: all-zero weights");
  return sum;
}

/// One evaluated configuration out of a task's operational space.
struct ConfigurationPoint {
  int64_t config_id = 0;
  ResourceVector resource;
  double utility = 0.0;
  std::vector<double> quality;  // task-specific quality components
};

struct TaskModel {
  int64_t task_id = 0;
  std::vector<ConfigurationPoint> points;
  /// Configuration that must be granted at least its resource, if set.
  std::optional<int64_t> mandatory_floor;
};

/// Upper-left frontier of a task's configuration cloud in
/// (compound resource, utility) space. Vertices carry non-increasing
/// marginal utility-per-resource slopes; collinear chains are kept so a
/// linear utility model still exposes every intermediate grant level.
struct ConcaveMajorant {
  int64_t task_id = 0;
  std::vector<ConfigurationPoint> vertices;  // increasing resource & utility
  std::vector<double> compound;              // per vertex
  std::vector<double> slopes;                // per segment, non-increasing
};

namespace detail {
constexpr double kSlopeTol = 1e-12;
}

inline ConcaveMajorant concave_majorant(const TaskModel& task,
                                        const std::vector<double>& weights) {
  if (task.points.empty())
    throw std::invalid_argument("concave_majorant: task has no points");

  struct Entry {
    double compound;
    const ConfigurationPoint* pt;
  };
  std::vector<Entry> entries;
  entries.reserve(task.points.size());
  double floor_compound = -1.0;
  double floor_utility = 0.0;
  const ConfigurationPoint* floor_pt = nullptr;
  for (const auto& p : task.points) {
    check_resource(p.resource);
    if (!std::isfinite(p.utility))
      throw std::invalid_argument("concave_majorant: non-finite utility");
    const double c = compound_resource(p.resource, weights);
    if (task.mandatory_floor && p.config_id == *task.mandatory_floor) {
      floor_compound = c;
      floor_utility = p.utility;
      floor_pt = &p;
    }
    entries.push_back({c, &p});
  }
  if (task.mandatory_floor && floor_pt == nullptr)
    throw std::invalid_argument("concave_majorant: mandatory floor not found");

  // A mandatory floor anchors the frontier: only the floor itself and
  // points strictly better than it remain eligible.
  if (floor_pt != nullptr) {
    std::vector<Entry> kept;
    for (const auto& e : entries) {
      if (e.pt == floor_pt ||
          (e.compound > floor_compound && e.pt->utility > floor_utility)) {
        kept.push_back(e);
      }
    }
    entries = std::move(kept);
  }

  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.compound != b.compound) return a.compound < b.compound;
    if (a.pt->utility != b.pt->utility) return a.pt->utility > b.pt->utility;
    return a.pt->config_id < b.pt->config_id;
  });

  // Pareto pass: strictly increasing utility with increasing resource;
  // equal-resource duplicates keep the max-utility point.
  std::vector<Entry> frontier;
  for (const auto& e : entries) {
    if (!frontier.empty() && e.compound == frontier.back().compound) continue;
    if (!frontier.empty() && e.pt->utility <= frontier.back().pt->utility)
      continue;
    frontier.push_back(e);
  }

  // Graham-style scan for the concave chain. Pops only on a strict
  // slope increase so collinear vertices survive.
  std::vector<Entry> hull;
  for (const auto& e : frontier) {
    while (hull.size() >= 2) {
      const Entry& a = hull[hull.size() - 2];
      const Entry& b = hull[hull.size() - 1];
      const double s1 = (b.pt->utility - a.pt->utility) / (b.compound - a.compound);
      const double s2 = (e.pt->utility - b.pt->utility) / (e.compound - b.compound);
      if (s2 > s1 + detail::kSlopeTol)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(e);
  }

  ConcaveMajorant m;
  m.task_id = task.task_id;
  m.vertices.reserve(hull.size());
  m.compound.reserve(hull.size());
  for (const auto& e : hull) {
    m.vertices.push_back(*e.pt);
    m.compound.push_back(e.compound);
  }
  for (size_t i = 1; i < hull.size(); ++i) {
    m.slopes.push_back((hull[i].pt->utility - hull[i - 1].pt->utility) /
                       (hull[i].compound - hull[i - 1].compound));
  }
  return m;
}

struct Allocation {
  std::map<int64_t, int64_t> chosen;  // task_id -> config_id
  double total_utility = 0.0;
  ResourceVector total_resource;
  ResourceVector residual_budget;
};

struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(std::string msg, std::vector<int64_t> tasks = {})
      : std::runtime_error(std::move(msg)), offending_tasks(std::move(tasks)) {}
  std::vector<int64_t> offending_tasks;
};

namespace detail {

inline bool fits(const ResourceVector& need, const ResourceVector& residual) {
  for (size_t j = 0; j < need.size(); ++j)
    if (need[j] > residual[j] + 1e-12) return false;
  return true;
}

inline void subtract(ResourceVector& residual, const ResourceVector& lo,
                     const ResourceVector& hi) {
  for (size_t j = 0; j < residual.size(); ++j) residual[j] -= hi[j] - lo[j];
}

}  // namespace detail

/// Greedy marginal-ratio ascent over precomputed majorants. Every task
/// starts at its minimum-resource vertex; the task whose next frontier
/// segment has the best utility-to-resource ratio (and fits the residual
/// budget component-wise) is advanced until nothing fits.
inline Allocation greedy_allocate(const std::vector<ConcaveMajorant>& majorants,
                                  const ResourceVector& budget,
                                  const std::vector<double>& weights) {
  check_resource(budget);
  if (weights.size() != budget.size())
    throw std::invalid_argument("greedy_allocate: weights/budget mismatch");
  const size_t k = budget.size();

  Allocation alloc;
  alloc.residual_budget = budget;
  alloc.total_resource.assign(k, 0.0);

  std::vector<size_t> level(majorants.size(), 0);

  // Charge every task's starting vertex; detect infeasible floors.
  std::vector<int64_t> offenders;
  for (const auto& m : majorants) {
    const auto& v0 = m.vertices.front();
    if (!detail::fits(v0.resource, alloc.residual_budget))
      offenders.push_back(m.task_id);
    for (size_t j = 0; j < k; ++j) {
      alloc.residual_budget[j] -= v0.resource[j];
      alloc.total_resource[j] += v0.resource[j];
    }
    alloc.total_utility += v0.utility;
    alloc.chosen[m.task_id] = v0.config_id;
  }
  if (!offenders.empty())
    throw InfeasibleError("greedy_allocate: minimum resource demands exceed budget",
                          offenders);

  while (true) {
    double best_ratio = -1.0;
    size_t best_task = majorants.size();
    for (size_t i = 0; i < majorants.size(); ++i) {
      const auto& m = majorants[i];
      if (level[i] + 1 >= m.vertices.size()) continue;
      const auto& cur = m.vertices[level[i]];
      const auto& nxt = m.vertices[level[i] + 1];
      ResourceVector need(k);
      for (size_t j = 0; j < k; ++j)
        need[j] = nxt.resource[j] - cur.resource[j];
      if (!detail::fits(need, alloc.residual_budget)) continue;
      const double dc = m.compound[level[i] + 1] - m.compound[level[i]];
      const double du = nxt.utility - cur.utility;
      const double ratio = dc > 0.0 ? du / dc
                                    : std::numeric_limits<double>::infinity();
      // Ties resolve toward the lower task_id, then the lower config_id,
      // for reproducible plans.
      if (ratio > best_ratio ||
          (ratio == best_ratio && best_task < majorants.size() &&
           (m.task_id < majorants[best_task].task_id ||
            (m.task_id == majorants[best_task].task_id &&
             nxt.config_id <
                 majorants[best_task].vertices[level[best_task] + 1].config_id)))) {
        best_ratio = ratio;
        best_task = i;
      }
    }
    if (best_task >= majorants.size()) break;

    const auto& m = majorants[best_task];
    const auto& cur = m.vertices[level[best_task]];
    const auto& nxt = m.vertices[level[best_task] + 1];
    for (size_t j = 0; j < k; ++j) {
      const double d = nxt.resource[j] - cur.resource[j];
      alloc.residual_budget[j] -= d;
      alloc.total_resource[j] += d;
    }
    alloc.total_utility += nxt.utility - cur.utility;
    alloc.chosen[m.task_id] = nxt.config_id;
    ++level[best_task];
  }
  return alloc;
}

inline Allocation greedy_allocate(const std::vector<TaskModel>& tasks,
                                  const ResourceVector& budget,
                                  const std::vector<double>& weights) {
  std::vector<ConcaveMajorant> majorants;
  majorants.reserve(tasks.size());
  for (const auto& t : tasks) majorants.push_back(concave_majorant(t, weights));
  return greedy_allocate(majorants, budget, weights);
}

/// Public entry point: majorant construction over all tasks followed by
/// the greedy ascent.
inline Allocation solve(const std::vector<TaskModel>& tasks,
                        const ResourceVector& budget,
                        const std::vector<double>& weights) {
  return greedy_allocate(tasks, budget, weights);
}

/// Single-resource convenience used throughout the radar managers.
inline Allocation solve(const std::vector<TaskModel>& tasks, double budget_s) {
  return solve(tasks, ResourceVector{budget_s}, {1.0});
}

}  // namespace radnav::qram
