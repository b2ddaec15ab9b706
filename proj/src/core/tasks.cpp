/*
 *  Copyright 2026 The EIM Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#include "core/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "core/errors.hpp"

namespace eim {
namespace {

constexpr int kKnots = 5;

// m x 5 matrix mapping knot values (start, via0, via1, via2, goal) to the
// natural cubic spline evaluated at m evenly spaced abscissae.
Matrix spline_basis(int m) {
  const double h = 1.0 / (kKnots - 1);
  // Interior second derivatives: T M = (6 / h^2) D y.
  Eigen::Matrix3d t;
  t << 4, 1, 0, 1, 4, 1, 0, 1, 4;
  Eigen::Matrix<double, 3, kKnots> dmat = Eigen::Matrix<double, 3, kKnots>::Zero();
  for (int i = 0; i < 3; ++i) {
    dmat(i, i) = 1.0;
    dmat(i, i + 1) = -2.0;
    dmat(i, i + 2) = 1.0;
  }
  Eigen::Matrix<double, kKnots, kKnots> second = Eigen::Matrix<double, kKnots, kKnots>::Zero();
  second.middleRows(1, 3) = t.inverse() * dmat * (6.0 / (h * h));

  Matrix basis(m, kKnots);
  for (int j = 0; j < m; ++j) {
    const double x = m == 1 ? 0.0 : static_cast<double>(j) / (m - 1);
    const int seg = std::min(kKnots - 2, static_cast<int>(x / h));
    const double a = (seg + 1) * h - x, b = x - seg * h;
    Eigen::Matrix<double, 1, kKnots> row = Eigen::Matrix<double, 1, kKnots>::Zero();
    row(seg) += a / h;
    row(seg + 1) += b / h;
    row += second.row(seg) * ((a * a * a / h - a * h) / 6.0);
    row += second.row(seg + 1) * ((b * b * b / h - b * h) / 6.0);
    basis.row(j) = row;
  }
  return basis;
}

const Matrix& cached_basis(int m) {
  static thread_local std::map<int, Matrix> cache;
  auto it = cache.find(m);
  if (it == cache.end()) it = cache.emplace(m, spline_basis(m)).first;
  return it->second;
}

Vector knots(const Vector& via, const ObstacleConfig& cfg) {
  if (via.size() != 3) throw InputError("obstacle task: via vector must have 3 entries");
  Vector k(kKnots);
  k << cfg.start_y, via[0], via[1], via[2], cfg.goal_y;
  return k;
}

struct ClearanceDetail {
  Vector value;
  std::array<int, 3> argmin{};
  Vector ys;
};

ClearanceDetail clearance_detail(const Vector& via, const Vector& heights, const ObstacleConfig& cfg, int m) {
  if (heights.size() != 3) throw InputError("obstacle task: context must have 3 obstacle heights");
  ClearanceDetail out;
  out.ys = cached_basis(m) * knots(via, cfg);
  out.value.resize(3);
  for (int i = 0; i < 3; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      const double x = m == 1 ? 0.0 : static_cast<double>(j) / (m - 1);
      const double dist = std::hypot(x - cfg.obstacle_x[i], out.ys[j] - heights[i]);
      if (dist < best) {
        best = dist;
        out.argmin[i] = j;
      }
    }
    out.value[i] = best - cfg.radius;
  }
  return out;
}

}  // namespace

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kRandomGmm: return "random_gmm";
    case TaskKind::kRobotLine: return "robot_line";
    case TaskKind::kObstacle: return "obstacle";
  }
  return "unknown";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "random_gmm") return TaskKind::kRandomGmm;
  if (s == "robot_line") return TaskKind::kRobotLine;
  if (s == "obstacle") return TaskKind::kObstacle;
  throw ConfigError("unknown task '" + s + "' (valid: random_gmm, robot_line, obstacle)");
}

Gmm random_gmm(int dim, int components, std::uint64_t seed) {
  if (dim < 1 || components < 1) throw InputError("random_gmm: dim and components must be positive");
  Rng rng(seed, stream::kTask);
  std::vector<Gaussian> comps;
  for (int k = 0; k < components; ++k) {
    Vector mean(dim);
    for (int i = 0; i < dim; ++i) mean[i] = -5.0 + 10.0 * rng.uniform();
    Matrix a(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) a(i, j) = rng.normal() / std::sqrt(static_cast<double>(dim));
    Matrix cov = a * a.transpose() + 0.5 * Matrix::Identity(dim, dim);
    comps.emplace_back(std::move(mean), 0.5 * (cov + cov.transpose()));
  }
  std::gamma_distribution<double> gamma(5.0, 1.0);
  Vector w(components);
  for (int k = 0; k < components; ++k) w[k] = gamma(rng);
  w /= w.sum();
  w = w.cwiseMax(0.05);
  w /= w.sum();
  return Gmm(std::move(comps), Categorical(w));
}

TaskSpec random_gmm_spec(const Gmm& target, std::uint64_t seed) {
  TaskSpec spec;
  spec.name = "random_gmm";
  spec.kind = TaskKind::kRandomGmm;
  spec.dim = target.dim();
  spec.seed = seed;
  spec.constants = {{"mean_low", -5.0}, {"mean_high", 5.0}, {"cov_jitter", 0.5},
                    {"dirichlet_alpha", 5.0}, {"weight_floor", 0.05},
                    {"components", static_cast<double>(target.num_components())}};
  spec.target = target;
  return spec;
}

TaskData gen_random_gmm_task(int dim, int components, std::uint64_t seed, const SplitCounts& counts) {
  if (counts.train < 1 || counts.test < 1 || counts.validation < 1) throw InputError("task: counts must be positive");
  TaskData data;
  const Gmm target = random_gmm(dim, components, seed);
  data.spec = random_gmm_spec(target, seed);
  data.spec.counts = counts;
  Rng base(seed, stream::kTask);
  Rng r1 = base.derive(1), r2 = base.derive(2), r3 = base.derive(3);
  data.train = target.sample(static_cast<std::size_t>(counts.train), r1).x;
  data.test = target.sample(static_cast<std::size_t>(counts.test), r2).x;
  data.validation = target.sample(static_cast<std::size_t>(counts.validation), r3).x;
  return data;
}

Eigen::Vector2d RobotArm::forward_kinematics(const Vector& angles) const {
  if (angles.size() != link_lengths.size()) throw InputError("forward_kinematics: expected one angle per link");
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  double cum = 0.0;
  for (Eigen::Index i = 0; i < angles.size(); ++i) {
    cum += angles[i];
    p += link_lengths[i] * Eigen::Vector2d(std::cos(cum), std::sin(cum));
  }
  return p;
}

Matrix RobotArm::jacobian(const Vector& angles) const {
  if (angles.size() != link_lengths.size()) throw InputError("jacobian: expected one angle per link");
  const Eigen::Index n = angles.size();
  Matrix dx(2, n);
  Vector c(n), s(n);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cum += angles[i];
    c[i] = link_lengths[i] * std::cos(cum);
    s[i] = link_lengths[i] * std::sin(cum);
  }
  // Joint j moves every link from j on.
  double sc = 0.0, ss = 0.0;
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    sc += c[j];
    ss += s[j];
    dx(0, j) = -ss;
    dx(1, j) = sc;
  }
  return dx;
}

double distance_to_line(const Eigen::Vector2d& p, const RobotLineConfig& cfg) {
  const double y = std::clamp(p.y(), cfg.line_y_min, cfg.line_y_max);
  return std::hypot(p.x() - cfg.line_x, p.y() - y);
}

std::optional<Vector> solve_ik(const Eigen::Vector2d& goal, Vector q, const RobotLineConfig& cfg) {
  const double lambda2 = cfg.damping * cfg.damping;
  for (int step = 0; step < cfg.ik_steps; ++step) {
    Eigen::Vector2d e = goal - cfg.arm.forward_kinematics(q);
    const double err = e.norm();
    if (err <= cfg.tolerance) return q;
    if (err > cfg.max_step) e *= cfg.max_step / err;
    const Matrix j = cfg.arm.jacobian(q);
    const Eigen::Matrix2d jj = j * j.transpose() + lambda2 * Eigen::Matrix2d::Identity();
    q += j.transpose() * jj.ldlt().solve(e);
  }
  if ((goal - cfg.arm.forward_kinematics(q)).norm() <= cfg.tolerance) return q;
  return std::nullopt;
}

double elbow_statistic(const Vector& angles) { return angles.tail(angles.size() - 1).sum(); }

FeatureMap end_effector_features(const RobotArm& arm) {
  FeatureMap f;
  f.name = "end_effector";
  f.width = 2;
  f.eval = [arm](const Vector& x, const Vector&) -> Vector { return arm.forward_kinematics(x); };
  f.jacobian = [arm](const Vector& x, const Vector&) -> Matrix { return arm.jacobian(x); };
  return f;
}

TaskSpec robot_line_spec(const RobotLineConfig& cfg, std::uint64_t seed) {
  TaskSpec spec;
  spec.name = "robot_line";
  spec.kind = TaskKind::kRobotLine;
  spec.dim = cfg.arm.links();
  spec.seed = seed;
  spec.constants = {{"links", static_cast<double>(cfg.arm.links())},
                    {"link_length", cfg.arm.link_lengths[0]},
                    {"line_x", cfg.line_x},
                    {"line_y_min", cfg.line_y_min},
                    {"line_y_max", cfg.line_y_max},
                    {"init_std", cfg.init_std},
                    {"damping", cfg.damping},
                    {"ik_max_step", cfg.max_step},
                    {"ik_steps", static_cast<double>(cfg.ik_steps)},
                    {"tolerance", cfg.tolerance}};
  spec.features = end_effector_features(cfg.arm);
  spec.line_distance = [cfg](const Vector& x) { return distance_to_line(cfg.arm.forward_kinematics(x), cfg); };
  return spec;
}

TaskData gen_robot_line_task(const SplitCounts& counts, std::uint64_t seed, const RobotLineConfig& cfg) {
  if (counts.train < 1 || counts.test < 1 || counts.validation < 1) throw InputError("task: counts must be positive");
  if (!(cfg.max_step > 0.0) || !(cfg.damping >= 0.0) || cfg.ik_steps < 1) throw ConfigError("robot_line: invalid IK settings");
  TaskData data;
  data.spec = robot_line_spec(cfg, seed);
  data.spec.counts = counts;
  const int d = cfg.arm.links();
  auto generate = [&](int n, std::uint64_t split) {
    Matrix out(n, d);
    Rng rng = Rng(seed, stream::kTask).derive(split);
    long attempts = 0;
    for (int i = 0; i < n;) {
      ++attempts;
      if (attempts > 100 && static_cast<double>(i) / static_cast<double>(attempts) < 0.01) {
        throw NumericalError("gen_robot_line_task: inverse kinematics acceptance rate below 1%");
      }
      const double y = cfg.line_y_min + (cfg.line_y_max - cfg.line_y_min) * rng.uniform();
      Vector start(d);
      for (int j = 0; j < d; ++j) start[j] = cfg.init_std * rng.normal();
      if (auto q = solve_ik(Eigen::Vector2d(cfg.line_x, y), start, cfg)) out.row(i++) = q->transpose();
    }
    return out;
  };
  data.train = generate(counts.train, 1);
  data.test = generate(counts.test, 2);
  data.validation = generate(counts.validation, 3);
  return data;
}

Matrix spline_points(const Vector& via, const ObstacleConfig& cfg, int m) {
  if (m < 2) throw InputError("spline_points: need at least two points");
  Matrix out(m, 2);
  out.col(1) = cached_basis(m) * knots(via, cfg);
  for (int j = 0; j < m; ++j) out(j, 0) = static_cast<double>(j) / (m - 1);
  return out;
}

Vector clearances(const Vector& via, const Vector& heights, const ObstacleConfig& cfg, int m) {
  return clearance_detail(via, heights, cfg, m).value;
}

bool trajectory_success(const Vector& via, const Vector& heights, const ObstacleConfig& cfg, int m) {
  return clearances(via, heights, cfg, m).minCoeff() > 0.0;
}

FeatureMap clearance_features(const ObstacleConfig& cfg) {
  FeatureMap f;
  f.name = "clearance";
  f.width = 3;
  f.eval = [cfg](const Vector& x, const Vector& ctx) -> Vector { return clearances(x, ctx, cfg, cfg.resolution); };
  f.jacobian = [cfg](const Vector& x, const Vector& ctx) -> Matrix {
    const ClearanceDetail det = clearance_detail(x, ctx, cfg, cfg.resolution);
    const Matrix& basis = cached_basis(cfg.resolution);
    Matrix jac = Matrix::Zero(3, 3);
    for (int i = 0; i < 3; ++i) {
      const int j = det.argmin[i];
      const double dist = det.value[i] + cfg.radius;
      if (dist <= 0.0) continue;
      const double dy = (det.ys[j] - ctx[i]) / dist;
      jac.row(i) = dy * basis.block(j, 1, 1, 3);
    }
    return jac;
  };
  return f;
}

Vector sample_expert_via(const Vector& heights, const ObstacleConfig& cfg, Rng& rng) {
  Vector via(3);
  for (int i = 0; i < 3; ++i) {
    const double top_lo = heights[i] + cfg.radius, bottom_hi = heights[i] - cfg.radius;
    const double top = std::max(0.0, 1.0 - top_lo), bottom = std::max(0.0, bottom_hi);
    const double p_above = top + bottom > 0.0 ? top / (top + bottom) : 0.5;
    const bool above = rng.uniform() < p_above;
    const double gap = above ? top : bottom;
    const double mid = above ? 0.5 * (top_lo + 1.0) : 0.5 * bottom_hi;
    const double v = mid + cfg.spread * gap * rng.normal();
    via[i] = std::clamp(v, cfg.clip_min, cfg.clip_max);
  }
  return via;
}

TaskSpec obstacle_spec(const ObstacleConfig& cfg, std::uint64_t seed) {
  TaskSpec spec;
  spec.name = "obstacle";
  spec.kind = TaskKind::kObstacle;
  spec.dim = 3;
  spec.context_dim = 3;
  spec.seed = seed;
  spec.constants = {{"obstacle_x0", cfg.obstacle_x[0]}, {"obstacle_x1", cfg.obstacle_x[1]},
                    {"obstacle_x2", cfg.obstacle_x[2]}, {"radius", cfg.radius},
                    {"height_min", cfg.height_min},     {"height_max", cfg.height_max},
                    {"start_y", cfg.start_y},           {"goal_y", cfg.goal_y},
                    {"clip_min", cfg.clip_min},         {"clip_max", cfg.clip_max},
                    {"spread", cfg.spread},             {"resolution", static_cast<double>(cfg.resolution)}};
  spec.features = clearance_features(cfg);
  spec.success = [cfg](const Vector& x, const Vector& ctx) { return trajectory_success(x, ctx, cfg, cfg.resolution); };
  return spec;
}

TaskData gen_obstacle_task(int n_contexts, int samples_per_context, std::uint64_t seed, const ObstacleConfig& cfg) {
  if (n_contexts < 1 || samples_per_context < 1) throw InputError("gen_obstacle_task: counts must be positive");
  TaskData data;
  data.spec = obstacle_spec(cfg, seed);
  const int n = n_contexts * samples_per_context;
  data.spec.counts = {n, n, n};
  data.spec.constants["contexts"] = n_contexts;
  data.spec.constants["samples_per_context"] = samples_per_context;
  auto generate = [&](std::uint64_t split, Matrix& xs, Matrix& ctxs) {
    xs.resize(n, 3);
    ctxs.resize(n, 3);
    Rng rng = Rng(seed, stream::kTask).derive(split);
    for (int c = 0; c < n_contexts; ++c) {
      Vector h(3);
      for (int i = 0; i < 3; ++i) h[i] = cfg.height_min + (cfg.height_max - cfg.height_min) * rng.uniform();
      for (int s = 0; s < samples_per_context; ++s) {
        const int row = c * samples_per_context + s;
        ctxs.row(row) = h.transpose();
        xs.row(row) = sample_expert_via(h, cfg, rng).transpose();
      }
    }
  };
  generate(1, data.train, data.train_contexts);
  generate(2, data.test, data.test_contexts);
  generate(3, data.validation, data.validation_contexts);
  return data;
}

}  // namespace eim
