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

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "core/distributions.hpp"
#include "core/ratio_estimator.hpp"

namespace eim {

enum class TaskKind { kRandomGmm, kRobotLine, kObstacle };

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

struct SplitCounts {
  int train = 10000;
  int test = 5000;
  int validation = 5000;
};

/// Task description plus the ground-truth handles used by evaluation.
struct TaskSpec {
  std::string name;
  TaskKind kind = TaskKind::kRandomGmm;
  int dim = 0;
  int context_dim = 0;
  std::uint64_t seed = 0;
  SplitCounts counts;
  /// Every numeric constant that shaped the data, for run metadata.
  std::map<std::string, double> constants;
  std::optional<Gmm> target;
  std::optional<FeatureMap> features;
  std::function<bool(const Vector& x, const Vector& context)> success;
  /// Robot task: distance of the end effector of posture x to the target line.
  std::function<double(const Vector& x)> line_distance;
};

struct TaskData {
  TaskSpec spec;
  Matrix train, test, validation;
  /// Conditional tasks only: contexts aligned row by row with the samples.
  Matrix train_contexts, test_contexts, validation_contexts;
};

// Random GMM targets.

/// Means U[-5, 5]^d, covariances A A^T + 0.5 I with A ~ N(0, 1/d), weights
/// Dirichlet(5) floored at 0.05 and renormalized.
Gmm random_gmm(int dim, int components, std::uint64_t seed);
TaskSpec random_gmm_spec(const Gmm& target, std::uint64_t seed);
TaskData gen_random_gmm_task(int dim, int components, std::uint64_t seed, const SplitCounts& counts = {});

// Planar robot.

struct RobotArm {
  Vector link_lengths = Vector::Ones(10);
  int links() const { return static_cast<int>(link_lengths.size()); }
  double reach() const { return link_lengths.sum(); }
  /// End effector of a cumulative-angle chain.
  Eigen::Vector2d forward_kinematics(const Vector& angles) const;
  /// 2 x links Jacobian of the end effector.
  Matrix jacobian(const Vector& angles) const;
};

struct RobotLineConfig {
  RobotArm arm;
  double line_x = 7.0;
  double line_y_min = -4.0;
  double line_y_max = 4.0;
  double init_std = 0.5;
  double damping = 0.1;
  /// Task-space error is clamped to this length in every IK step.
  double max_step = 0.5;
  int ik_steps = 200;
  double tolerance = 1e-2;
};

/// Distance of `p` to the segment x = line_x, y in [y_min, y_max].
double distance_to_line(const Eigen::Vector2d& p, const RobotLineConfig& cfg);
/// Damped least squares from `start` toward `goal`; nullopt when the final
/// error exceeds the tolerance.
std::optional<Vector> solve_ik(const Eigen::Vector2d& goal, Vector start, const RobotLineConfig& cfg);
/// Sign of the summed relative joint bends; separates elbow-up and elbow-down
/// solutions for the same goal.
double elbow_statistic(const Vector& angles);
/// End-effector feature map with its analytic Jacobian.
FeatureMap end_effector_features(const RobotArm& arm);
TaskSpec robot_line_spec(const RobotLineConfig& cfg, std::uint64_t seed);
TaskData gen_robot_line_task(const SplitCounts& counts, std::uint64_t seed, const RobotLineConfig& cfg = {});

// Obstacle avoidance.

struct ObstacleConfig {
  std::array<double, 3> obstacle_x = {0.25, 0.5, 0.75};
  double radius = 0.08;
  double height_min = 0.2;
  double height_max = 0.8;
  double start_y = 0.5;
  double goal_y = 0.5;
  double clip_min = 0.02;
  double clip_max = 0.98;
  /// Via-height spread as a fraction of the chosen gap.
  double spread = 0.1;
  int resolution = 200;
};

/// Natural cubic spline through (0, start), the three via points and
/// (1, goal), evaluated at `m` evenly spaced abscissae in [0, 1] (m x 2).
Matrix spline_points(const Vector& via, const ObstacleConfig& cfg, int m);
/// Minimum distance of the trajectory to each obstacle minus the radius.
Vector clearances(const Vector& via, const Vector& heights, const ObstacleConfig& cfg, int m);
bool trajectory_success(const Vector& via, const Vector& heights, const ObstacleConfig& cfg, int m);
FeatureMap clearance_features(const ObstacleConfig& cfg);
/// Expert via points for one context.
Vector sample_expert_via(const Vector& heights, const ObstacleConfig& cfg, Rng& rng);
TaskSpec obstacle_spec(const ObstacleConfig& cfg, std::uint64_t seed);
/// `n_contexts` training contexts with `samples_per_context` each; test and
/// validation use fresh contexts of the same size.
TaskData gen_obstacle_task(int n_contexts, int samples_per_context, std::uint64_t seed,
                           const ObstacleConfig& cfg = {});

}  // namespace eim
