#pragma once

#include <vector>

#include "mosaic/sim/world.hpp"

namespace mosaic::sim {

// Proportional controller toward the active phase sub-goal. Phases:
// approach -> grasp -> transport -> release; Reach has only the approach
// phase. Components saturate at the per-step cap.
inline Action expert_action(const WorldState& s, const VariationSpec& var) {
  auto toward = [&s](const Vec2& goal) {
    Action a;
    a.dx = std::clamp((goal.x - s.gripper.x) / s.dcap, -1.0, 1.0);
    a.dy = std::clamp((goal.y - s.gripper.y) / s.dcap, -1.0, 1.0);
    return a;
  };

  if (s.task == Task::kReach) {
    Action a = toward(s.entities[var.goal_entity]);
    a.grip = -1;
    return a;
  }

  const Vec2& src = s.entities[var.source_entity];
  const Vec2& dst = s.entities[var.goal_entity];
  const double release_eps = s.task == Task::kStack ? 0.012 : 0.02;
  const double grasp_eps = 0.012;

  if (s.held == var.source_entity) {
    // transport; release when the carried object is close enough to the goal
    if (dist(s.gripper, dst) <= release_eps) {
      Action a;
      a.grip = -1;  // release
      return a;
    }
    Action a = toward(dst);
    a.grip = 1;
    return a;
  }
  if (is_success(s, var)) {
    // already solved (e.g. just released); hold position
    Action a;
    a.grip = -1;
    return a;
  }
  // approach, then close once on top of the object
  if (dist(s.gripper, src) <= grasp_eps) {
    Action a = toward(src);
    a.grip = 1;
    return a;
  }
  Action a = toward(src);
  a.grip = -1;
  return a;
}

struct ExpertEpisode {
  std::vector<WorldState> states;  // length T+1
  std::vector<Action> actions;     // length T
  bool success = false;
};

// Closed-loop rollout of the scripted expert. Stops a few steps after the
// first success so trailing frames show the solved scene; enforces a minimum
// number of actions so downstream windows always fit.
inline ExpertEpisode run_expert_episode(const TaskSpec& task, int variation_id, uint32_t seed,
                                        const Morphology& morph, int min_actions = 8,
                                        int post_success_steps = 2) {
  const VariationSpec& var = variation_spec(task, variation_id);
  ExpertEpisode ep;
  WorldState s = reset(task, variation_id, seed, morph);
  ep.states.push_back(s);
  int since_success = -1;
  while (s.step_count < task.horizon) {
    Action a = expert_action(s, var);
    StepResult r = step(s, a);
    s = r.state;
    ep.actions.push_back(a);
    ep.states.push_back(s);
    if (s.success_latched && since_success < 0) since_success = 0;
    if (since_success >= 0) ++since_success;
    if (since_success > post_success_steps &&
        static_cast<int>(ep.actions.size()) >= min_actions) {
      break;
    }
  }
  ep.success = s.success_latched;
  return ep;
}

// Success rate of the scripted expert over consecutive seeds.
inline double expert_success_rate(const TaskSpec& task, int variation_id, uint32_t seed0,
                                  int n_seeds, const Morphology& morph) {
  int ok = 0;
  for (int i = 0; i < n_seeds; ++i) {
    ExpertEpisode ep = run_expert_episode(task, variation_id, seed0 + static_cast<uint32_t>(i), morph);
    ok += ep.success ? 1 : 0;
  }
  return static_cast<double>(ok) / n_seeds;
}

}  // namespace mosaic::sim
