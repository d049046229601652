#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "mosaic/core/errors.hpp"
#include "mosaic/core/rng.hpp"

namespace mosaic::sim {

struct EpisodeExhausted : ContractError {
  using ContractError::ContractError;
};

enum class Task : int { kReach = 0, kPush = 1, kPickPlace = 2, kStack = 3 };

enum class Role : int { kDemonstrator = 0, kImitator = 1 };

struct Morphology {
  Role role = Role::kImitator;
  double displacement_cap = 0.05;  // per-step delta in workspace units
};

inline Morphology imitator_morphology() { return {Role::kImitator, 0.05}; }
inline Morphology demonstrator_morphology() { return {Role::kDemonstrator, 0.045}; }

inline Morphology morphology_for(Role role) {
  return role == Role::kImitator ? imitator_morphology() : demonstrator_morphology();
}

inline const char* role_name(Role r) {
  return r == Role::kDemonstrator ? "demonstrator" : "imitator";
}

// (dx, dy) are fractions of the morphology displacement cap, grip > 0 closes.
struct Action {
  double dx = 0;
  double dy = 0;
  double grip = -1;
};

struct Vec2 {
  double x = 0;
  double y = 0;
};

inline double dist(const Vec2& a, const Vec2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Goal descriptor: for Reach source_entity is -1 and goal_entity names the
// target disc; for Push/PickPlace/Stack (source_entity, goal_entity) name the
// object to move and the zone/bin/base-block it must end on.
struct VariationSpec {
  int variation_id = 0;
  int source_entity = -1;
  int goal_entity = 0;
};

struct TaskSpec {
  Task task = Task::kReach;
  std::string name;
  int horizon = 32;
  int n_entities = 0;
  int n_movable = 0;  // movable entity ids are [0, n_movable)
  std::vector<VariationSpec> variations;

  int task_id() const { return static_cast<int>(task); }
  int n_variations() const { return static_cast<int>(variations.size()); }
};

namespace geom {
constexpr double kGraspRadius = 0.03;
constexpr double kReachThreshold = 0.04;
constexpr double kStackThreshold = 0.03;
constexpr double kZoneHalf = 0.055;    // push zones and pickplace bins
constexpr double kObjectHalf = 0.03;   // push objects and stack blocks
constexpr double kTargetRadius = 0.035;
constexpr double kMinSeparation = 0.08;
constexpr double kPlacementLo = 0.12;
constexpr double kPlacementHi = 0.88;
}  // namespace geom

// ------------------------------------------------------------ task registry

inline const std::vector<TaskSpec>& all_tasks() {
  static const std::vector<TaskSpec> kTasks = [] {
    std::vector<TaskSpec> ts;
    {
      TaskSpec t;
      t.task = Task::kReach;
      t.name = "reach";
      t.horizon = 32;
      t.n_entities = 4;
      t.n_movable = 0;
      for (int v = 0; v < 4; ++v) t.variations.push_back({v, -1, v});
      ts.push_back(std::move(t));
    }
    {
      TaskSpec t;
      t.task = Task::kPush;
      t.name = "push";
      t.horizon = 64;
      t.n_entities = 4;  // objects 0,1; zones 2,3
      t.n_movable = 2;
      int v = 0;
      for (int obj = 0; obj < 2; ++obj)
        for (int zone = 2; zone < 4; ++zone) t.variations.push_back({v++, obj, zone});
      ts.push_back(std::move(t));
    }
    {
      TaskSpec t;
      t.task = Task::kPickPlace;
      t.name = "pickplace";
      t.horizon = 64;
      t.n_entities = 4;  // objects 0,1; bins 2,3
      t.n_movable = 2;
      int v = 0;
      for (int obj = 0; obj < 2; ++obj)
        for (int bin = 2; bin < 4; ++bin) t.variations.push_back({v++, obj, bin});
      ts.push_back(std::move(t));
    }
    {
      TaskSpec t;
      t.task = Task::kStack;
      t.name = "stack";
      t.horizon = 64;
      t.n_entities = 2;  // two blocks, both movable
      t.n_movable = 2;
      t.variations.push_back({0, 0, 1});
      t.variations.push_back({1, 1, 0});
      ts.push_back(std::move(t));
    }
    return ts;
  }();
  return kTasks;
}

inline const TaskSpec& task_by_id(int id) {
  const auto& ts = all_tasks();
  check_config(id >= 0 && id < static_cast<int>(ts.size()), "unknown task id");
  return ts[id];
}

inline const TaskSpec& task_spec(Task t) { return task_by_id(static_cast<int>(t)); }

inline const TaskSpec& task_by_name(const std::string& name) {
  for (const auto& t : all_tasks())
    if (t.name == name) return t;
  throw ConfigError("unknown task name: " + name);
}

inline const VariationSpec& variation_spec(const TaskSpec& t, int variation_id) {
  check_config(variation_id >= 0 && variation_id < t.n_variations(),
               t.name + ": variation id " + std::to_string(variation_id) + " outside 0.." +
                   std::to_string(t.n_variations() - 1));
  return t.variations[variation_id];
}

// ---------------------------------------------------------------- world state

constexpr int kMaxEntities = 4;

struct WorldState {
  Task task = Task::kReach;
  int variation_id = 0;
  uint32_t seed = 0;
  Role role = Role::kImitator;
  double dcap = 0.05;

  Vec2 gripper;
  bool grip_closed = false;
  int held = -1;        // entity id or -1
  int last_moved = -1;  // most recently grasped entity; renders on top
  std::array<Vec2, kMaxEntities> entities{};
  int n_entities = 0;
  int step_count = 0;
  int horizon = 0;
  bool success_latched = false;
};

// Seeded collision-free layout. The layout stream is keyed on (task, seed)
// only, so a variation is purely a goal assignment over a shared scene
// distribution.
inline WorldState reset(const TaskSpec& task, int variation_id, uint32_t seed,
                        const Morphology& morph) {
  (void)variation_spec(task, variation_id);  // bounds check
  WorldState s;
  s.task = task.task;
  s.variation_id = variation_id;
  s.seed = seed;
  s.role = morph.role;
  s.dcap = morph.displacement_cap;
  s.n_entities = task.n_entities;
  s.horizon = task.horizon;

  Rng rng(Rng::hash_combine({0x6c61796f75743031ULL, static_cast<uint64_t>(task.task_id()), seed}));
  auto draw = [&rng]() {
    return Vec2{rng.uniform(geom::kPlacementLo, geom::kPlacementHi),
                rng.uniform(geom::kPlacementLo, geom::kPlacementHi)};
  };
  // Slot 0 is the gripper start; entities follow.
  std::vector<Vec2> placed;
  while (static_cast<int>(placed.size()) < task.n_entities + 1) {
    Vec2 p = draw();
    bool ok = true;
    for (const Vec2& q : placed) ok = ok && dist(p, q) >= geom::kMinSeparation;
    if (ok) placed.push_back(p);
  }
  s.gripper = placed[0];
  for (int i = 0; i < task.n_entities; ++i) s.entities[i] = placed[i + 1];
  return s;
}

inline bool is_success(const WorldState& s, const VariationSpec& var) {
  switch (s.task) {
    case Task::kReach:
      return dist(s.gripper, s.entities[var.goal_entity]) <= geom::kReachThreshold;
    case Task::kPush:
    case Task::kPickPlace: {
      const Vec2& obj = s.entities[var.source_entity];
      const Vec2& zone = s.entities[var.goal_entity];
      return std::abs(obj.x - zone.x) <= geom::kZoneHalf &&
             std::abs(obj.y - zone.y) <= geom::kZoneHalf;
    }
    case Task::kStack: {
      const Vec2& top = s.entities[var.source_entity];
      const Vec2& base = s.entities[var.goal_entity];
      return dist(top, base) <= geom::kStackThreshold && s.held != var.source_entity;
    }
  }
  return false;
}

inline bool is_success(const WorldState& s) {
  return is_success(s, variation_spec(task_by_id(static_cast<int>(s.task)), s.variation_id));
}

struct StepResult {
  WorldState state;
  bool success = false;
};

inline StepResult step(const WorldState& s, const Action& a) {
  if (s.step_count >= s.horizon)
    throw EpisodeExhausted("step past horizon (" + std::to_string(s.horizon) + ")");
  WorldState n = s;
  double dx = std::clamp(a.dx, -1.0, 1.0);
  double dy = std::clamp(a.dy, -1.0, 1.0);
  n.gripper.x = std::clamp(n.gripper.x + n.dcap * dx, 0.0, 1.0);
  n.gripper.y = std::clamp(n.gripper.y + n.dcap * dy, 0.0, 1.0);
  if (n.held >= 0) n.entities[n.held] = n.gripper;

  const TaskSpec& task = task_by_id(static_cast<int>(n.task));
  if (a.grip > 0) {
    n.grip_closed = true;
    if (n.held < 0) {
      int best = -1;
      double best_d = geom::kGraspRadius;
      for (int i = 0; i < task.n_movable; ++i) {
        double d = dist(n.gripper, n.entities[i]);
        if (d <= best_d) {
          best_d = d;
          best = i;
        }
      }
      if (best >= 0) {
        n.held = best;
        n.last_moved = best;
        n.entities[best] = n.gripper;
      }
    }
  } else {
    n.grip_closed = false;
    n.held = -1;
  }
  n.step_count += 1;
  bool succ = is_success(n, variation_spec(task, n.variation_id));
  n.success_latched = n.success_latched || succ;
  return {n, succ};
}

}  // namespace mosaic::sim
