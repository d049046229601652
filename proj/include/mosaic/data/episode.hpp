#pragma once

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mosaic/data/png_io.hpp"
#include "mosaic/sim/expert.hpp"
#include "mosaic/sim/render.hpp"

namespace mosaic::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Imitator-side supervision unit: T+1 observations, T actions.
struct Trajectory {
  int task_id = 0;
  int variation_id = 0;
  uint32_t seed = 0;
  sim::Role morphology = sim::Role::kImitator;
  bool success = false;
  std::vector<Image> observations;
  std::vector<sim::Action> actions;

  int length() const { return static_cast<int>(actions.size()); }
};

struct DemoVideo {
  int task_id = 0;
  int variation_id = 0;
  uint32_t seed = 0;
  sim::Role morphology = sim::Role::kDemonstrator;
  std::vector<Image> frames;
};

constexpr int kDemoFrames = 4;      // T_d
constexpr int kTrainWindow = 7;     // T_o at train time
constexpr int kMinEpisodeActions = kTrainWindow + 1;

// Uniformly spaced indices over [0, n-1] including both endpoints.
inline std::vector<int> subsample_indices(int n, int count) {
  check(n >= 1 && count >= 1, "subsample_indices: empty");
  std::vector<int> idx(count);
  if (count == 1) {
    idx[0] = 0;
    return idx;
  }
  for (int i = 0; i < count; ++i)
    idx[i] = static_cast<int>(std::llround(static_cast<double>(i) * (n - 1) / (count - 1)));
  return idx;
}

inline DemoVideo subsample_demo(const Trajectory& t, int count = kDemoFrames) {
  DemoVideo d;
  d.task_id = t.task_id;
  d.variation_id = t.variation_id;
  d.seed = t.seed;
  d.morphology = t.morphology;
  for (int i : subsample_indices(static_cast<int>(t.observations.size()), count))
    d.frames.push_back(t.observations[i]);
  return d;
}

// Closed-loop expert rollout with rendering. Unsuccessful episodes are
// discarded and retried with the next seed; the returned trajectory records
// the seed that actually succeeded. Actions are stored at 32-bit precision,
// matching the on-disk representation.
inline Trajectory collect_episode(const sim::TaskSpec& task, int variation_id, uint32_t seed,
                                  const sim::Morphology& morph) {
  for (int attempt = 0; attempt < 10; ++attempt) {
    uint32_t s = seed + static_cast<uint32_t>(attempt);
    sim::ExpertEpisode ep =
        sim::run_expert_episode(task, variation_id, s, morph, kMinEpisodeActions);
    if (!ep.success) continue;
    Trajectory t;
    t.task_id = task.task_id();
    t.variation_id = variation_id;
    t.seed = s;
    t.morphology = morph.role;
    t.success = true;
    t.observations.reserve(ep.states.size());
    for (const auto& st : ep.states) t.observations.push_back(sim::render(st, morph));
    t.actions.reserve(ep.actions.size());
    for (const auto& a : ep.actions) {
      sim::Action q;
      q.dx = static_cast<float>(a.dx);
      q.dy = static_cast<float>(a.dy);
      q.grip = static_cast<float>(a.grip);
      t.actions.push_back(q);
    }
    return t;
  }
  throw DataError("expert failed 10 consecutive seeds on " + task.name + " variation " +
                  std::to_string(variation_id) + " from seed " + std::to_string(seed));
}

// ------------------------------------------------------------ on-disk format
// One directory per episode: frame_00000.png ... plus episode.json with
// {task, variation, seed, morphology, success, actions}.

inline std::string frame_filename(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d.png", i);
  return buf;
}

inline void save_episode(const fs::path& dir, const Trajectory& t) {
  fs::create_directories(dir);
  for (size_t i = 0; i < t.observations.size(); ++i)
    write_png((dir / frame_filename(static_cast<int>(i))).string(), t.observations[i]);
  json j;
  j["task"] = sim::task_by_id(t.task_id).name;
  j["variation"] = t.variation_id;
  j["seed"] = t.seed;
  j["morphology"] = sim::role_name(t.morphology);
  j["success"] = t.success;
  json acts = json::array();
  for (const auto& a : t.actions)
    acts.push_back({static_cast<float>(a.dx), static_cast<float>(a.dy), static_cast<float>(a.grip)});
  j["actions"] = std::move(acts);
  std::ofstream f(dir / "episode.json", std::ios::trunc);
  check_data(f.good(), "cannot write episode.json in " + dir.string());
  f << j.dump(2) << "\n";
}

inline Trajectory load_episode(const fs::path& dir) {
  std::ifstream f(dir / "episode.json");
  check_data(f.good(), "missing episode.json in " + dir.string());
  json j;
  f >> j;
  Trajectory t;
  t.task_id = sim::task_by_name(j.at("task").get<std::string>()).task_id();
  t.variation_id = j.at("variation").get<int>();
  t.seed = j.at("seed").get<uint32_t>();
  t.morphology = j.at("morphology").get<std::string>() == "demonstrator"
                     ? sim::Role::kDemonstrator
                     : sim::Role::kImitator;
  t.success = j.at("success").get<bool>();
  for (const auto& a : j.at("actions")) {
    sim::Action act;
    act.dx = a.at(0).get<float>();
    act.dy = a.at(1).get<float>();
    act.grip = a.at(2).get<float>();
    t.actions.push_back(act);
  }
  int n_frames = static_cast<int>(t.actions.size()) + 1;
  t.observations.reserve(n_frames);
  for (int i = 0; i < n_frames; ++i)
    t.observations.push_back(read_png((dir / frame_filename(i)).string()));
  return t;
}

}  // namespace mosaic::data
