#pragma once

#include <map>
#include <memory>
#include <unordered_map>

#include "mosaic/data/episode.hpp"

namespace mosaic::data {

// Instance-seed split: training data draws from [kTrainSeedLo, kTrainSeedHi),
// evaluation episodes and demos from [kEvalSeedLo, kEvalSeedHi).
constexpr uint32_t kTrainSeedLo = 0;
constexpr uint32_t kTrainSeedHi = 100000;
constexpr uint32_t kEvalSeedLo = 100000;
constexpr uint32_t kEvalSeedHi = 200000;

struct EpisodeRecord {
  std::string dir;
  int task_id = 0;
  int variation_id = 0;
  uint32_t seed = 0;
  sim::Role morphology = sim::Role::kImitator;
  int length = 0;  // action count
  bool success = false;
};

struct DatasetManifest {
  std::string root;
  std::vector<std::string> tasks;
  int episodes_per_variation = 0;
  uint32_t train_seed_lo = kTrainSeedLo, train_seed_hi = kTrainSeedHi;
  uint32_t eval_seed_lo = kEvalSeedLo, eval_seed_hi = kEvalSeedHi;
  std::vector<EpisodeRecord> episodes;
};

inline json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["version"] = 1;
  j["tasks"] = m.tasks;
  j["episodes_per_variation"] = m.episodes_per_variation;
  j["splits"] = {{"train_seed_lo", m.train_seed_lo},
                 {"train_seed_hi", m.train_seed_hi},
                 {"eval_seed_lo", m.eval_seed_lo},
                 {"eval_seed_hi", m.eval_seed_hi}};
  json eps = json::array();
  for (const auto& e : m.episodes) {
    eps.push_back({{"dir", e.dir},
                   {"task", sim::task_by_id(e.task_id).name},
                   {"variation", e.variation_id},
                   {"seed", e.seed},
                   {"morphology", sim::role_name(e.morphology)},
                   {"length", e.length},
                   {"success", e.success}});
  }
  j["episodes"] = std::move(eps);
  return j;
}

inline DatasetManifest manifest_from_json(const json& j, const std::string& root) {
  DatasetManifest m;
  m.root = root;
  m.tasks = j.at("tasks").get<std::vector<std::string>>();
  m.episodes_per_variation = j.at("episodes_per_variation").get<int>();
  m.train_seed_lo = j.at("splits").at("train_seed_lo").get<uint32_t>();
  m.train_seed_hi = j.at("splits").at("train_seed_hi").get<uint32_t>();
  m.eval_seed_lo = j.at("splits").at("eval_seed_lo").get<uint32_t>();
  m.eval_seed_hi = j.at("splits").at("eval_seed_hi").get<uint32_t>();
  check_data(m.train_seed_hi <= m.eval_seed_lo || m.eval_seed_hi <= m.train_seed_lo,
             "train and eval seed ranges overlap");
  for (const auto& e : j.at("episodes")) {
    EpisodeRecord r;
    r.dir = e.at("dir").get<std::string>();
    r.task_id = sim::task_by_name(e.at("task").get<std::string>()).task_id();
    r.variation_id = e.at("variation").get<int>();
    r.seed = e.at("seed").get<uint32_t>();
    r.morphology = e.at("morphology").get<std::string>() == "demonstrator"
                       ? sim::Role::kDemonstrator
                       : sim::Role::kImitator;
    r.length = e.at("length").get<int>();
    r.success = e.at("success").get<bool>();
    m.episodes.push_back(std::move(r));
  }
  return m;
}

inline std::string episode_dirname(const sim::TaskSpec& task, int variation, sim::Role role,
                                   uint32_t seed) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s_v%d_%s_s%06u", task.name.c_str(), variation,
                sim::role_name(role), seed);
  return buf;
}

// Collects episodes_per_variation successful expert episodes per morphology
// for every variation of every requested task, and writes the manifest.
// Expert behaviour is validated per variation before any rendering happens.
inline DatasetManifest build_dataset(const std::vector<std::string>& task_names,
                                     int episodes_per_variation, const std::string& out_path,
                                     int expert_validation_seeds = 100,
                                     double expert_required = 0.95) {
  check_data(episodes_per_variation > 0, "episodes_per_variation must be positive");
  check_data(!task_names.empty(), "no tasks requested");
  fs::path root(out_path);
  fs::create_directories(root / "episodes");

  DatasetManifest m;
  m.root = out_path;
  m.tasks = task_names;
  m.episodes_per_variation = episodes_per_variation;

  for (const auto& name : task_names) {
    const sim::TaskSpec& task = sim::task_by_name(name);
    for (int v = 0; v < task.n_variations(); ++v) {
      for (sim::Role role : {sim::Role::kDemonstrator, sim::Role::kImitator}) {
        sim::Morphology morph = sim::morphology_for(role);
        double rate = sim::expert_success_rate(task, v, 500000, expert_validation_seeds, morph);
        check_data(rate >= expert_required,
                   "expert under " + std::to_string(expert_required) + " on " + task.name +
                       " variation " + std::to_string(v));
        uint32_t cursor = m.train_seed_lo;
        for (int e = 0; e < episodes_per_variation; ++e) {
          Trajectory t = collect_episode(task, v, cursor, morph);
          cursor = t.seed + 1;
          check_data(t.seed < m.train_seed_hi, "train seed range exhausted");
          EpisodeRecord r;
          r.dir = episode_dirname(task, v, role, t.seed);
          r.task_id = t.task_id;
          r.variation_id = v;
          r.seed = t.seed;
          r.morphology = role;
          r.length = t.length();
          r.success = t.success;
          save_episode(root / "episodes" / r.dir, t);
          m.episodes.push_back(std::move(r));
        }
      }
    }
  }
  std::ofstream f(root / "manifest.json", std::ios::trunc);
  check_data(f.good(), "cannot write manifest.json under " + out_path);
  f << manifest_to_json(m).dump(2) << "\n";
  return m;
}

inline DatasetManifest load_manifest(const std::string& root) {
  std::ifstream f(fs::path(root) / "manifest.json");
  check_data(f.good(), "missing manifest.json under " + root);
  json j;
  f >> j;
  return manifest_from_json(j, root);
}

// Read view over a dataset with an in-memory decode cache. data_fraction
// restricts each (task, variation, morphology) bucket to its first
// round(fraction * n) episodes in collection order, so fraction 1.0 is
// exactly the full set.
class Dataset {
 public:
  explicit Dataset(DatasetManifest manifest, double data_fraction = 1.0)
      : manifest_(std::move(manifest)), fraction_(data_fraction) {
    check_data(fraction_ > 0.0 && fraction_ <= 1.0, "data fraction outside (0, 1]");
    for (size_t i = 0; i < manifest_.episodes.size(); ++i) {
      const auto& e = manifest_.episodes[i];
      buckets_[key(e.task_id, e.variation_id, e.morphology)].push_back(static_cast<int>(i));
    }
    for (auto& [k, v] : buckets_) {
      int keep = std::max<int>(1, static_cast<int>(std::llround(fraction_ * v.size())));
      if (keep < static_cast<int>(v.size())) v.resize(keep);
    }
  }

  const DatasetManifest& manifest() const { return manifest_; }

  std::vector<std::pair<int, int>> variations_in_scope(
      const std::vector<std::string>& task_names) const {
    std::vector<std::pair<int, int>> out;
    for (const auto& name : task_names) {
      const sim::TaskSpec& t = sim::task_by_name(name);
      for (int v = 0; v < t.n_variations(); ++v) out.emplace_back(t.task_id(), v);
    }
    return out;
  }

  int bucket_size(int task_id, int variation, sim::Role role) const {
    auto it = buckets_.find(key(task_id, variation, role));
    return it == buckets_.end() ? 0 : static_cast<int>(it->second.size());
  }

  std::shared_ptr<const Trajectory> episode(int index) const {
    const auto& rec = manifest_.episodes[index];
    auto it = cache_.find(rec.dir);
    if (it != cache_.end()) return it->second;
    auto t = std::make_shared<Trajectory>(
        load_episode(fs::path(manifest_.root) / "episodes" / rec.dir));
    cache_[rec.dir] = t;
    return t;
  }

  // Demonstrator demo + imitator trajectory from the same variation with
  // distinct instance seeds. Demo is subsampled to kDemoFrames.
  std::pair<DemoVideo, std::shared_ptr<const Trajectory>> sample_pair(int task_id, int variation,
                                                                      Rng& rng) const {
    const auto* demos = bucket(task_id, variation, sim::Role::kDemonstrator);
    const auto* trajs = bucket(task_id, variation, sim::Role::kImitator);
    check_data(demos && !demos->empty() && trajs && !trajs->empty(),
               "no episodes for task " + std::to_string(task_id) + " variation " +
                   std::to_string(variation));
    int ti = (*trajs)[rng.uniform_int(static_cast<uint32_t>(trajs->size()))];
    uint32_t traj_seed = manifest_.episodes[ti].seed;
    // Reject demos sharing the trajectory's instance seed.
    std::vector<int> candidates;
    for (int di : *demos)
      if (manifest_.episodes[di].seed != traj_seed) candidates.push_back(di);
    check_data(!candidates.empty(), "variation has no demo with a distinct instance seed");
    int di = candidates[rng.uniform_int(static_cast<uint32_t>(candidates.size()))];
    auto traj = episode(ti);
    auto demo_traj = episode(di);
    return {subsample_demo(*demo_traj), traj};
  }

 private:
  static int64_t key(int task_id, int variation, sim::Role role) {
    return (static_cast<int64_t>(task_id) << 20) | (variation << 4) | static_cast<int>(role);
  }
  const std::vector<int>* bucket(int task_id, int variation, sim::Role role) const {
    auto it = buckets_.find(key(task_id, variation, role));
    return it == buckets_.end() ? nullptr : &it->second;
  }

  DatasetManifest manifest_;
  double fraction_;
  std::map<int64_t, std::vector<int>> buckets_;
  mutable std::unordered_map<std::string, std::shared_ptr<const Trajectory>> cache_;
};

}  // namespace mosaic::data
