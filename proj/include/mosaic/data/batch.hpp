#pragma once

#include "mosaic/core/tensor.hpp"
#include "mosaic/data/dataset.hpp"

namespace mosaic::data {

struct BatchSlot {
  int task_id = 0;
  int variation_id = 0;
  std::vector<Image> demo_frames;     // kDemoFrames
  std::vector<Image> obs_frames;      // window observations
  std::vector<sim::Action> actions;   // one target per window frame
};

struct Batch {
  std::vector<BatchSlot> slots;
  int t_obs = kTrainWindow;

  int size() const { return static_cast<int>(slots.size()); }
};

template <class T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = rng.uniform_int(static_cast<uint32_t>(i));
    std::swap(v[i - 1], v[j]);
  }
}

// Slots are dealt round-robin over the in-scope variations in a shuffled
// order, so per-variation counts in any batch differ by at most one. Each
// slot draws a fresh demo/trajectory pair and a random contiguous window.
inline Batch make_batch(const Dataset& ds, const std::vector<std::string>& task_names,
                        int batch_size, Rng& rng, int t_obs = kTrainWindow) {
  check_data(batch_size > 0, "batch_size must be positive");
  auto vars = ds.variations_in_scope(task_names);
  check_data(!vars.empty(), "no variations in scope");
  fisher_yates(vars, rng);
  Batch b;
  b.t_obs = t_obs;
  b.slots.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    auto [task_id, variation] = vars[i % vars.size()];
    auto [demo, traj] = ds.sample_pair(task_id, variation, rng);
    int L = traj->length();
    check_data(L >= t_obs, "episode shorter than observation window");
    int start = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(L - t_obs + 1)));
    BatchSlot slot;
    slot.task_id = task_id;
    slot.variation_id = variation;
    slot.demo_frames = std::move(demo.frames);
    slot.obs_frames.assign(traj->observations.begin() + start,
                           traj->observations.begin() + start + t_obs);
    slot.actions.assign(traj->actions.begin() + start, traj->actions.begin() + start + t_obs);
    b.slots.push_back(std::move(slot));
  }
  return b;
}

// [N, H, W, 3] float tensor normalized to [0, 1].
template <class T>
Tensor<T> frames_to_tensor(const std::vector<const Image*>& frames) {
  check(!frames.empty(), "frames_to_tensor: empty");
  int H = frames[0]->height, W = frames[0]->width;
  Tensor<T> out(Shape{static_cast<int64_t>(frames.size()), H, W, 3});
  T* p = out.data();
  constexpr T kInv = T(1) / T(255);
  for (const Image* f : frames) {
    check(f->height == H && f->width == W, "frames_to_tensor: size mismatch");
    for (size_t i = 0; i < f->pixels.size(); ++i) *p++ = static_cast<T>(f->pixels[i]) * kInv;
  }
  return out;
}

}  // namespace mosaic::data
