#pragma once

#include "mvil/fractal.hpp"
#include "mvil/image.hpp"
#include "mvil/sim.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mvil {

// Reference color of a task object plus the matching tolerance, expressed
// as a CIELAB distance.
struct ColorSpec {
  std::array<float, 3> rgb;
  double lab_tolerance = 25.0;
};

// Task objects whose pixels count as task-related, per task. Pick: the
// manipulated object only. Place: the carried object and the goal plate.
std::vector<ColorSpec> task_color_specs(Task task);

enum class MaskSource { ground_truth, detected_tracked };

struct MaskSequence {
  std::string episode_id;
  MaskSource source = MaskSource::ground_truth;
  // [view][t]; view 0 = in_hand, view 1 = first_person.
  std::array<std::vector<Mask>, 2> masks;
  std::array<std::vector<bool>, 2> tracking_lost;

  int length() const { return static_cast<int>(masks[0].size()); }
};

// Pixels within the tolerance ball of the reference color in CIELAB,
// reduced to the largest connected component. An empty mask is a valid
// result.
Mask detect_initial_mask(const Image& frame, const ColorSpec& spec);

struct PropagateResult {
  Mask mask;
  bool tracking_lost = false;
};

// Translation search within +-8 px minimizing SSD over the masked patch,
// then one re-snap pass: color-detect (reference = mean masked color of
// prev_frame) and keep the largest component intersecting the dilated,
// shifted mask.
PropagateResult propagate_mask(const Image& prev_frame, const Mask& prev_mask,
                               const Image& next_frame);

enum class MaskMode { ground_truth, tracked };

// Ground-truth mode copies the simulator masks. Tracked mode runs
// detect + propagate per task object per view, union-ing the per-object
// masks; a lost object is re-detected on subsequent frames.
MaskSequence build_mask_sequence(const Episode& episode, MaskMode mode);

// Replaces every frame of every view by
// masked_composite(frame, pixmix_augment(frame, bank, frame_seed), mask).
// Frame seeds are a counter-split of `seed` over (t, view). Actions and
// proprioception are untouched.
Episode augment_episode(const Episode& episode, const MaskSequence& masks, const FractalBank& bank,
                        std::uint64_t seed);

// CIELAB conversion (D65), used by detection and by tests.
std::array<double, 3> rgb_to_lab(float r, float g, float b);

}  // namespace mvil
