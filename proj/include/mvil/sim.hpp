#pragma once

#include "mvil/image.hpp"
#include "mvil/rng.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mvil {

using Vec2 = Eigen::Vector2d;

enum class Task { pick_shelf, place_plate };
enum class Variant { ID, OOD_distractor, OOD_background };
enum class Viewpoint { in_hand, first_person };

std::string to_string(Task t);
std::string to_string(Variant v);
Task task_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);

// World geometry. The world is the unit square; distances are world units.
struct SimGeometry {
  static constexpr int kRenderSize = 64;
  static constexpr double kReach = 0.25;
  static constexpr double kMaxStep = 0.05;   // per-axis action bound
  static constexpr double kGraspDist = 0.03;
  static constexpr int kHorizon = 80;

  static constexpr double kShelfYLo = 0.72, kShelfYHi = 0.80;
  static constexpr double kShelfXLo = 0.08, kShelfXHi = 0.92;
  static constexpr double kTargetRadius = 0.035;
  static constexpr double kPlateRadius = 0.10;
  static constexpr double kHeldRadius = 0.03;
  static constexpr double kBaseRadius = 0.05;
  static constexpr double kHandRadius = 0.016;
  static constexpr double kBodyHalfWidth = 0.035;  // robot body quad, first-person occluder
  static constexpr double kBodyOvershoot = 0.12;   // quad extends past the wrist
  static constexpr double kInHandHalfSize = 0.28;  // in-hand camera window half extent
  // Held-object blob radius in the in-hand view; occludes ~25% of the view.
  static constexpr double kHeldBlobRadius = 0.158;
};

// Background texture ids: the ID pool is {0..7} (flat colors with 1% pixel
// noise), the OOD pool is {8..15} (checkerboards and stripes at held-out
// colors). The pools are disjoint by construction.
constexpr int kIdTexturePoolSize = 8;
constexpr int kOodTexturePoolSize = 8;
inline bool texture_is_ood(int id) { return id >= kIdTexturePoolSize; }

struct EnvConfig {
  Task task = Task::pick_shelf;
  Variant variant = Variant::ID;
  int distractor_count = 0;       // 0 for ID; 2-4 otherwise
  int background_texture_id = 0;  // from the pool matching the variant
  std::uint64_t seed = 0;
};

// Draws the distractor count and the background texture id from the pools
// matching the variant.
EnvConfig make_env_config(Task task, Variant variant, std::uint64_t seed);

struct SceneObject {
  Vec2 pos;
  double radius = 0.0;
  int color_id = 0;  // index into the object palette
};

struct WorldState {
  EnvConfig config;
  Vec2 base;
  Vec2 hand_offset;  // hand = base + hand_offset, |hand_offset| <= kReach
  bool gripper_closed = false;
  int held_object = -1;             // index into objects, -1 when empty
  std::vector<SceneObject> objects;  // [0] target; place task: [1] plate; then distractors
  int target_index = -1;
  int plate_index = -1;
  int step_count = 0;
  bool success = false;
  bool robot_visible = true;

  Vec2 hand() const { return base + hand_offset; }
};

// State with no robot and no objects, for background-only renders.
WorldState make_empty_scene(const EnvConfig& config);

struct Action {
  double dx = 0.0, dy = 0.0;  // each in [-0.05, 0.05]
  double gripper = -1.0;      // in [-1, 1]; >= 0 commands close
};

struct ObservationBundle {
  Image o_h;  // in-hand view
  Image o_f;  // first-person view
  std::array<double, 5> o_p;  // base x, base y, hand offset x/y, gripper
};

struct RenderResult {
  Image image;
  Mask mask;  // ground-truth task-region mask after occlusion
};

RenderResult render_view(const WorldState& state, Viewpoint view);
ObservationBundle observe(const WorldState& state);

struct ResetResult {
  WorldState state;
  ObservationBundle obs;
};

// Seeded placement of robot, target, goal and distractors without
// overlap. Throws when 1000 rejection samples cannot satisfy a
// constraint, naming it.
ResetResult reset(const EnvConfig& config);

struct StepResult {
  WorldState state;
  ObservationBundle obs;
  bool done = false;
  bool success = false;
  bool action_clamped = false;
};

StepResult step(const WorldState& state, const Action& action);

// Proportional control toward the task waypoint with truncated-Gaussian
// noise (sigma 0.005, truncated at 2 sigma), clipped to action bounds.
Action scripted_expert(const WorldState& state, Task task);

struct EpisodeStep {
  ObservationBundle obs;
  Mask mask_h, mask_f;  // ground-truth task-region masks per view
  Action action;
  bool done = false;
  bool success = false;
};

struct Episode {
  EnvConfig config;
  std::vector<EpisodeStep> steps;
  bool success = false;
  int length() const { return static_cast<int>(steps.size()); }
};

// Rolls out the scripted expert once from reset(config).
Episode run_expert_episode(const EnvConfig& config);

struct CollectStats {
  int redraws = 0;
  int attempts = 0;
};

// Exactly n successful ID episodes; failed rollouts are re-drawn with
// fresh seeds. Aborts when the observed expert success rate falls below
// the 95% gate with clear evidence.
std::vector<Episode> collect_demonstrations(Task task, int n, std::uint64_t seed,
                                            CollectStats* stats = nullptr);

// Object palette indices used by SceneObject::color_id.
struct ObjectPalette {
  static constexpr int kTarget = 0;     // red, the manipulated object in pick
  static constexpr int kPlate = 1;      // blue goal disc
  static constexpr int kHeld = 2;       // yellow, the carried object in place
  static constexpr int kDistractor0 = 3;  // 3..7 are distractor colors
};
std::array<float, 3> object_color(int color_id);

}  // namespace mvil
