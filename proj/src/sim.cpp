#include "mvil/sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace mvil {

std::string to_string(Task t) { return t == Task::pick_shelf ? "pick_shelf" : "place_plate"; }
std::string to_string(Variant v) {
  switch (v) {
    case Variant::ID: return "ID";
    case Variant::OOD_distractor: return "OOD_distractor";
    default: return "OOD_background";
  }
}

Task task_from_string(const std::string& s) {
  if (s == "pick_shelf") return Task::pick_shelf;
  if (s == "place_plate") return Task::place_plate;
  throw std::invalid_argument("unknown task: " + s);
}

Variant variant_from_string(const std::string& s) {
  if (s == "ID") return Variant::ID;
  if (s == "OOD_distractor") return Variant::OOD_distractor;
  if (s == "OOD_background") return Variant::OOD_background;
  throw std::invalid_argument("unknown variant: " + s);
}

namespace {

using G = SimGeometry;

struct Color {
  float r, g, b;
};

constexpr Color kObjectPalette[] = {
    {0.85f, 0.10f, 0.10f},  // target (red)
    {0.15f, 0.35f, 0.80f},  // plate (blue)
    {0.90f, 0.78f, 0.10f},  // carried object (yellow)
    {0.90f, 0.55f, 0.15f},  // distractors...
    {0.20f, 0.75f, 0.85f},
    {0.95f, 0.60f, 0.70f},
    {0.95f, 0.95f, 0.95f},
    {0.10f, 0.45f, 0.20f},
};

constexpr Color kBaseColor = {0.22f, 0.22f, 0.25f};
constexpr Color kBodyColor = {0.38f, 0.38f, 0.42f};
constexpr Color kHandColor = {0.10f, 0.80f, 0.25f};
constexpr Color kShelfColor = {0.55f, 0.42f, 0.25f};

constexpr Color kIdBackgrounds[kIdTexturePoolSize] = {
    {0.74f, 0.74f, 0.74f}, {0.70f, 0.72f, 0.64f}, {0.64f, 0.70f, 0.75f}, {0.73f, 0.66f, 0.70f},
    {0.68f, 0.68f, 0.60f}, {0.60f, 0.68f, 0.68f}, {0.70f, 0.70f, 0.78f}, {0.66f, 0.73f, 0.66f},
};

// Held-out colors, used only by the OOD texture pool.
constexpr Color kOodColors[8] = {
    {0.80f, 0.20f, 0.70f}, {0.10f, 0.60f, 0.60f}, {0.50f, 0.55f, 0.15f}, {0.45f, 0.20f, 0.70f},
    {0.35f, 0.45f, 0.55f}, {0.65f, 0.30f, 0.20f}, {0.15f, 0.20f, 0.45f}, {0.25f, 0.30f, 0.30f},
};

// (pattern kind, cell size in world units, color pair) per OOD texture id.
struct OodTexture {
  int kind;  // 0 checker, 1 hstripes, 2 vstripes, 3 diagonal
  double cell;
  int c0, c1;
};
constexpr OodTexture kOodTextures[kOodTexturePoolSize] = {
    {0, 0.125, 0, 1}, {0, 0.078, 2, 3}, {1, 0.094, 4, 5}, {2, 0.094, 6, 7},
    {3, 0.110, 0, 2}, {0, 0.156, 4, 7}, {2, 0.0625, 1, 3}, {1, 0.125, 5, 6},
};

Color background_color(const EnvConfig& cfg, double wx, double wy, std::uint64_t noise_seed,
                       int pixel_index) {
  const int id = cfg.background_texture_id;
  if (!texture_is_ood(id)) {
    Color c = kIdBackgrounds[id];
    // 1% pixel noise, hashed per pixel so rendering order is irrelevant.
    auto jitter = [&](int channel) {
      const std::uint64_t h = splitmix64(noise_seed ^ (static_cast<std::uint64_t>(pixel_index) * 3u +
                                                       static_cast<std::uint64_t>(channel)));
      return static_cast<float>((static_cast<double>(h >> 11) * 0x1.0p-53 - 0.5) * 0.02);
    };
    c.r = std::min(1.0f, std::max(0.0f, c.r + jitter(0)));
    c.g = std::min(1.0f, std::max(0.0f, c.g + jitter(1)));
    c.b = std::min(1.0f, std::max(0.0f, c.b + jitter(2)));
    return c;
  }
  const OodTexture& t = kOodTextures[id - kIdTexturePoolSize];
  int parity = 0;
  const auto cellf = [&](double v) { return static_cast<long>(std::floor(v / t.cell)); };
  switch (t.kind) {
    case 0: parity = static_cast<int>((cellf(wx) + cellf(wy)) & 1); break;
    case 1: parity = static_cast<int>(cellf(wy) & 1); break;
    case 2: parity = static_cast<int>(cellf(wx) & 1); break;
    default: parity = static_cast<int>(cellf(wx + wy) & 1); break;
  }
  return kOodColors[parity ? t.c1 : t.c0];
}

Color shelf_color(const EnvConfig& cfg) {
  if (cfg.variant == Variant::OOD_background) {
    // "unknown shelf": tint derived from the OOD texture's palette.
    const OodTexture& t = kOodTextures[cfg.background_texture_id - kIdTexturePoolSize];
    const Color a = kOodColors[t.c0], b = kOodColors[t.c1];
    return {0.4f * a.r + 0.4f * b.r, 0.4f * a.g + 0.4f * b.g, 0.4f * a.b + 0.4f * b.b};
  }
  return kShelfColor;
}

// Pixel owners, in paint order. Task-region membership is decided from
// the final owner of each pixel, so occluded task pixels never enter the
// ground-truth mask.
enum Owner : std::uint8_t {
  kOwnerBackground = 0,
  kOwnerShelf,
  kOwnerPlate,
  kOwnerDistractor,
  kOwnerTarget,
  kOwnerBase,
  kOwnerBody,
  kOwnerHand,
  kOwnerHeld,
};

struct ViewXform {
  double ox, oy, s;  // wx = ox + (px+0.5)*s ; wy = oy - (py+0.5)*s
  double wx(int px) const { return ox + (px + 0.5) * s; }
  double wy(int py) const { return oy - (py + 0.5) * s; }
  // Pixel bounds covering the world rectangle [x0,x1]x[y0,y1].
  void pixel_bounds(double x0, double x1, double y0, double y1, int& px0, int& px1, int& py0,
                    int& py1) const {
    px0 = std::max(0, static_cast<int>(std::floor((x0 - ox) / s - 0.5)));
    px1 = std::min(G::kRenderSize - 1, static_cast<int>(std::ceil((x1 - ox) / s - 0.5)) + 1);
    py0 = std::max(0, static_cast<int>(std::floor((oy - y1) / s - 0.5)));
    py1 = std::min(G::kRenderSize - 1, static_cast<int>(std::ceil((oy - y0) / s - 0.5)) + 1);
  }
};

struct Canvas {
  Image img{G::kRenderSize, G::kRenderSize};
  MaskPlane owner{MaskPlane::Zero(G::kRenderSize, G::kRenderSize)};
};

void paint_disc(Canvas& cv, const ViewXform& vx, const Vec2& c, double radius, Color col,
                Owner owner) {
  int px0, px1, py0, py1;
  vx.pixel_bounds(c.x() - radius, c.x() + radius, c.y() - radius, c.y() + radius, px0, px1, py0, py1);
  const double r2 = radius * radius;
  for (int py = py0; py <= py1; ++py) {
    const double wy = vx.wy(py);
    for (int px = px0; px <= px1; ++px) {
      const double wx = vx.wx(px);
      const double dx = wx - c.x(), dy = wy - c.y();
      if (dx * dx + dy * dy <= r2) {
        cv.img.set(py, px, col.r, col.g, col.b);
        cv.owner(py, px) = owner;
      }
    }
  }
}

void paint_rect(Canvas& cv, const ViewXform& vx, double x0, double x1, double y0, double y1,
                Color col, Owner owner) {
  int px0, px1, py0, py1;
  vx.pixel_bounds(x0, x1, y0, y1, px0, px1, py0, py1);
  for (int py = py0; py <= py1; ++py) {
    const double wy = vx.wy(py);
    if (wy < y0 || wy > y1) continue;
    for (int px = px0; px <= px1; ++px) {
      const double wx = vx.wx(px);
      if (wx < x0 || wx > x1) continue;
      cv.img.set(py, px, col.r, col.g, col.b);
      cv.owner(py, px) = owner;
    }
  }
}

// Oriented rectangle from p0 toward p1, extended past p1 by `overshoot`.
void paint_body_quad(Canvas& cv, const ViewXform& vx, const Vec2& p0, const Vec2& p1,
                     double overshoot, double half_width, Color col, Owner owner) {
  Vec2 dir = p1 - p0;
  double len = dir.norm();
  if (len < 1e-9) {
    dir = Vec2(0.0, 1.0);
    len = 0.0;
  } else {
    dir /= len;
  }
  len += overshoot;
  const Vec2 n(-dir.y(), dir.x());
  const Vec2 mid = p0 + dir * (len * 0.5);
  const double ext = len * 0.5 + half_width;
  int px0, px1, py0, py1;
  vx.pixel_bounds(mid.x() - ext, mid.x() + ext, mid.y() - ext, mid.y() + ext, px0, px1, py0, py1);
  for (int py = py0; py <= py1; ++py) {
    const double wy = vx.wy(py);
    for (int px = px0; px <= px1; ++px) {
      const Vec2 rel(vx.wx(px) - p0.x(), wy - p0.y());
      const double along = rel.dot(dir);
      const double across = rel.dot(n);
      if (along >= 0.0 && along <= len && std::abs(across) <= half_width) {
        cv.img.set(py, px, col.r, col.g, col.b);
        cv.owner(py, px) = owner;
      }
    }
  }
}

Canvas render_canvas(const WorldState& state, Viewpoint view) {
  const EnvConfig& cfg = state.config;
  Canvas cv;

  ViewXform vx;
  if (view == Viewpoint::first_person) {
    vx = {0.0, 1.0, 1.0 / G::kRenderSize};
  } else {
    const Vec2 hand = state.hand();
    vx = {hand.x() - G::kInHandHalfSize, hand.y() + G::kInHandHalfSize,
          2.0 * G::kInHandHalfSize / G::kRenderSize};
  }

  const std::uint64_t noise_seed =
      derive_seed(cfg.seed, Stream::background_noise, static_cast<std::uint64_t>(state.step_count),
                  view == Viewpoint::in_hand ? 0u : 1u);
  for (int py = 0; py < G::kRenderSize; ++py)
    for (int px = 0; px < G::kRenderSize; ++px) {
      const Color c = background_color(cfg, vx.wx(px), vx.wy(py), noise_seed, py * G::kRenderSize + px);
      cv.img.set(py, px, c.r, c.g, c.b);
    }

  if (cfg.task == Task::pick_shelf)
    paint_rect(cv, vx, G::kShelfXLo, G::kShelfXHi, G::kShelfYLo, G::kShelfYHi, shelf_color(cfg),
               kOwnerShelf);

  // Goal disc, then distractors, then the free-standing target.
  if (state.plate_index >= 0) {
    const SceneObject& plate = state.objects[static_cast<std::size_t>(state.plate_index)];
    paint_disc(cv, vx, plate.pos, plate.radius, kObjectPalette[plate.color_id], kOwnerPlate);
  }
  for (std::size_t i = 0; i < state.objects.size(); ++i) {
    if (static_cast<int>(i) == state.target_index || static_cast<int>(i) == state.plate_index) continue;
    const SceneObject& o = state.objects[i];
    paint_disc(cv, vx, o.pos, o.radius, kObjectPalette[o.color_id], kOwnerDistractor);
  }
  if (state.target_index >= 0 && state.held_object != state.target_index) {
    const SceneObject& t = state.objects[static_cast<std::size_t>(state.target_index)];
    paint_disc(cv, vx, t.pos, t.radius, kObjectPalette[t.color_id], kOwnerTarget);
  }

  if (state.robot_visible) {
    paint_disc(cv, vx, state.base, G::kBaseRadius, kBaseColor, kOwnerBase);
    // The body quad occludes the first-person camera only; the in-hand
    // camera sits at the end of the arm and looks past it.
    if (view == Viewpoint::first_person)
      paint_body_quad(cv, vx, state.base, state.hand(), G::kBodyOvershoot, G::kBodyHalfWidth,
                      kBodyColor, kOwnerBody);
    paint_disc(cv, vx, state.hand(), G::kHandRadius, kHandColor, kOwnerHand);
  }

  if (state.held_object >= 0) {
    const SceneObject& held = state.objects[static_cast<std::size_t>(state.held_object)];
    // Up close the grasped object fills ~25% of the in-hand view.
    const double radius = view == Viewpoint::in_hand ? G::kHeldBlobRadius : held.radius;
    paint_disc(cv, vx, state.hand(), radius, kObjectPalette[held.color_id], kOwnerHeld);
  }

  return cv;
}

bool owner_is_task(std::uint8_t owner, Task task) {
  if (owner == kOwnerTarget || owner == kOwnerHeld) return true;
  if (task == Task::place_plate && owner == kOwnerPlate) return true;
  return false;
}

bool in_shelf_band(const Vec2& p) {
  return p.x() >= G::kShelfXLo && p.x() <= G::kShelfXHi && p.y() >= G::kShelfYLo &&
         p.y() <= G::kShelfYHi;
}

double clampd(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

}  // namespace

std::array<float, 3> object_color(int color_id) {
  const Color& c = kObjectPalette[color_id];
  return {c.r, c.g, c.b};
}

EnvConfig make_env_config(Task task, Variant variant, std::uint64_t seed) {
  EnvConfig cfg;
  cfg.task = task;
  cfg.variant = variant;
  cfg.seed = seed;
  Rng rng(derive_seed(seed, Stream::env_config));
  cfg.distractor_count = variant == Variant::ID ? 0 : static_cast<int>(rng.uniform_int(2, 4));
  cfg.background_texture_id =
      variant == Variant::OOD_background
          ? kIdTexturePoolSize + static_cast<int>(rng.uniform_int(0, kOodTexturePoolSize - 1))
          : static_cast<int>(rng.uniform_int(0, kIdTexturePoolSize - 1));
  return cfg;
}

WorldState make_empty_scene(const EnvConfig& config) {
  WorldState s;
  s.config = config;
  s.base = Vec2(0.5, 0.2);
  s.hand_offset = Vec2(0.0, 0.08);
  s.robot_visible = false;
  return s;
}

RenderResult render_view(const WorldState& state, Viewpoint view) {
  Canvas cv = render_canvas(state, view);
  RenderResult out;
  out.image = std::move(cv.img);
  out.mask = Mask(G::kRenderSize, G::kRenderSize);
  for (int y = 0; y < G::kRenderSize; ++y)
    for (int x = 0; x < G::kRenderSize; ++x)
      out.mask.m(y, x) = owner_is_task(cv.owner(y, x), state.config.task) ? 1 : 0;
  return out;
}

ObservationBundle observe(const WorldState& state) {
  ObservationBundle obs;
  obs.o_h = render_canvas(state, Viewpoint::in_hand).img;
  obs.o_f = render_canvas(state, Viewpoint::first_person).img;
  obs.o_p = {state.base.x(), state.base.y(), state.hand_offset.x(), state.hand_offset.y(),
             state.gripper_closed ? 1.0 : 0.0};
  return obs;
}

ResetResult reset(const EnvConfig& config) {
  Rng rng(derive_seed(config.seed, Stream::placement));
  WorldState s;
  s.config = config;

  struct Placed {
    Vec2 pos;
    double radius;
  };
  std::vector<Placed> placed;
  auto overlaps = [&placed](const Vec2& p, double r, double margin) {
    for (const Placed& q : placed)
      if ((p - q.pos).norm() < r + q.radius + margin) return true;
    return false;
  };
  auto sample_or_throw = [&rng](const char* what, const std::function<bool(Vec2&)>& try_place) {
    Vec2 p;
    for (int i = 0; i < 1000; ++i)
      if (try_place(p)) return p;
    throw std::runtime_error(std::string("reset: could not satisfy placement constraint '") + what +
                             "' after 1000 rejection samples");
  };

  if (config.task == Task::pick_shelf) {
    const Vec2 target(rng.uniform(0.20, 0.80), rng.uniform(0.74, 0.78));
    s.objects.push_back({target, G::kTargetRadius, ObjectPalette::kTarget});
    s.target_index = 0;
    placed.push_back({target, G::kTargetRadius});

    // Demonstrations start roughly facing the target, matching how the
    // operator would line the robot up with the shelf.
    s.base = Vec2(clampd(target.x() + rng.uniform(-0.20, 0.20), 0.15, 0.85), rng.uniform(0.12, 0.28));
    s.hand_offset = Vec2(0.0, 0.08);
    placed.push_back({s.base, G::kBaseRadius});
    placed.push_back({s.hand(), 0.04});
  } else {
    Vec2 plate(rng.uniform(0.20, 0.80), rng.uniform(0.15, 0.45));
    s.base = Vec2(rng.uniform(0.20, 0.80), rng.uniform(0.62, 0.85));
    s.hand_offset = Vec2(0.0, -0.08);
    // Carried object starts in the gripper.
    s.objects.push_back({s.hand(), G::kHeldRadius, ObjectPalette::kHeld});
    s.objects.push_back({plate, G::kPlateRadius, ObjectPalette::kPlate});
    s.target_index = 0;
    s.plate_index = 1;
    s.held_object = 0;
    s.gripper_closed = true;
    placed.push_back({plate, G::kPlateRadius});
    placed.push_back({s.base, G::kBaseRadius});
    placed.push_back({s.hand(), 0.04});
  }

  for (int d = 0; d < config.distractor_count; ++d) {
    const double radius = rng.uniform(0.025, 0.045);
    const Vec2 pos = sample_or_throw("distractor placement without overlap", [&](Vec2& p) {
      p = Vec2(rng.uniform(0.10, 0.90), rng.uniform(0.10, 0.85));
      return !overlaps(p, radius, 0.01);
    });
    s.objects.push_back({pos, radius, ObjectPalette::kDistractor0 + d % 5});
    placed.push_back({pos, radius});
  }

  ResetResult out;
  out.obs = observe(s);
  out.state = std::move(s);
  return out;
}

StepResult step(const WorldState& prev, const Action& action) {
  StepResult res;
  WorldState s = prev;

  Action a = action;
  res.action_clamped = a.dx < -G::kMaxStep || a.dx > G::kMaxStep || a.dy < -G::kMaxStep ||
                       a.dy > G::kMaxStep || a.gripper < -1.0 || a.gripper > 1.0;
  a.dx = clampd(a.dx, -G::kMaxStep, G::kMaxStep);
  a.dy = clampd(a.dy, -G::kMaxStep, G::kMaxStep);
  a.gripper = clampd(a.gripper, -1.0, 1.0);

  // Hand moves; the base drags along when the commanded hand position
  // exceeds the arm's reach (the mobile-base analog).
  Vec2 hand = s.hand();
  hand.x() = clampd(hand.x() + a.dx, 0.02, 0.98);
  hand.y() = clampd(hand.y() + a.dy, 0.02, 0.98);
  Vec2 offset = hand - s.base;
  if (offset.norm() > G::kReach) {
    s.base = hand - offset.normalized() * G::kReach;
    s.base.x() = clampd(s.base.x(), 0.03, 0.97);
    s.base.y() = clampd(s.base.y(), 0.03, 0.97);
    offset = hand - s.base;
    if (offset.norm() > G::kReach) hand = s.base + offset.normalized() * G::kReach;
  }
  s.hand_offset = hand - s.base;

  const bool close = a.gripper >= 0.0;
  if (close) {
    s.gripper_closed = true;
    if (s.held_object < 0 && s.target_index >= 0) {
      const SceneObject& t = s.objects[static_cast<std::size_t>(s.target_index)];
      if ((t.pos - hand).norm() <= G::kGraspDist) s.held_object = s.target_index;
    }
  } else {
    s.gripper_closed = false;
    if (s.held_object >= 0) {
      SceneObject& dropped = s.objects[static_cast<std::size_t>(s.held_object)];
      dropped.pos = hand;
      if (s.config.task == Task::place_plate && s.held_object == s.target_index &&
          s.plate_index >= 0) {
        const SceneObject& plate = s.objects[static_cast<std::size_t>(s.plate_index)];
        if ((hand - plate.pos).norm() <= plate.radius) s.success = true;
      }
      s.held_object = -1;
    }
  }
  if (s.held_object >= 0) s.objects[static_cast<std::size_t>(s.held_object)].pos = hand;

  if (s.config.task == Task::pick_shelf && s.held_object == s.target_index && s.target_index >= 0 &&
      !in_shelf_band(s.objects[static_cast<std::size_t>(s.target_index)].pos))
    s.success = true;

  s.step_count += 1;
  res.success = s.success;
  res.done = s.success || s.step_count >= G::kHorizon;
  res.obs = observe(s);
  res.state = std::move(s);
  return res;
}

Action scripted_expert(const WorldState& state, Task task) {
  Rng rng(derive_seed(state.config.seed, Stream::expert_noise,
                      static_cast<std::uint64_t>(state.step_count)));
  const Vec2 hand = state.hand();

  Vec2 waypoint = hand;
  double gripper = -1.0;
  bool move = true;

  if (task == Task::pick_shelf) {
    const SceneObject& target = state.objects[static_cast<std::size_t>(state.target_index)];
    if (state.held_object != state.target_index) {
      const double dist = (target.pos - hand).norm();
      if (dist > 0.015) {
        waypoint = target.pos;
        gripper = -1.0;
      } else {
        move = false;
        gripper = 1.0;  // close on the target
      }
    } else {
      waypoint = Vec2(hand.x(), 0.50);  // extract straight down out of the band
      gripper = 1.0;
    }
  } else {
    const SceneObject& plate = state.objects[static_cast<std::size_t>(state.plate_index)];
    if (state.held_object == state.target_index) {
      const double dist = (plate.pos - hand).norm();
      if (dist > 0.02) {
        waypoint = plate.pos;
        gripper = 1.0;
      } else {
        move = false;
        gripper = -1.0;  // release over the plate
      }
    } else {
      // Dropped early; go back for the object.
      const SceneObject& obj = state.objects[static_cast<std::size_t>(state.target_index)];
      const double dist = (obj.pos - hand).norm();
      if (dist > 0.015) {
        waypoint = obj.pos;
        gripper = -1.0;
      } else {
        move = false;
        gripper = 1.0;
      }
    }
  }

  Action a;
  const double nx = rng.truncated_gaussian(0.005, 0.01);
  const double ny = rng.truncated_gaussian(0.005, 0.01);
  const double px = move ? waypoint.x() - hand.x() : 0.0;
  const double py = move ? waypoint.y() - hand.y() : 0.0;
  a.dx = clampd(px + nx, -G::kMaxStep, G::kMaxStep);
  a.dy = clampd(py + ny, -G::kMaxStep, G::kMaxStep);
  a.gripper = gripper;
  return a;
}

Episode run_expert_episode(const EnvConfig& config) {
  Episode ep;
  ep.config = config;
  ResetResult r = reset(config);
  WorldState state = std::move(r.state);
  ObservationBundle obs = std::move(r.obs);
  for (int t = 0; t < G::kHorizon; ++t) {
    EpisodeStep rec;
    rec.obs = obs;
    rec.mask_h = render_view(state, Viewpoint::in_hand).mask;
    rec.mask_f = render_view(state, Viewpoint::first_person).mask;
    rec.action = scripted_expert(state, config.task);
    StepResult sr = step(state, rec.action);
    rec.done = sr.done;
    rec.success = sr.success;
    ep.steps.push_back(std::move(rec));
    state = std::move(sr.state);
    obs = std::move(sr.obs);
    if (ep.steps.back().done) break;
  }
  ep.success = state.success;
  return ep;
}

std::vector<Episode> collect_demonstrations(Task task, int n, std::uint64_t seed,
                                            CollectStats* stats) {
  std::vector<Episode> out;
  int attempts = 0, failures = 0;
  while (static_cast<int>(out.size()) < n) {
    const EnvConfig cfg =
        make_env_config(task, Variant::ID, derive_seed(seed, Stream::episode,
                                                       static_cast<std::uint64_t>(attempts)));
    ++attempts;
    Episode ep = run_expert_episode(cfg);
    if (ep.success) {
      out.push_back(std::move(ep));
    } else {
      ++failures;
      // 95% expert gate: abort once failure evidence is overwhelming.
      if (failures >= 10 && failures * 20 > attempts)
        throw std::runtime_error(
            "collect_demonstrations: scripted expert failed its 95% success gate (" +
            std::to_string(attempts - failures) + "/" + std::to_string(attempts) +
            " successes on task " + to_string(task) + ")");
    }
  }
  if (stats) {
    stats->attempts = attempts;
    stats->redraws = failures;
  }
  return out;
}

}  // namespace mvil
