#include "mvil/region.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace mvil {

namespace {

double f_lab(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

// 4-connected components; returns labels (0 = background) and the label of
// the largest component (0 if none).
int connected_components(const MaskPlane& hit, Eigen::ArrayXXi& labels, int& best_label) {
  const int h = static_cast<int>(hit.rows()), w = static_cast<int>(hit.cols());
  labels = Eigen::ArrayXXi::Zero(h, w);
  int next = 0, best_size = 0;
  best_label = 0;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!hit(y, x) || labels(y, x)) continue;
      const int label = ++next;
      int size = 0;
      queue.clear();
      queue.emplace_back(y, x);
      labels(y, x) = label;
      while (!queue.empty()) {
        auto [cy, cx] = queue.front();
        queue.pop_front();
        ++size;
        const int ny[4] = {cy - 1, cy + 1, cy, cy};
        const int nx[4] = {cx, cx, cx - 1, cx + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
          if (!hit(ny[k], nx[k]) || labels(ny[k], nx[k])) continue;
          labels(ny[k], nx[k]) = label;
          queue.emplace_back(ny[k], nx[k]);
        }
      }
      if (size > best_size) {
        best_size = size;
        best_label = label;
      }
    }
  return next;
}

MaskPlane color_hits(const Image& frame, const std::array<double, 3>& ref_lab, double tolerance) {
  const int h = frame.height(), w = frame.width();
  MaskPlane hit = MaskPlane::Zero(h, w);
  const double tol2 = tolerance * tolerance;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto lab = rgb_to_lab(frame.r(y, x), frame.g(y, x), frame.b(y, x));
      const double dl = lab[0] - ref_lab[0], da = lab[1] - ref_lab[1], db = lab[2] - ref_lab[2];
      if (dl * dl + da * da + db * db <= tol2) hit(y, x) = 1;
    }
  return hit;
}

Mask dilate(const Mask& mask, int radius) {
  const int h = mask.height(), w = mask.width();
  Mask out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask.m(y, x)) continue;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny >= 0 && ny < h && nx >= 0 && nx < w) out.m(ny, nx) = 1;
        }
    }
  return out;
}

constexpr int kSearchRadius = 8;
constexpr int kDilateRadius = 3;

}  // namespace

std::array<double, 3> rgb_to_lab(float r, float g, float b) {
  const double rl = srgb_to_linear(r), gl = srgb_to_linear(g), bl = srgb_to_linear(b);
  // sRGB D65 reference white.
  const double x = (0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl) / 0.95047;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = (0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl) / 1.08883;
  const double fx = f_lab(x), fy = f_lab(y), fz = f_lab(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::vector<ColorSpec> task_color_specs(Task task) {
  std::vector<ColorSpec> specs;
  {
    const auto c = object_color(ObjectPalette::kTarget);
    if (task == Task::pick_shelf) specs.push_back({c, 25.0});
  }
  if (task == Task::place_plate) {
    specs.push_back({object_color(ObjectPalette::kHeld), 25.0});
    specs.push_back({object_color(ObjectPalette::kPlate), 25.0});
  }
  return specs;
}

Mask detect_initial_mask(const Image& frame, const ColorSpec& spec) {
  const auto ref = rgb_to_lab(spec.rgb[0], spec.rgb[1], spec.rgb[2]);
  const MaskPlane hit = color_hits(frame, ref, spec.lab_tolerance);
  Eigen::ArrayXXi labels;
  int best = 0;
  connected_components(hit, labels, best);
  Mask out(frame.height(), frame.width());
  if (best > 0) out.m = (labels == best).cast<std::uint8_t>();
  return out;
}

PropagateResult propagate_mask(const Image& prev_frame, const Mask& prev_mask,
                               const Image& next_frame) {
  PropagateResult res;
  const int h = prev_frame.height(), w = prev_frame.width();
  res.mask = Mask(h, w);
  if (prev_mask.empty_mask()) {
    res.tracking_lost = true;
    return res;
  }
  if (!prev_frame.same_size(next_frame) || prev_mask.height() != h || prev_mask.width() != w)
    throw std::invalid_argument("propagate_mask: size mismatch");

  // Masked-patch SSD over translations, scanned in increasing shift
  // magnitude so the zero shift wins ties.
  std::vector<std::pair<int, int>> shifts;
  for (int dy = -kSearchRadius; dy <= kSearchRadius; ++dy)
    for (int dx = -kSearchRadius; dx <= kSearchRadius; ++dx) shifts.emplace_back(dy, dx);
  std::sort(shifts.begin(), shifts.end(), [](const auto& a, const auto& b) {
    const int ma = std::abs(a.first) + std::abs(a.second);
    const int mb = std::abs(b.first) + std::abs(b.second);
    return ma != mb ? ma < mb : a < b;
  });

  double best_cost = std::numeric_limits<double>::infinity();
  int best_dy = 0, best_dx = 0;
  for (const auto& [dy, dx] : shifts) {
    double cost = 0.0;
    int n = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!prev_mask.m(y, x)) continue;
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) {
          cost += 3.0;  // off-frame pixels count as maximal mismatch
          ++n;
          continue;
        }
        const double dr = prev_frame.r(y, x) - next_frame.r(ny, nx);
        const double dg = prev_frame.g(y, x) - next_frame.g(ny, nx);
        const double db = prev_frame.b(y, x) - next_frame.b(ny, nx);
        cost += dr * dr + dg * dg + db * db;
        ++n;
      }
    if (n > 0) cost /= n;
    if (cost < best_cost) {
      best_cost = cost;
      best_dy = dy;
      best_dx = dx;
    }
  }

  Mask shifted(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!prev_mask.m(y, x)) continue;
      const int ny = y + best_dy, nx = x + best_dx;
      if (ny >= 0 && ny < h && nx >= 0 && nx < w) shifted.m(ny, nx) = 1;
    }

  // Re-snap: reference color = mean color of the tracked patch; keep the
  // largest matching component that intersects the dilated shifted mask.
  double mr = 0, mg = 0, mb = 0;
  int mc = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (prev_mask.m(y, x)) {
        mr += prev_frame.r(y, x);
        mg += prev_frame.g(y, x);
        mb += prev_frame.b(y, x);
        ++mc;
      }
  const auto ref = rgb_to_lab(static_cast<float>(mr / mc), static_cast<float>(mg / mc),
                              static_cast<float>(mb / mc));
  const MaskPlane hits = color_hits(next_frame, ref, 25.0);
  Eigen::ArrayXXi labels;
  int unused_best = 0;
  connected_components(hits, labels, unused_best);

  const Mask region = dilate(shifted, kDilateRadius);
  std::vector<int> component_size(1, 0);
  std::vector<char> touches(1, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int l = labels(y, x);
      if (l == 0) continue;
      if (l >= static_cast<int>(component_size.size())) {
        component_size.resize(static_cast<std::size_t>(l) + 1, 0);
        touches.resize(static_cast<std::size_t>(l) + 1, 0);
      }
      ++component_size[static_cast<std::size_t>(l)];
      if (region.m(y, x)) touches[static_cast<std::size_t>(l)] = 1;
    }
  int pick = 0, pick_size = 0;
  for (std::size_t l = 1; l < component_size.size(); ++l)
    if (touches[l] && component_size[l] > pick_size) {
      pick = static_cast<int>(l);
      pick_size = component_size[l];
    }

  if (pick == 0) {
    res.tracking_lost = true;  // object left the view or is fully occluded
    return res;
  }
  res.mask.m = (labels == pick).cast<std::uint8_t>();
  return res;
}

MaskSequence build_mask_sequence(const Episode& episode, MaskMode mode) {
  MaskSequence seq;
  seq.episode_id = to_string(episode.config.task) + "-" + std::to_string(episode.config.seed);
  const int T = episode.length();

  if (mode == MaskMode::ground_truth) {
    seq.source = MaskSource::ground_truth;
    for (int v = 0; v < 2; ++v) {
      seq.masks[v].reserve(static_cast<std::size_t>(T));
      seq.tracking_lost[v].assign(static_cast<std::size_t>(T), false);
    }
    for (const EpisodeStep& st : episode.steps) {
      seq.masks[0].push_back(st.mask_h);
      seq.masks[1].push_back(st.mask_f);
    }
    return seq;
  }

  seq.source = MaskSource::detected_tracked;
  const std::vector<ColorSpec> specs = task_color_specs(episode.config.task);
  for (int v = 0; v < 2; ++v) {
    auto frame_at = [&](int t) -> const Image& {
      return v == 0 ? episode.steps[static_cast<std::size_t>(t)].obs.o_h
                    : episode.steps[static_cast<std::size_t>(t)].obs.o_f;
    };
    // Track each task object independently, then union.
    std::vector<std::vector<Mask>> per_object(specs.size());
    std::vector<std::vector<bool>> per_lost(specs.size());
    for (std::size_t o = 0; o < specs.size(); ++o) {
      Mask current;
      bool lost = true;
      for (int t = 0; t < T; ++t) {
        if (t == 0 || lost) {
          current = detect_initial_mask(frame_at(t), specs[o]);
          lost = current.empty_mask();
        } else {
          PropagateResult pr = propagate_mask(frame_at(t - 1), current, frame_at(t));
          current = pr.mask;
          lost = pr.tracking_lost;
        }
        per_object[o].push_back(current);
        per_lost[o].push_back(lost);
      }
    }
    for (int t = 0; t < T; ++t) {
      Mask u(SimGeometry::kRenderSize, SimGeometry::kRenderSize);
      bool lost_any = false;
      for (std::size_t o = 0; o < specs.size(); ++o) {
        u.m = (u.m != 0 || per_object[o][static_cast<std::size_t>(t)].m != 0).cast<std::uint8_t>();
        lost_any = lost_any || per_lost[o][static_cast<std::size_t>(t)];
      }
      seq.masks[v].push_back(std::move(u));
      seq.tracking_lost[v].push_back(lost_any);
    }
  }
  return seq;
}

Episode augment_episode(const Episode& episode, const MaskSequence& masks, const FractalBank& bank,
                        std::uint64_t seed) {
  if (masks.length() != episode.length())
    throw std::invalid_argument("augment_episode: mask sequence length " +
                                std::to_string(masks.length()) + " does not match episode length " +
                                std::to_string(episode.length()));
  Episode out = episode;
  for (int t = 0; t < episode.length(); ++t) {
    EpisodeStep& st = out.steps[static_cast<std::size_t>(t)];
    const Mask& mh = masks.masks[0][static_cast<std::size_t>(t)];
    const Mask& mf = masks.masks[1][static_cast<std::size_t>(t)];
    if (mh.height() != st.obs.o_h.height() || mf.height() != st.obs.o_f.height())
      throw std::invalid_argument("augment_episode: mask size does not match frame size");
    const std::uint64_t sh = derive_seed(seed, Stream::augment_frame, static_cast<std::uint64_t>(t), 0);
    const std::uint64_t sf = derive_seed(seed, Stream::augment_frame, static_cast<std::uint64_t>(t), 1);
    st.obs.o_h = masked_composite(st.obs.o_h, pixmix_augment(st.obs.o_h, bank, sh), mh);
    st.obs.o_f = masked_composite(st.obs.o_f, pixmix_augment(st.obs.o_f, bank, sf), mf);
  }
  return out;
}

}  // namespace mvil
