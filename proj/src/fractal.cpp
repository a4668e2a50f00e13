#include "mvil/fractal.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvil {

using nlohmann::json;

double AffineMap::spectral_norm() const {
  // Largest singular value of the 2x2 matrix, closed form.
  const double a0 = a[0], a1 = a[1], a2 = a[2], a3 = a[3];
  const double q = a0 * a0 + a1 * a1 + a2 * a2 + a3 * a3;
  const double det = a0 * a3 - a1 * a2;
  const double disc = std::sqrt(std::max(0.0, q * q - 4.0 * det * det));
  return std::sqrt(0.5 * (q + disc));
}

void IfsParams::validate() const {
  if (maps.empty() || maps.size() > 6)
    throw std::invalid_argument("IfsParams: expected between 1 and 6 maps, got " + std::to_string(maps.size()));
  if (probs.size() != maps.size())
    throw std::invalid_argument("IfsParams: probabilities do not match maps");
  double sum = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw std::invalid_argument("IfsParams: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("IfsParams: probabilities sum to " + std::to_string(sum) + ", expected 1");
  for (const auto& m : maps) {
    if (m.spectral_norm() >= 1.0)
      throw std::invalid_argument("IfsParams: non-contractive map (spectral norm " +
                                  std::to_string(m.spectral_norm()) + " >= 1)");
    for (double v : m.a)
      if (std::abs(v) > 1.0) throw std::invalid_argument("IfsParams: matrix entry outside [-1,1]");
    for (double v : m.t)
      if (std::abs(v) > 1.0) throw std::invalid_argument("IfsParams: translation entry outside [-1,1]");
  }
  if (iterations < 0) throw std::invalid_argument("IfsParams: negative iteration count");
}

std::string ifs_to_json(const IfsParams& p) {
  json j;
  j["iterations"] = p.iterations;
  j["maps"] = json::array();
  for (std::size_t i = 0; i < p.maps.size(); ++i) {
    json m;
    m["a"] = p.maps[i].a;
    m["t"] = p.maps[i].t;
    m["prob"] = p.probs[i];
    j["maps"].push_back(m);
  }
  j["ramp"] = p.ramp;
  return j.dump();
}

IfsParams ifs_from_json(const std::string& text) {
  json j = json::parse(text);
  IfsParams p;
  p.iterations = j.value("iterations", 200000L);
  for (const auto& m : j.at("maps")) {
    AffineMap am;
    am.a = m.at("a").get<std::array<double, 4>>();
    am.t = m.at("t").get<std::array<double, 2>>();
    p.maps.push_back(am);
    p.probs.push_back(m.at("prob").get<double>());
  }
  p.ramp = j.at("ramp").get<std::array<std::array<float, 3>, 3>>();
  p.validate();
  return p;
}

Image render_ifs(const IfsParams& params, int h, int w, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);

  std::vector<double> cdf(params.probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < params.probs.size(); ++i) {
    acc += params.probs[i];
    cdf[i] = acc;
  }
  cdf.back() = 1.0;

  // Chaos game. Points are collected first so the view box can be fitted
  // to the attractor before splatting.
  double px = rng.uniform(-1.0, 1.0);
  double py = rng.uniform(-1.0, 1.0);
  const int discard = 100;
  std::vector<float> xs, ys;
  xs.reserve(static_cast<std::size_t>(std::max(0L, params.iterations)));
  ys.reserve(xs.capacity());
  for (long i = -discard; i < params.iterations; ++i) {
    const double u = rng.uniform();
    std::size_t k = 0;
    while (k + 1 < cdf.size() && u >= cdf[k]) ++k;
    const AffineMap& m = params.maps[k];
    const double nx = m.a[0] * px + m.a[1] * py + m.t[0];
    const double ny = m.a[2] * px + m.a[3] * py + m.t[1];
    px = nx;
    py = ny;
    if (i >= 0) {
      xs.push_back(static_cast<float>(px));
      ys.push_back(static_cast<float>(py));
    }
  }

  Image img(h, w);
  const auto& ramp = params.ramp;
  auto ramp_color = [&ramp](float u, float& r, float& g, float& b) {
    if (u < 0.5f) {
      const float t = 2.0f * u;
      r = ramp[0][0] + t * (ramp[1][0] - ramp[0][0]);
      g = ramp[0][1] + t * (ramp[1][1] - ramp[0][1]);
      b = ramp[0][2] + t * (ramp[1][2] - ramp[0][2]);
    } else {
      const float t = 2.0f * (u - 0.5f);
      r = ramp[1][0] + t * (ramp[2][0] - ramp[1][0]);
      g = ramp[1][1] + t * (ramp[2][1] - ramp[1][1]);
      b = ramp[1][2] + t * (ramp[2][2] - ramp[1][2]);
    }
  };

  if (xs.empty()) {
    float r, g, b;
    ramp_color(0.0f, r, g, b);
    img.fill(r, g, b);
    return img;
  }

  float minx = xs[0], maxx = xs[0], miny = ys[0], maxy = ys[0];
  for (std::size_t i = 1; i < xs.size(); ++i) {
    minx = std::min(minx, xs[i]);
    maxx = std::max(maxx, xs[i]);
    miny = std::min(miny, ys[i]);
    maxy = std::max(maxy, ys[i]);
  }
  // Fit the view box to the attractor with a 5% margin; degenerate spans
  // (a single fixed point) get a tiny synthetic extent.
  float spanx = std::max(maxx - minx, 1e-6f);
  float spany = std::max(maxy - miny, 1e-6f);
  minx -= 0.05f * spanx;
  miny -= 0.05f * spany;
  spanx *= 1.1f;
  spany *= 1.1f;

  std::vector<std::uint32_t> counts(static_cast<std::size_t>(h) * w, 0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    int cx = static_cast<int>((xs[i] - minx) / spanx * static_cast<float>(w));
    int cy = static_cast<int>((ys[i] - miny) / spany * static_cast<float>(h));
    cx = std::min(w - 1, std::max(0, cx));
    cy = std::min(h - 1, std::max(0, cy));
    ++counts[static_cast<std::size_t>(cy) * w + cx];
  }

  std::uint32_t max_count = 0;
  for (std::uint32_t c : counts) max_count = std::max(max_count, c);
  const float denom = max_count > 0 ? std::log1p(static_cast<float>(max_count)) : 1.0f;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float u = std::log1p(static_cast<float>(counts[static_cast<std::size_t>(y) * w + x])) / denom;
      float r, g, b;
      ramp_color(u, r, g, b);
      img.set(y, x, r, g, b);
    }
  }
  return img;
}

Image mix_round(const Image& base, const Image& fractal, MixMode mode, double lambda) {
  if (!base.same_size(fractal))
    throw std::invalid_argument("mix_round: size mismatch " + std::to_string(base.height()) + "x" +
                                std::to_string(base.width()) + " vs " + std::to_string(fractal.height()) +
                                "x" + std::to_string(fractal.width()));
  const float lam = static_cast<float>(lambda);
  Image out(base.height(), base.width());
  if (mode == MixMode::additive) {
    for (int c = 0; c < 3; ++c)
      out.plane(c) = ((1.0f - lam) * base.plane(c) + lam * fractal.plane(c)).min(1.0f).max(0.0f);
  } else {
    for (int c = 0; c < 3; ++c)
      out.plane(c) = ((base.plane(c) + 0.05f).pow(1.0f - lam) * (fractal.plane(c) + 0.05f).pow(lam) - 0.05f)
                         .min(1.0f)
                         .max(0.0f);
  }
  return out;
}

double FractalBank::mean_pixel_stddev() const {
  if (images.empty()) return 0.0;
  double total = 0.0;
  for (const Image& img : images) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double m = img.plane(c).cast<double>().mean();
      s += std::sqrt((img.plane(c).cast<double>() - m).square().mean());
    }
    total += s / 3.0;
  }
  return total / static_cast<double>(images.size());
}

namespace {

IfsParams random_ifs(Rng& rng) {
  IfsParams p;
  const int n = static_cast<int>(rng.uniform_int(2, 6));
  double psum = 0.0;
  for (int i = 0; i < n; ++i) {
    AffineMap m;
    // Rejection-sample a contractive matrix with entries in [-1,1].
    for (;;) {
      for (double& v : m.a) v = rng.uniform(-1.0, 1.0);
      if (m.spectral_norm() <= 0.95) break;
    }
    for (double& v : m.t) v = rng.uniform(-1.0, 1.0);
    p.maps.push_back(m);
    const double w = 0.2 + rng.uniform();
    p.probs.push_back(w);
    psum += w;
  }
  for (double& w : p.probs) w /= psum;
  // Exact renormalization so validate()'s 1e-9 tolerance always holds.
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < p.probs.size(); ++i) s += p.probs[i];
  p.probs.back() = 1.0 - s;
  for (auto& anchor : p.ramp)
    for (float& v : anchor) v = static_cast<float>(rng.uniform());
  p.iterations = 200000;
  return p;
}

}  // namespace

FractalBank generate_fractal_bank(int count, int h, int w, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate_fractal_bank: count must be >= 1");
  FractalBank bank;
  bank.seed = seed;
  Rng rng(derive_seed(seed, Stream::bank));
  int attempts = 0;
  while (static_cast<int>(bank.images.size()) < count) {
    if (++attempts > count * 50) throw std::runtime_error("generate_fractal_bank: too many degenerate draws");
    IfsParams p = random_ifs(rng);
    Image img = render_ifs(p, h, w, derive_seed(seed, Stream::bank, static_cast<std::uint64_t>(attempts)));
    // Per-image non-degeneracy: texture must actually vary.
    double s = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double m = img.plane(c).cast<double>().mean();
      s += std::sqrt((img.plane(c).cast<double>() - m).square().mean());
    }
    if (s / 3.0 < 0.05) continue;
    bank.params.push_back(std::move(p));
    bank.images.push_back(std::move(img));
  }
  return bank;
}

Image pixmix_augment(const Image& base, const FractalBank& bank, std::uint64_t seed) {
  if (bank.images.empty()) throw std::invalid_argument("pixmix_augment: empty fractal bank");
  Rng rng(seed);
  const int rounds = static_cast<int>(rng.uniform_int(1, 4));
  Image out = base;
  for (int r = 0; r < rounds; ++r) {
    const auto& pick = bank.images[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(bank.images.size()) - 1))];
    const MixMode mode = rng.uniform_int(0, 1) == 0 ? MixMode::additive : MixMode::multiplicative;
    const double lambda = std::min(0.6, std::max(0.05, rng.beta_2_6()));
    out = mix_round(out, pick, mode, lambda);
  }
  return out;
}

Image masked_composite(const Image& original, const Image& augmented, const Mask& mask) {
  if (!original.same_size(augmented) || original.height() != mask.height() ||
      original.width() != mask.width())
    throw std::invalid_argument("masked_composite: size mismatch");
  Image out = augmented;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.m(y, x)) {
        out.r(y, x) = original.r(y, x);
        out.g(y, x) = original.g(y, x);
        out.b(y, x) = original.b(y, x);
      }
  return out;
}

}  // namespace mvil
