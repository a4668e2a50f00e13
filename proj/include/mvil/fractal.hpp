#pragma once

#include "mvil/image.hpp"
#include "mvil/rng.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mvil {

// One affine contraction of an iterated function system:
// p' = A p + t, with the spectral norm of A strictly below 1.
struct AffineMap {
  std::array<double, 4> a;  // row-major 2x2
  std::array<double, 2> t;

  double spectral_norm() const;
};

// Parameters of a chaos-game fractal: up to six contractions with
// selection probabilities, a three-anchor color ramp, and a point budget.
struct IfsParams {
  std::vector<AffineMap> maps;
  std::vector<double> probs;
  std::array<std::array<float, 3>, 3> ramp;  // anchor colors, each in [0,1]^3
  long iterations = 200000;

  // Throws std::invalid_argument when a map is non-contractive or the
  // probabilities are not a distribution.
  void validate() const;
};

std::string ifs_to_json(const IfsParams& p);
IfsParams ifs_from_json(const std::string& text);

// Chaos-game rendering: iterate randomly selected maps from a random
// start, discard the first 100 points, splat point density onto the grid,
// log-scale, and map through the color ramp. Deterministic given seed.
Image render_ifs(const IfsParams& params, int h, int w, std::uint64_t seed);

enum class MixMode { additive, multiplicative };

// One PixMix-style mixing round.
//   additive:        clamp((1-lambda)*base + lambda*fractal)
//   multiplicative:  clamp((base+0.05)^(1-lambda) * (fractal+0.05)^lambda - 0.05)
Image mix_round(const Image& base, const Image& fractal, MixMode mode, double lambda);

// Pre-rendered fractal textures shared across an augmentation run.
struct FractalBank {
  std::vector<Image> images;
  std::vector<IfsParams> params;
  std::uint64_t seed = 0;

  // Mean per-image pixel standard deviation; must exceed 0.05 for the
  // bank to count as non-degenerate texture.
  double mean_pixel_stddev() const;
};

// Draws `count` random parameter sets (2-6 contractions each) and renders
// them at (h, w). Degenerate textures are re-drawn.
FractalBank generate_fractal_bank(int count, int h, int w, std::uint64_t seed);

// Iterated mixing: rounds uniform in {1..4}; per round a bank image, a
// mode (uniform), and lambda ~ Beta(2,6) clipped to (0.05, 0.6).
Image pixmix_augment(const Image& base, const FractalBank& bank, std::uint64_t seed);

// Region-gated composite: task pixels (mask=1) from `original`, the rest
// from `augmented`. Hard boundary, no blending.
Image masked_composite(const Image& original, const Image& augmented, const Mask& mask);

}  // namespace mvil
