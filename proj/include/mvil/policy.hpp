#pragma once

#include "mvil/checkpoint.hpp"
#include "mvil/image.hpp"
#include "mvil/ops.hpp"
#include "mvil/rng.hpp"
#include "mvil/sim.hpp"
#include "mvil/tensor.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

namespace mvil {

struct PolicyConfig {
  // Observation set. View order is fixed: in-hand first, then
  // first-person.
  bool use_o_h = true;
  bool use_o_f = true;
  bool use_o_p = true;

  int obs_history = 2;     // To
  int action_horizon = 16; // Tp
  int action_exec = 8;     // Ta

  int image_size = 64;
  int crop_size = 56;

  std::array<int, 4> encoder_channels = {8, 16, 32, 32};
  int embed_dim = 64;
  int proprio_embed_dim = 16;

  bool attention_h = false;
  bool attention_f = false;

  bool vib_h = false;
  bool vib_f = false;
  double vib_beta = 1.0;
  bool vib_kl_mean = false;  // sum over latent dims unless set
  int vib_hidden = 32;
  int vib_latent = 16;

  int denoiser_width = 256;
  int temb_dim = 32;
  int train_diffusion_iters = 100;
  int eval_diffusion_iters = 8;

  double lr = 1e-4;
  double weight_decay = 1e-6;
  int epochs = 60;
  int batch_size = 32;
  int chunk_stride = 1;  // subsampling of chunk start offsets
  std::uint64_t seed = 1;

  int view_count() const { return (use_o_h ? 1 : 0) + (use_o_f ? 1 : 0); }
  int condition_dim() const {
    return embed_dim * view_count() + (use_o_p ? proprio_embed_dim : 0);
  }
  int chunk_dim() const { return action_horizon * 3; }

  void validate() const {
    if (action_exec > action_horizon)
      throw std::invalid_argument("PolicyConfig: executed chunk Ta must not exceed horizon Tp");
    if (obs_history < 1) throw std::invalid_argument("PolicyConfig: obs history To must be >= 1");
    if ((vib_h || vib_f) && vib_beta <= 0.0)
      throw std::invalid_argument("PolicyConfig: beta must be > 0 when VIB is enabled");
    if (view_count() == 0) throw std::invalid_argument("PolicyConfig: at least one view required");
    if (crop_size > image_size) throw std::invalid_argument("PolicyConfig: crop exceeds image size");
  }
};

// Action normalization: diffusion operates on [-1,1]^3 per step.
inline std::array<double, 3> normalize_action(const Action& a) {
  return {a.dx / SimGeometry::kMaxStep, a.dy / SimGeometry::kMaxStep, a.gripper};
}
inline Action denormalize_action(double nx, double ny, double ng) {
  auto clamp = [](double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); };
  Action a;
  a.dx = clamp(nx, -1.0, 1.0) * SimGeometry::kMaxStep;
  a.dy = clamp(ny, -1.0, 1.0) * SimGeometry::kMaxStep;
  a.gripper = clamp(ng, -1.0, 1.0);
  return a;
}
inline std::array<double, 5> normalize_proprio(const std::array<double, 5>& p) {
  return {p[0] * 2.0 - 1.0, p[1] * 2.0 - 1.0, p[2] / SimGeometry::kReach, p[3] / SimGeometry::kReach,
          p[4] * 2.0 - 1.0};
}

// Cosine noise schedule; abar[0] = 1.
inline std::vector<double> cosine_alpha_bar(int T) {
  std::vector<double> abar(static_cast<std::size_t>(T) + 1);
  const double s = 0.008;
  auto f = [&](double t) {
    const double v = std::cos((t / T + s) / (1.0 + s) * M_PI / 2.0);
    return v * v;
  };
  const double f0 = f(0.0);
  for (int t = 0; t <= T; ++t) abar[static_cast<std::size_t>(t)] = f(static_cast<double>(t)) / f0;
  return abar;
}

// Sinusoidal embedding of the diffusion timestep.
template <typename S>
Tensor<S> time_embedding(int t, int dim) {
  ArrayX<S> v(dim);
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double w = std::exp(-std::log(10000.0) * static_cast<double>(k) / half);
    v[2 * k] = static_cast<S>(std::sin(t * w));
    v[2 * k + 1] = static_cast<S>(std::cos(t * w));
  }
  return Tensor<S>::from_array({1, dim}, std::move(v));
}

template <typename S>
struct ConvBlock {
  Tensor<S> w, b;
  int stride = 1, pad = 1;
};

template <typename S>
struct AttentionBlock {
  Tensor<S> w1, b1;  // 3x3, c -> c
  Tensor<S> w2, b2;  // 3x3, c -> 1
};

template <typename S>
struct AttentionResult {
  Tensor<S> gated;
  Tensor<S> map;  // [b,1,h,w], values strictly inside (0,1)
};

// Table-style spatial attention: Conv2d+ReLU, Conv2d+Sigmoid, channel
// expansion, elementwise product with the incoming feature.
template <typename S>
AttentionResult<S> spatial_attention(const Tensor<S>& feature, const AttentionBlock<S>& blk) {
  if (feature.rank() != 4 || feature.dim(1) != blk.w1.dim(1))
    throw std::invalid_argument("spatial_attention: feature channels " + shape_str(feature.shape()) +
                                " do not match block " + shape_str(blk.w1.shape()));
  Tensor<S> h = relu(bias_add_channel(conv2d(feature, blk.w1, 1, 1), blk.b1));
  Tensor<S> map = sigmoid(bias_add_channel(conv2d(h, blk.w2, 1, 1), blk.b2));
  AttentionResult<S> out;
  out.map = map;
  out.gated = mul(feature, expand_channel(map, feature.dim(1)));
  return out;
}

template <typename S>
struct VibBlock {
  Tensor<S> w_e1, b_e1, w_e2, b_e2;
  Tensor<S> w_mu, b_mu, w_sigma, b_sigma;
  Tensor<S> w_dec, b_dec;
};

template <typename S>
struct VibState {
  Tensor<S> mu;
  Tensor<S> sigma;  // variance vector, strictly positive (softplus)
  Tensor<S> z;
};

template <typename S>
struct VibResult {
  Tensor<S> reconstructed;
  VibState<S> state;
};

// z = mu + sqrt(sigma) (.) noise, decoded back to the embedding width.
template <typename S>
VibResult<S> vib_forward(const Tensor<S>& embedding, const Tensor<S>& noise, const VibBlock<S>& blk) {
  Tensor<S> h = relu(linear(embedding, blk.w_e1, blk.b_e1));
  h = relu(linear(h, blk.w_e2, blk.b_e2));
  VibResult<S> out;
  out.state.mu = linear(h, blk.w_mu, blk.b_mu);
  out.state.sigma = softplus(linear(h, blk.w_sigma, blk.b_sigma));
  out.state.z = add(out.state.mu, mul(sqrt(out.state.sigma), noise));
  out.reconstructed = linear(out.state.z, blk.w_dec, blk.b_dec);
  return out;
}

// Gaussian KL to the standard normal, beta-weighted:
// beta * 0.5 * sum_i (mu_i^2 + sigma_i - ln sigma_i - 1), averaged over
// batch rows; optionally averaged over latent dims.
template <typename S>
Tensor<S> vib_loss(const VibState<S>& state, S beta, bool mean_over_dims = false) {
  Tensor<S> terms = add_scalar(sub(add(square(state.mu), state.sigma), log(state.sigma)), S(-1));
  const int rows = state.mu.dim(0);
  S scale_f = beta * S(0.5) / static_cast<S>(rows);
  if (mean_over_dims) scale_f /= static_cast<S>(state.mu.dim(1));
  return scale(sum(terms), scale_f);
}

template <typename S>
struct ViewEncoder {
  std::array<ConvBlock<S>, 4> blocks;
  bool attention_enabled = false;
  AttentionBlock<S> attn;
  Tensor<S> head_w, head_b;
};

template <typename S>
struct EncoderTrace {
  Tensor<S> pre_attention_feature;  // feature entering spatial attention
  Tensor<S> attention_map;          // undefined when attention is off
};

template <typename S>
class Policy {
 public:
  explicit Policy(const PolicyConfig& config) : cfg(config) {
    cfg.validate();
    alpha_bar = cosine_alpha_bar(cfg.train_diffusion_iters);
    Rng rng(derive_seed(cfg.seed, Stream::weight_init));
    if (cfg.use_o_h) enc_h = make_encoder("enc_h", cfg.attention_h, rng);
    if (cfg.use_o_f) enc_f = make_encoder("enc_f", cfg.attention_f, rng);
    if (cfg.vib_h) vib_h = make_vib("vib_h", rng);
    if (cfg.vib_f) vib_f = make_vib("vib_f", rng);
    if (cfg.use_o_p) {
      prop_w = add_param("proprio.w", {cfg.proprio_embed_dim, 5 * cfg.obs_history}, rng);
      prop_b = add_zero_param("proprio.b", {cfg.proprio_embed_dim});
    }
    const int den_in = cfg.chunk_dim() + cfg.condition_dim() + cfg.temb_dim;
    den_w1 = add_param("denoiser.w1", {cfg.denoiser_width, den_in}, rng);
    den_b1 = add_zero_param("denoiser.b1", {cfg.denoiser_width});
    den_w2 = add_param("denoiser.w2", {cfg.denoiser_width, cfg.denoiser_width}, rng);
    den_b2 = add_zero_param("denoiser.b2", {cfg.denoiser_width});
    // Zero-initialized output layer: the untrained head predicts 0.
    den_w3 = add_zero_param("denoiser.w3", {cfg.chunk_dim(), cfg.denoiser_width});
    den_b3 = add_zero_param("denoiser.b3", {cfg.chunk_dim()});
  }

  PolicyConfig cfg;
  ParamRegistry<S> params;
  ViewEncoder<S> enc_h, enc_f;
  VibBlock<S> vib_h, vib_f;
  Tensor<S> prop_w, prop_b;
  Tensor<S> den_w1, den_b1, den_w2, den_b2, den_w3, den_b3;
  std::vector<double> alpha_bar;

  // view 0 = in-hand, view 1 = first-person.
  Tensor<S> encode_view(int view, const Tensor<S>& image_stack, EncoderTrace<S>* trace = nullptr) const {
    const ViewEncoder<S>& enc = view == 0 ? enc_h : enc_f;
    if (!enc.head_w.defined()) throw std::invalid_argument("encode_view: view not part of this policy");
    if (image_stack.rank() != 4 || image_stack.dim(2) != cfg.crop_size || image_stack.dim(3) != cfg.crop_size)
      throw std::invalid_argument("encode_view: expected [b," + std::to_string(3 * cfg.obs_history) + "," +
                                  std::to_string(cfg.crop_size) + "," + std::to_string(cfg.crop_size) +
                                  "], got " + shape_str(image_stack.shape()));
    Tensor<S> x = image_stack;
    for (int i = 0; i < 4; ++i) {
      x = relu(bias_add_channel(conv2d(x, enc.blocks[static_cast<std::size_t>(i)].w,
                                       enc.blocks[static_cast<std::size_t>(i)].stride,
                                       enc.blocks[static_cast<std::size_t>(i)].pad),
                                enc.blocks[static_cast<std::size_t>(i)].b));
      if (i == 1) {
        if (trace) trace->pre_attention_feature = x;
        if (enc.attention_enabled) {
          AttentionResult<S> att = spatial_attention(x, enc.attn);
          if (trace) trace->attention_map = att.map;
          x = att.gated;
        }
      }
    }
    return linear(global_avg_pool(x), enc.head_w, enc.head_b);
  }

  Tensor<S> proprio_embed(const Tensor<S>& proprio_hist) const {
    return linear(proprio_hist, prop_w, prop_b);
  }

  // Concatenation [emb_h || emb_f || linear(proprio)] in the fixed h,f
  // order; absent views are skipped.
  Tensor<S> fuse_observations(const std::vector<Tensor<S>>& view_embeddings,
                              const Tensor<S>& proprio_hist) const {
    if (static_cast<int>(view_embeddings.size()) != cfg.view_count())
      throw std::invalid_argument("fuse_observations: expected " + std::to_string(cfg.view_count()) +
                                  " view embeddings, got " + std::to_string(view_embeddings.size()));
    std::vector<Tensor<S>> parts = view_embeddings;
    if (cfg.use_o_p) parts.push_back(proprio_embed(proprio_hist));
    return concat_cols(parts);
  }

  Tensor<S> denoise_eps(const Tensor<S>& x_t, const Tensor<S>& condition, int t) const {
    Tensor<S> in = concat_cols<S>({x_t, condition, time_embedding<S>(t, cfg.temb_dim)});
    Tensor<S> h = relu(linear(in, den_w1, den_b1));
    h = relu(linear(h, den_w2, den_b2));
    return linear(h, den_w3, den_b3);
  }

  struct HeadLoss {
    Tensor<S> total;
    S mse = 0, kl = 0;
  };

  // One diffusion denoising loss term for a single (condition, chunk)
  // pair with the given draw of (t, eps). KL terms for enabled VIB views
  // are added by the caller that built the condition.
  HeadLoss denoise_loss(const Tensor<S>& condition, const ArrayX<S>& chunk_norm, int t,
                        const ArrayX<S>& eps) const {
    const double ab = alpha_bar[static_cast<std::size_t>(t)];
    ArrayX<S> xt = chunk_norm * static_cast<S>(std::sqrt(ab)) + eps * static_cast<S>(std::sqrt(1.0 - ab));
    Tensor<S> x_t = Tensor<S>::from_array({1, cfg.chunk_dim()}, std::move(xt));
    Tensor<S> eps_hat = denoise_eps(x_t, condition, t);
    Tensor<S> target = Tensor<S>::from_array({1, cfg.chunk_dim()}, eps);
    HeadLoss out;
    out.total = mse(eps_hat, target);
    out.mse = out.total.item();
    return out;
  }

  // Deterministic-variance reverse process over `eval_diffusion_iters`
  // evenly strided steps starting from seeded Gaussian noise.
  std::vector<Action> sample_action_chunk(const Tensor<S>& condition, std::uint64_t seed) const {
    Rng rng(seed);
    const int T = cfg.train_diffusion_iters;
    const int K = cfg.eval_diffusion_iters;
    ArrayX<S> x(cfg.chunk_dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = static_cast<S>(rng.gaussian());

    for (int k = 0; k < K; ++k) {
      const int t = static_cast<int>(std::lround(static_cast<double>(T) * (K - k) / K));
      const int t_next = static_cast<int>(std::lround(static_cast<double>(T) * (K - k - 1) / K));
      const double ab = alpha_bar[static_cast<std::size_t>(t)];
      const double ab_next = alpha_bar[static_cast<std::size_t>(t_next)];
      Tensor<S> x_t = Tensor<S>::from_array({1, cfg.chunk_dim()}, x);
      ArrayX<S> eps_hat = denoise_eps(x_t, condition, t).value();
      ArrayX<S> x0 = (x - eps_hat * static_cast<S>(std::sqrt(1.0 - ab))) / static_cast<S>(std::sqrt(ab));
      x = x0 * static_cast<S>(std::sqrt(ab_next)) + eps_hat * static_cast<S>(std::sqrt(1.0 - ab_next));
    }

    std::vector<Action> chunk;
    chunk.reserve(static_cast<std::size_t>(cfg.action_horizon));
    for (int i = 0; i < cfg.action_horizon; ++i)
      chunk.push_back(denormalize_action(x[3 * i], x[3 * i + 1], x[3 * i + 2]));
    return chunk;
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ckpt;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Checkpoint::Entry e;
      e.shape = params.param(i).shape();
      const auto& v = params.param(i).value();
      e.data.resize(static_cast<std::size_t>(v.size()));
      for (Eigen::Index j = 0; j < v.size(); ++j) e.data[static_cast<std::size_t>(j)] = static_cast<float>(v[j]);
      ckpt.params.emplace_back(params.name(i), std::move(e));
    }
    return ckpt;
  }

  void load_from(const Checkpoint& ckpt) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Checkpoint::Entry* e = ckpt.find(params.name(i));
      if (!e || e->shape != params.param(i).shape())
        throw std::runtime_error("checkpoint does not match policy architecture at parameter '" +
                                 params.name(i) + "'");
      auto& v = params.param(i).value();
      for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = static_cast<S>(e->data[static_cast<std::size_t>(j)]);
    }
  }

 private:
  Tensor<S> add_param(const std::string& name, std::vector<int> shape, Rng& rng) {
    const int fan_in = shape.size() == 2 ? shape[1] : shape[1] * shape[2] * shape[3];
    const double std = std::sqrt(2.0 / fan_in);
    ArrayX<S> v(shape_numel(shape));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<S>(rng.gaussian() * std);
    return params.add(name, Tensor<S>::from_array(std::move(shape), std::move(v)));
  }
  Tensor<S> add_zero_param(const std::string& name, std::vector<int> shape) {
    return params.add(name, Tensor<S>::zeros(std::move(shape)));
  }

  ViewEncoder<S> make_encoder(const std::string& prefix, bool attention, Rng& rng) {
    ViewEncoder<S> enc;
    const int in_ch = 3 * cfg.obs_history;
    const auto& ch = cfg.encoder_channels;
    const int ins[4] = {in_ch, ch[0], ch[1], ch[2]};
    const int strides[4] = {2, 2, 2, 1};
    for (int i = 0; i < 4; ++i) {
      enc.blocks[static_cast<std::size_t>(i)].w =
          add_param(prefix + ".conv" + std::to_string(i) + ".w", {ch[static_cast<std::size_t>(i)], ins[i], 3, 3}, rng);
      enc.blocks[static_cast<std::size_t>(i)].b =
          add_zero_param(prefix + ".conv" + std::to_string(i) + ".b", {ch[static_cast<std::size_t>(i)]});
      enc.blocks[static_cast<std::size_t>(i)].stride = strides[i];
      enc.blocks[static_cast<std::size_t>(i)].pad = 1;
    }
    enc.attention_enabled = attention;
    if (attention) {
      enc.attn.w1 = add_param(prefix + ".attn.w1", {ch[1], ch[1], 3, 3}, rng);
      enc.attn.b1 = add_zero_param(prefix + ".attn.b1", {ch[1]});
      enc.attn.w2 = add_param(prefix + ".attn.w2", {1, ch[1], 3, 3}, rng);
      enc.attn.b2 = add_zero_param(prefix + ".attn.b2", {1});
    }
    enc.head_w = add_param(prefix + ".head.w", {cfg.embed_dim, ch[3]}, rng);
    enc.head_b = add_zero_param(prefix + ".head.b", {cfg.embed_dim});
    return enc;
  }

  VibBlock<S> make_vib(const std::string& prefix, Rng& rng) {
    VibBlock<S> v;
    v.w_e1 = add_param(prefix + ".e1.w", {cfg.vib_hidden, cfg.embed_dim}, rng);
    v.b_e1 = add_zero_param(prefix + ".e1.b", {cfg.vib_hidden});
    v.w_e2 = add_param(prefix + ".e2.w", {cfg.vib_hidden, cfg.vib_hidden}, rng);
    v.b_e2 = add_zero_param(prefix + ".e2.b", {cfg.vib_hidden});
    v.w_mu = add_param(prefix + ".mu.w", {cfg.vib_latent, cfg.vib_hidden}, rng);
    v.b_mu = add_zero_param(prefix + ".mu.b", {cfg.vib_latent});
    v.w_sigma = add_param(prefix + ".sigma.w", {cfg.vib_latent, cfg.vib_hidden}, rng);
    v.b_sigma = add_zero_param(prefix + ".sigma.b", {cfg.vib_latent});
    v.w_dec = add_param(prefix + ".dec.w", {cfg.embed_dim, cfg.vib_latent}, rng);
    v.b_dec = add_zero_param(prefix + ".dec.b", {cfg.embed_dim});
    return v;
  }
};

// Image-stack tensor assembly. Frames are quantized to 8 bits first so
// that in-memory episodes and PNG round-tripped episodes train
// identically.
inline std::vector<std::uint8_t> quantize_image(const Image& img) {
  const int h = img.height(), w = img.width();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(3) * h * w);
  std::size_t i = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const float v = std::min(1.0f, std::max(0.0f, img.plane(c)(y, x)));
        out[i++] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
  return out;
}

// Builds [1, 3*To, crop, crop] from To quantized frames (oldest first),
// all cropped at the same offset.
template <typename S>
Tensor<S> image_stack_tensor(const std::vector<const std::vector<std::uint8_t>*>& frames,
                             int image_size, int crop_size, int off_y, int off_x) {
  const int to = static_cast<int>(frames.size());
  ArrayX<S> v(static_cast<Eigen::Index>(to) * 3 * crop_size * crop_size);
  Eigen::Index i = 0;
  for (int f = 0; f < to; ++f) {
    const std::vector<std::uint8_t>& frame = *frames[static_cast<std::size_t>(f)];
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < crop_size; ++y)
        for (int x = 0; x < crop_size; ++x)
          v[i++] = static_cast<S>(frame[static_cast<std::size_t>(c) * image_size * image_size +
                                        static_cast<std::size_t>(off_y + y) * image_size + (off_x + x)]) /
                   S(255);
  }
  return Tensor<S>::from_array({1, 3 * to, crop_size, crop_size}, std::move(v));
}

// GradCAM attribution: target scalar is the L2 norm of eps-hat at the
// final sampling step; gradients are taken at the feature map entering
// spatial attention. Returns a heatmap in [0,1] upsampled to crop size.
template <typename S>
Planef gradcam(const Policy<S>& policy, int view, const Tensor<S>& image_stack,
               const std::vector<Tensor<S>>& all_view_stacks, const Tensor<S>& proprio_hist,
               std::uint64_t sample_seed) {
  (void)image_stack;
  // Encode every configured view, tracing the requested one.
  EncoderTrace<S> trace;
  std::vector<Tensor<S>> embs;
  int idx = 0;
  std::vector<int> view_ids;
  if (policy.cfg.use_o_h) view_ids.push_back(0);
  if (policy.cfg.use_o_f) view_ids.push_back(1);
  for (int v : view_ids) {
    Tensor<S> emb = policy.encode_view(v, all_view_stacks[static_cast<std::size_t>(idx)],
                                       v == view ? &trace : nullptr);
    if ((v == 0 && policy.cfg.vib_h) || (v == 1 && policy.cfg.vib_f)) {
      // Mean latent at attribution time (noise = 0).
      Tensor<S> zero = Tensor<S>::zeros({1, policy.cfg.vib_latent});
      emb = vib_forward(emb, zero, v == 0 ? policy.vib_h : policy.vib_f).reconstructed;
    }
    embs.push_back(emb);
    ++idx;
  }
  Tensor<S> cond = policy.fuse_observations(embs, proprio_hist);

  // Run the reverse process without gradients down to the final step.
  Rng rng(sample_seed);
  const int T = policy.cfg.train_diffusion_iters;
  const int K = policy.cfg.eval_diffusion_iters;
  ArrayX<S> x(policy.cfg.chunk_dim());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = static_cast<S>(rng.gaussian());
  Tensor<S> cond_const = Tensor<S>::from_array(cond.shape(), cond.value());
  int t_final = 1;
  for (int k = 0; k < K; ++k) {
    const int t = static_cast<int>(std::lround(static_cast<double>(T) * (K - k) / K));
    const int t_next = static_cast<int>(std::lround(static_cast<double>(T) * (K - k - 1) / K));
    if (k == K - 1) {
      t_final = t;
      break;
    }
    const double ab = policy.alpha_bar[static_cast<std::size_t>(t)];
    const double ab_next = policy.alpha_bar[static_cast<std::size_t>(t_next)];
    Tensor<S> x_t = Tensor<S>::from_array({1, policy.cfg.chunk_dim()}, x);
    ArrayX<S> eps_hat = policy.denoise_eps(x_t, cond_const, t).value();
    ArrayX<S> x0 = (x - eps_hat * static_cast<S>(std::sqrt(1.0 - ab))) / static_cast<S>(std::sqrt(ab));
    x = x0 * static_cast<S>(std::sqrt(ab_next)) + eps_hat * static_cast<S>(std::sqrt(1.0 - ab_next));
  }

  // Final-step eps-hat with gradients flowing back through the condition.
  Tensor<S> x_t = Tensor<S>::from_array({1, policy.cfg.chunk_dim()}, x);
  Tensor<S> eps_hat = policy.denoise_eps(x_t, cond, t_final);
  Tensor<S> target = sqrt(sum(square(eps_hat)));
  target.backward();

  const Tensor<S>& feature = trace.pre_attention_feature;
  const int c = feature.dim(1), fh = feature.dim(2), fw = feature.dim(3);
  const ArrayX<S>& fval = feature.value();
  const ArrayX<S>& fgrad = feature.grad();
  Planef cam = Planef::Zero(fh, fw);
  for (int k = 0; k < c; ++k) {
    // Channel weight: spatial mean of the gradient.
    S wsum = 0;
    for (int i = 0; i < fh * fw; ++i) wsum += fgrad[static_cast<Eigen::Index>(k) * fh * fw + i];
    const S wk = wsum / static_cast<S>(fh * fw);
    for (int y = 0; y < fh; ++y)
      for (int xx = 0; xx < fw; ++xx)
        cam(y, xx) += static_cast<float>(wk * fval[static_cast<Eigen::Index>(k) * fh * fw + y * fw + xx]);
  }
  cam = cam.max(0.0f);
  Planef up = bilinear_resize(cam, policy.cfg.crop_size, policy.cfg.crop_size);
  const float mx = up.maxCoeff();
  if (mx > 0.0f) up /= mx;
  return up;
}

}  // namespace mvil
