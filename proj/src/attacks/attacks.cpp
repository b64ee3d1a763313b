#include "ara/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ara::attacks {

namespace {

Tensor object_plane(const Tensor& t, std::size_t o) {
  const std::size_t plane = t.dim(1) * t.dim(2);
  auto d = t.data();
  return Tensor::from_data({t.dim(1), t.dim(2)},
                           std::vector<float>(d.begin() + o * plane, d.begin() + (o + 1) * plane));
}

Tensor uniform_noise(const Shape& shape, float epsilon, Rng& rng) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-epsilon, epsilon));
  return Tensor::from_data(shape, std::move(v));
}

// Hardness [H,W] broadcast over the three colour channels.
Tensor replicate3(const Tensor& z) {
  auto d = z.data();
  std::vector<float> out(d.size() * 3);
  for (std::size_t i = 0; i < d.size(); ++i) out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = d[i];
  return Tensor::from_data({z.dim(0), z.dim(1), 3}, std::move(out));
}

double linf_distance(const Tensor& a, const Tensor& b) {
  auto x = a.data(), y = b.data();
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::fabs(double(x[i]) - double(y[i])));
  return m;
}

double mean_of(const Tensor& t) {
  auto d = t.data();
  double s = 0.0;
  for (float v : d) s += v;
  return d.empty() ? 0.0 : s / double(d.size());
}

// Forward only: prediction of `frame` from `memory`, per object.
Tensor predict_frame(const vos::VosParams& frozen, const MemoryPrime& memory, const Tensor& frame,
                     std::size_t objects, double* loss, const Tensor& gt) {
  const std::size_t H = frame.dim(0), W = frame.dim(1), plane = H * W;
  std::vector<float> probs(objects * plane);
  double total = 0.0;
  for (std::size_t o = 0; o < objects; ++o) {
    std::vector<vos::EncodedMemory> enc;
    for (std::size_t i = 0; i < memory.frames.size(); ++i) {
      enc.push_back(vos::encode_memory(frozen, memory.frames[i], object_plane(memory.probs[i], o)));
    }
    Tensor p = vos::segment(frozen, std::span<const vos::EncodedMemory>(enc), frame);
    total += ops::mean(ops::binary_ce(p, object_plane(gt, o), ops::CeMode::full)).item();
    std::copy(p.data().begin(), p.data().end(), probs.begin() + o * plane);
  }
  if (loss) *loss = total;
  return Tensor::from_data({objects, H, W}, std::move(probs));
}

// x <- clip(orig + (x + step - orig) * region)
Tensor apply_step(const Tensor& x, const Tensor& step, const Tensor& orig, const std::optional<Tensor>& region,
                  const AttackConfig& config) {
  auto xv = x.data(), sv = step.data(), ov = orig.data();
  std::vector<float> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    float eta = xv[i] + sv[i] - ov[i];
    if (region && region->data()[i / 3] == 0.0f) eta = 0.0f;
    out[i] = ov[i] + eta;
  }
  return clip_to_ball(Tensor::from_data(x.shape(), std::move(out)), orig, config.epsilon, config.literal_clip);
}

}  // namespace

std::string_view to_string(AttackerKind kind) {
  switch (kind) {
    case AttackerKind::random: return "random";
    case AttackerKind::fgsm: return "fgsm";
    case AttackerKind::bim: return "bim";
    case AttackerKind::pgd: return "pgd";
    case AttackerKind::ara: return "ara";
    case AttackerKind::ara_black: return "ara-black";
  }
  return "?";
}

AttackerKind parse_attacker(std::string_view name) {
  for (auto k : {AttackerKind::random, AttackerKind::fgsm, AttackerKind::bim, AttackerKind::pgd, AttackerKind::ara,
                 AttackerKind::ara_black}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown attacker '" + std::string(name) +
                              "' (expected random, fgsm, bim, pgd, ara or ara-black)");
}

std::string_view to_string(NormMode mode) {
  switch (mode) {
    case NormMode::linf: return "linf";
    case NormMode::l2: return "l2";
    case NormMode::l1: return "l1";
  }
  return "?";
}

NormMode parse_norm(std::string_view name) {
  for (auto m : {NormMode::linf, NormMode::l2, NormMode::l1}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown norm '" + std::string(name) + "' (expected linf, l2 or l1)");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0f)) throw std::invalid_argument("epsilon must be >= 0");
  if (!(beta >= 0.0f)) throw std::invalid_argument("beta must be >= 0");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (!(alpha > 0.0f)) throw std::invalid_argument("alpha must be > 0");
  if (!(region_fraction > 0.0f && region_fraction <= 1.0f)) {
    throw std::invalid_argument("region_fraction must be in (0, 1]");
  }
  if (frames_to_attack < 1) throw std::invalid_argument("frames_to_attack must be >= 1");
}

MemoryPrime build_memory_prime(const vos::VideoPrediction& clean, const synthvid::VideoSequence& video,
                               std::size_t t) {
  const std::size_t T = video.length();
  if (T < 3) throw std::invalid_argument("attack: video " + video.id + " has fewer than 3 frames");
  if (t >= T) throw std::invalid_argument("attack: frame index out of range");
  std::vector<std::size_t> picks;
  for (std::size_t k = t + 1; k < T && picks.size() < 2; ++k) picks.push_back(k);
  for (std::size_t k = t; k-- > 0 && picks.size() < 2;) picks.push_back(k);
  MemoryPrime m;
  for (std::size_t k : picks) {
    m.frames.push_back(video.frames[k]);
    m.probs.push_back(k == 0 ? video.masks[0] : clean.probs.at(k));
  }
  return m;
}

GradientMap gradient_map(const vos::VosParams& params, const MemoryPrime& memory, const Tensor& frame,
                         const Tensor& gt) {
  if (memory.frames.empty()) throw std::invalid_argument("gradient_map: memory is empty");
  if (gt.rank() != 3 || gt.dim(1) != frame.dim(0) || gt.dim(2) != frame.dim(1)) {
    throw ShapeError("gradient_map: ground truth " + shape_str(gt.shape()) + " does not match frame " +
                     shape_str(frame.shape()));
  }
  const vos::VosParams frozen = params.copy(false);
  const std::size_t O = gt.dim(0), H = frame.dim(0), W = frame.dim(1), plane = H * W;
  Tensor x = frame.detach();
  x.set_requires_grad(true);

  GradientMap g;
  std::vector<float> probs(O * plane);
  Tensor total;
  for (std::size_t o = 0; o < O; ++o) {
    std::vector<vos::EncodedMemory> enc;
    for (std::size_t i = 0; i < memory.frames.size(); ++i) {
      enc.push_back(vos::encode_memory(frozen, memory.frames[i], object_plane(memory.probs[i], o)));
    }
    Tensor p = vos::segment(frozen, std::span<const vos::EncodedMemory>(enc), x);
    Tensor l = ops::mean(ops::binary_ce(p, object_plane(gt, o), ops::CeMode::full));
    total = total.defined() ? ops::add(total, l) : l;
    std::copy(p.data().begin(), p.data().end(), probs.begin() + o * plane);
  }
  g.loss = total.item();
  total.backward();
  g.raw = x.has_grad() ? x.grad_tensor() : Tensor::zeros(frame.shape());
  g.normalized = hrl::normalize_gradient(g.raw);
  g.probs = Tensor::from_data({O, H, W}, std::move(probs));
  return g;
}

Tensor clip_to_ball(const Tensor& adv, const Tensor& orig, float epsilon, bool literal) {
  if (adv.shape() != orig.shape()) {
    throw ShapeError("clip_to_ball: " + shape_str(adv.shape()) + " vs " + shape_str(orig.shape()));
  }
  auto a = adv.data(), o = orig.data();
  if (o.empty()) return adv.detach();
  const auto [mn, mx] = std::minmax_element(o.begin(), o.end());
  const float lo = *mn - epsilon, hi = *mx + epsilon;
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    float v = std::clamp(a[i], lo, hi);
    if (!literal) v = std::clamp(v, o[i] - epsilon, o[i] + epsilon);
    out[i] = v;
  }
  return Tensor::from_data(adv.shape(), std::move(out));
}

Tensor apply_norm_variant(const Tensor& grad, NormMode mode, float beta) {
  auto g = grad.data();
  std::vector<float> out(g.size(), 0.0f);
  if (mode == NormMode::linf) {
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] > 0.0f ? beta : (g[i] < 0.0f ? -beta : 0.0f);
    return Tensor::from_data(grad.shape(), std::move(out));
  }
  double norm = 0.0;
  for (float v : g) norm += mode == NormMode::l2 ? double(v) * double(v) : std::fabs(double(v));
  if (mode == NormMode::l2) norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = static_cast<float>(double(beta) * double(g[i]) / norm);
  }
  return Tensor::from_data(grad.shape(), std::move(out));
}

std::size_t region_size(std::size_t pixels, float fraction) {
  const auto k = static_cast<std::size_t>(std::llround(double(fraction) * double(pixels)));
  return std::clamp<std::size_t>(k, 1, pixels);
}

Tensor region_mask(const Tensor& hardness, float fraction) {
  if (hardness.rank() != 2) throw ShapeError("region_mask: hardness must be [H,W]");
  auto h = hardness.data();
  std::vector<std::size_t> order(h.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t k = region_size(h.size(), fraction);
  // Row-major index order is (row, col) order, so a stable sort breaks ties.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return h[a] > h[b]; });
  std::vector<float> out(h.size(), 0.0f);
  for (std::size_t i = 0; i < k; ++i) out[order[i]] = 1.0f;
  return Tensor::from_data(hardness.shape(), std::move(out));
}

FrameAttack attack_frame(AttackerKind kind, const vos::VosParams& params, const synthvid::VideoSequence& video,
                         const vos::VideoPrediction& clean, std::size_t t, const AttackConfig& config,
                         std::uint64_t stream_index) {
  config.validate();
  const Tensor& orig = video.frames.at(t);
  const Tensor& gt = video.masks.at(t);
  const MemoryPrime memory = build_memory_prime(clean, video, t);
  Rng rng = Rng::substream(config.seed, "attack", stream_index * 1024 + t);
  const Tensor noise = uniform_noise(orig.shape(), config.epsilon, rng);

  FrameAttack out;
  auto record = [&](std::size_t r, double seg, double hl, double mh, const Tensor& x) {
    out.log.push_back({t, r, seg, hl, mh, linf_distance(x, orig)});
  };

  switch (kind) {
    case AttackerKind::random: {
      out.adversarial = clip_to_ball(ops::add(orig, noise), orig, config.epsilon, config.literal_clip);
      double seg = 0.0;
      predict_frame(params.copy(false), memory, out.adversarial, gt.dim(0), &seg, gt);
      record(1, seg, 0.0, 0.0, out.adversarial);
      return out;
    }
    case AttackerKind::fgsm: {
      const GradientMap g = gradient_map(params, memory, orig, gt);
      Tensor step = apply_norm_variant(g.raw, NormMode::linf, config.epsilon);
      out.adversarial = clip_to_ball(ops::add(orig, step), orig, config.epsilon, config.literal_clip);
      record(1, g.loss, 0.0, 0.0, out.adversarial);
      return out;
    }
    case AttackerKind::bim:
    case AttackerKind::pgd: {
      Tensor x = orig;
      if (kind == AttackerKind::pgd) {
        x = clip_to_ball(ops::add(orig, noise), orig, config.epsilon, config.literal_clip);
      }
      for (std::size_t r = 1; r <= config.iterations; ++r) {
        const GradientMap g = gradient_map(params, memory, x, gt);
        x = apply_step(x, apply_norm_variant(g.raw, NormMode::linf, config.beta), orig, std::nullopt, config);
        record(r, g.loss, 0.0, 0.0, x);
      }
      out.adversarial = x;
      return out;
    }
    case AttackerKind::ara:
    case AttackerKind::ara_black: {
      Rng init = Rng::substream(config.seed, "hrl", stream_index * 1024 + t);
      hrl::HrlTrainer trainer(hrl::HrlParams::init(init), config.hrl_optimizer, config.hardness_loss);
      const vos::VosParams frozen = params.copy(false);
      Tensor x = clip_to_ball(ops::add(orig, noise), orig, config.epsilon, config.literal_clip);
      const bool white = kind == AttackerKind::ara;
      for (std::size_t r = 1; r <= config.iterations; ++r) {
        Tensor hrl_input, probs, direction;
        double seg = 0.0;
        if (white) {
          GradientMap g = gradient_map(params, memory, x, gt);
          hrl_input = g.normalized;
          probs = g.probs;
          direction = apply_norm_variant(g.raw, config.norm, config.beta);
          seg = g.loss;
        } else {
          // No gradients: the HRL sees the frame itself and the model is only queried.
          hrl_input = hrl::normalize_gradient(x);
          probs = predict_frame(frozen, memory, x, gt.dim(0), &seg, gt);
          direction = Tensor::full(orig.shape(), config.beta);
        }
        const Tensor pseudo = hrl::pseudo_labels(gt, probs, config.alpha, config.pseudo_mode);
        const auto s = trainer.step(hrl_input, pseudo);
        std::optional<Tensor> region;
        if (config.region_fraction < 1.0f) region = region_mask(s.hardness, config.region_fraction);
        x = apply_step(x, ops::mul(replicate3(s.hardness), direction), orig, region, config);
        record(r, seg, s.loss, mean_of(s.hardness), x);
      }
      out.adversarial = x;
      return out;
    }
  }
  throw std::invalid_argument("attack_frame: unknown attacker");
}

AttackResult attack_video(AttackerKind kind, const vos::VosParams& params, const synthvid::VideoSequence& video,
                          const AttackConfig& config, std::uint64_t stream_index) {
  config.validate();
  AttackResult result;
  const vos::VideoPrediction clean = vos::infer_video(params, video);
  const std::size_t n = std::min(config.frames_to_attack, video.length());
  for (std::size_t t = 0; t < n; ++t) {
    try {
      FrameAttack fa = attack_frame(kind, params, video, clean, t, config, stream_index);
      result.frames.emplace(t, fa.adversarial);
      result.log.insert(result.log.end(), fa.log.begin(), fa.log.end());
    } catch (const hrl::HrlDiverged& e) {
      result.aborted = true;
      result.diagnostic = "video " + video.id + " frame " + std::to_string(t) + ": " + e.what();
      break;
    }
  }
  return result;
}

}  // namespace ara::attacks
