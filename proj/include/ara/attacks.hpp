#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ara/hrl.hpp"
#include "ara/metrics.hpp"
#include "ara/synthvid.hpp"
#include "ara/vos_model.hpp"

namespace ara::attacks {

enum class AttackerKind { random, fgsm, bim, pgd, ara, ara_black };
enum class NormMode { linf, l2, l1 };

std::string_view to_string(AttackerKind kind);
AttackerKind parse_attacker(std::string_view name);  // "ara-black" etc.
std::string_view to_string(NormMode mode);
NormMode parse_norm(std::string_view name);

struct AttackConfig {
  float epsilon = 8.0f / 255.0f;
  float beta = 8.0f / 255.0f;
  std::size_t iterations = 10;
  float alpha = hrl::kDefaultAlpha;
  NormMode norm = NormMode::linf;
  float region_fraction = 1.0f;  // ARA only
  std::size_t frames_to_attack = 1;
  std::uint64_t seed = 1;
  /// Skip the per-pixel epsilon projection and keep only the global range clip.
  bool literal_clip = false;
  ops::CeMode pseudo_mode = ops::CeMode::literal;
  hrl::HardnessLoss hardness_loss = hrl::HardnessLoss::mse;
  AdamConfig hrl_optimizer = hrl::default_hrl_optimizer();

  void validate() const;
};

/// Two neighbouring frames with their clean-pass predictions, used as the
/// memory when the attacked frame itself is segmented.
struct MemoryPrime {
  std::vector<Tensor> frames;  // [H,W,3]
  std::vector<Tensor> probs;   // [O,H,W]
};

/// Builds the memory for attacking frame t from frames t+1 and t+2. Near the
/// end of the video the nearest remaining frames are used instead.
MemoryPrime build_memory_prime(const vos::VideoPrediction& clean, const synthvid::VideoSequence& video,
                               std::size_t t);

struct GradientMap {
  Tensor raw;         // dL/dframe, [H,W,3]
  Tensor normalized;  // per-channel layer norm of raw
  Tensor probs;       // prediction of the attacked frame, [O,H,W]
  double loss = 0.0;  // summed over objects
};

/// Gradient of the segmentation loss of `frame` (segmented from `memory`)
/// against its ground truth `gt` [O,H,W]. Params are not updated.
GradientMap gradient_map(const vos::VosParams& params, const MemoryPrime& memory, const Tensor& frame,
                         const Tensor& gt);

/// Clamp into [min(orig)-eps, max(orig)+eps], then (unless literal) into
/// [orig-eps, orig+eps] per element.
Tensor clip_to_ball(const Tensor& adv, const Tensor& orig, float epsilon, bool literal = false);

/// linf: beta*sign(G); l2/l1: beta*G/||G||. A zero gradient gives a zero step.
Tensor apply_norm_variant(const Tensor& grad, NormMode mode, float beta);

/// 1 on the round(fraction*H*W) highest-scoring pixels (at least one), ties
/// broken by (row, col).
Tensor region_mask(const Tensor& hardness, float fraction);
std::size_t region_size(std::size_t pixels, float fraction);

struct IterationRecord {
  std::size_t frame = 0;
  std::size_t iteration = 0;  // 1-based
  double seg_loss = 0.0;
  double hardness_loss = 0.0;
  double mean_hardness = 0.0;
  double eta_linf = 0.0;
};

struct FrameAttack {
  Tensor adversarial;
  std::vector<IterationRecord> log;
};

/// Runs one attacker on frame t of `video`.
FrameAttack attack_frame(AttackerKind kind, const vos::VosParams& params, const synthvid::VideoSequence& video,
                         const vos::VideoPrediction& clean, std::size_t t, const AttackConfig& config,
                         std::uint64_t stream_index = 0);

struct AttackResult {
  vos::FrameOverrides frames;
  std::vector<IterationRecord> log;
  bool aborted = false;
  std::string diagnostic;
};

/// Attacks frames 0..frames_to_attack-1 independently, in index order.
AttackResult attack_video(AttackerKind kind, const vos::VosParams& params, const synthvid::VideoSequence& video,
                          const AttackConfig& config, std::uint64_t stream_index = 0);

struct VideoOutcome {
  std::string id;
  metrics::EvalResult clean;
  metrics::EvalResult attacked;
  double drop = 0.0;
  AttackResult attack;
};

/// Evaluates the clean and attacked predictions of one video.
metrics::EvalResult evaluate(const vos::VosParams& params, const synthvid::VideoSequence& video,
                             const vos::FrameOverrides& overrides = {});

/// Attacks every video (videos run in parallel, up to `jobs` threads; 0 means
/// the library default). Video i uses attack stream i, so results do not
/// depend on the job count.
std::vector<VideoOutcome> run_attacks(AttackerKind kind, const vos::VosParams& params,
                                      const std::vector<synthvid::VideoSequence>& videos,
                                      const AttackConfig& config, int jobs = 0);

}  // namespace ara::attacks
