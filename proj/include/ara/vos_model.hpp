#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ara/rng.hpp"
#include "ara/synthvid.hpp"
#include "ara/tensor.hpp"

namespace ara::vos {

struct ConvLayer {
  Tensor weight;  // [O,C,k,k]
  Tensor bias;    // [O]
  std::size_t stride = 1;
  std::size_t padding = 0;

  Tensor forward(const Tensor& x) const;
};

struct VosArch {
  std::size_t feature_dim = 16;  // key channels
  std::size_t value_dim = 8;     // memory-encoder channels appended to the mask values
  std::size_t downsample = 4;  // two stride-2 stages
  std::size_t decoder_hidden = 16;
  std::size_t memory_cap = 4;  // predictions kept besides the first frame
};

/// Model weights: query encoder over RGB (keys for query and memory frames
/// alike, plus the decoder's query features), memory encoder over RGB+mask
/// (value features), and a decoder over [readout, query features].
struct VosParams {
  VosArch arch;
  std::vector<ConvLayer> memory_encoder;
  std::vector<ConvLayer> query_encoder;
  std::vector<ConvLayer> decoder;

  static VosParams init(const VosArch& arch, Rng& rng);

  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
  std::vector<Tensor> tensors() const;
  /// Deep copy; the copy's tensors require grad iff `trainable`.
  VosParams copy(bool trainable) const;
  std::size_t parameter_count() const;
};

struct MemoryEntry {
  Tensor frame;  // [H,W,3]
  Tensor mask;   // [H,W] in [0,1]
};
using MemorySet = std::vector<MemoryEntry>;

/// Encoded memory frame: keys [d, P] and values [1+dv, P], where value row 0
/// is the pooled mask and the rest are memory-encoder features;
/// P = (H/s)*(W/s).
struct EncodedMemory {
  Tensor keys;
  Tensor values;
};

EncodedMemory encode_memory(const VosParams& params, const Tensor& frame, const Tensor& mask);

/// Foreground probabilities [H,W] for `frame` given encoded memory.
Tensor segment(const VosParams& params, std::span<const EncodedMemory> memory, const Tensor& frame);
Tensor segment(const VosParams& params, const MemorySet& memory, const Tensor& frame);

/// Frame index (0-based) -> replacement frame fed to the model.
using FrameOverrides = std::map<std::size_t, Tensor>;

struct VideoPrediction {
  /// probs[t] is [O,H,W] for t = 1..T-1; probs[0] is undefined.
  std::vector<Tensor> probs;
  /// Binary per-object masks after argmax assignment, same indexing.
  std::vector<Tensor> masks;
};

/// Sequential semi-supervised inference from the first frame's ground truth.
/// Overridden frames replace the clean ones everywhere they are used; the
/// first-frame mask stays the clean ground truth.
VideoPrediction infer_video(const VosParams& params, const synthvid::VideoSequence& video,
                            const FrameOverrides& overrides = {});
VideoPrediction infer_video(const VosParams& params, const synthvid::VideoSequence& video,
                            const std::optional<Tensor>& first_frame_override);

/// Per-pixel assignment of [O,H,W] probabilities: the argmax object wins when
/// its probability is >= 0.5, otherwise background.
Tensor assign_objects(const Tensor& probs);

struct TrainConfig {
  std::size_t steps = 2000;
  float lr = 1e-3f;
  std::size_t max_skip = 4;  // max gap between sampled frames
  std::uint64_t seed = 7;
  std::size_t log_every = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  VosParams params;
  double final_loss = 0.0;  // mean loss over the last min(100, steps) steps
  std::vector<double> losses;
};

/// Clean training from scratch (init from the "init" stream of config.seed).
TrainResult train(const std::vector<synthvid::VideoSequence>& dataset, const TrainConfig& config,
                  const VosArch& arch = {});
/// Continues training from `start`. Exposed for fine-tuning.
TrainResult train_from(const VosParams& start, const std::vector<synthvid::VideoSequence>& dataset,
                       const TrainConfig& config);

/// One three-frame training sample: frame 0 with its ground truth plus two
/// later frames. Returns the mean full-BCE loss as a graph scalar.
/// `first_frame` replaces frame 0 when defined.
Tensor clip_loss(const VosParams& params, const synthvid::VideoSequence& video, std::size_t object,
                 std::size_t t2, std::size_t t3, const Tensor& first_frame = {});

// Checkpoint: "ARAM" | version u32 | arch u32 x5 | count u32 |
//   count x (name_len u32 | name bytes | ARAT tensor)
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const VosParams& params, const std::filesystem::path& path);
VosParams load_checkpoint(const std::filesystem::path& path);

}  // namespace ara::vos
