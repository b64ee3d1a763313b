#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ara/tensor.hpp"

namespace ara::synthvid {

enum class ShapeKind { disc, square, triangle };
enum class Trajectory { linear, sinusoidal };

/// One moving object. Positions are pixel coordinates of the shape centre
/// at frame index 0 (continuous; pixel (x, y) has centre (x+0.5, y+0.5)).
struct ObjectSpec {
  ShapeKind kind = ShapeKind::disc;
  double size = 8.0;  // disc radius, square half-side, triangle circumradius
  Trajectory trajectory = Trajectory::linear;
  double x0 = 32.0, y0 = 32.0;
  double vx = 0.0, vy = 0.0;      // pixels/frame
  double amplitude = 0.0;         // sinusoidal: vertical swing in pixels
  double period = 8.0;            // sinusoidal: frames per cycle
  int polarity = +1;              // +1 brighter than background, -1 darker
};

struct SceneSpec {
  std::vector<ObjectSpec> objects;
  std::vector<ObjectSpec> distractors;  // rendered beneath the objects, never labelled
  double contrast = 1.0;           // separation of fg/bg texture means, in [0,1]
  double noise = 0.0;              // amplitude of per-frame iid pixel noise
  double texture_amplitude = 0.25; // peak-to-peak value-noise swing of each texture
  double texture_cell = 8.0;       // value-noise lattice spacing in pixels
};

/// T frames [H,W,3] in [0,1] and per-frame masks [object_count,H,W] in
/// {0,1}; per-object masks are disjoint (later objects occlude earlier ones).
struct VideoSequence {
  std::string id;
  std::vector<Tensor> frames;
  std::vector<Tensor> masks;
  std::size_t object_count = 0;
  std::uint64_t seed = 0;

  std::size_t length() const { return frames.size(); }
  std::size_t height() const { return frames.empty() ? 0 : frames.front().dim(0); }
  std::size_t width() const { return frames.empty() ? 0 : frames.front().dim(1); }
  /// Binary [H,W] mask of one object in one frame.
  Tensor object_mask(std::size_t t, std::size_t object) const;
};

/// Per-channel means of the background and of each object's texture, as
/// rendered by generate() for (spec, seed).
struct Palette {
  double background[3];
  std::vector<std::array<double, 3>> objects;
  std::vector<std::array<double, 3>> distractors;
};

Palette palette_for(const SceneSpec& spec, std::uint64_t seed);

/// Renders a video deterministically from (spec, seed). Throws
/// std::invalid_argument for H or W < 32, T < 3, or an object or distractor
/// that leaves more than half of its footprint outside the frame.
VideoSequence generate(const SceneSpec& spec, std::size_t H, std::size_t W, std::size_t T,
                       std::uint64_t seed);

/// Rasterised footprint of one object at frame t (no frame clipping applied
/// to the count of `total`, only to `inside`).
struct Footprint {
  std::size_t inside = 0;
  std::size_t total = 0;
};
Footprint footprint(const ObjectSpec& obj, std::size_t H, std::size_t W, std::size_t t);

bool covers(const ObjectSpec& obj, double px, double py, std::size_t t);

/// Ranges used to sample random scenes for a dataset.
struct DataConfig {
  std::size_t count = 20;
  std::size_t height = 64, width = 64, length = 8;
  double two_object_fraction = 0.3;
  std::size_t distractors = 1;
  double contrast_min = 0.35, contrast_max = 1.0;
  double noise = 0.02;
  double size_min = 7.0, size_max = 12.0;
  double speed_max = 2.0;
  std::uint64_t seed = 1;
};

SceneSpec random_scene(const DataConfig& config, std::uint64_t scene_seed);

/// `count` videos from named sub-stream `stream` of config.seed.
std::vector<VideoSequence> generate_dataset(const DataConfig& config, const std::string& stream);

// On-disk dataset: <dir>/manifest.txt plus one <id>.bin per video holding
// the frame tensors followed by the mask tensors.
inline constexpr int kDatasetVersion = 1;

void save_dataset(const std::vector<VideoSequence>& videos, const std::filesystem::path& dir);
std::vector<VideoSequence> load_dataset(const std::filesystem::path& dir);

}  // namespace ara::synthvid
