#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ara/tensor.hpp"

// DAVIS-style evaluation on binary masks.
namespace ara::metrics {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kDefaultContourRadius = 1;
inline constexpr float kBinarizeThreshold = 0.5f;

/// IoU of two binary [H,W] masks; 1 when both are empty.
double region_similarity(const Tensor& pred, const Tensor& gt);

/// 4-connected morphological gradient (dilation minus erosion); pixels
/// outside the image count as background. Returned row-major, 0/1.
std::vector<std::uint8_t> boundary_map(const Tensor& mask);

/// Boundary F1. A boundary pixel matches if the other mask has a boundary
/// pixel within Chebyshev distance `radius`. 1 when both boundaries are
/// empty, 0 when precision + recall is 0.
double contour_accuracy(const Tensor& pred, const Tensor& gt, int radius = kDefaultContourRadius);

struct EvalResult {
  std::vector<double> frame_j;  // per evaluated frame, averaged over objects
  std::vector<double> frame_f;
  double mean_j = 0.0;
  double mean_f = 0.0;
  double jf = 0.0;  // (mean_j + mean_f) / 2
};

/// preds[i] and gts[i] are binary masks of one frame, either [H,W] or
/// [O,H,W]; every object is scored as its own binary problem.
EvalResult evaluate_video(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts,
                          int radius = kDefaultContourRadius);

/// clean J&F minus attacked J&F.
double attack_drop(const EvalResult& clean, const EvalResult& attacked);

/// 1 where p >= threshold.
Tensor binarize(const Tensor& probs, float threshold = kBinarizeThreshold);

}  // namespace ara::metrics
