#include "ara/metrics.hpp"

#include <algorithm>

namespace ara::metrics {

namespace {

void check_binary_pair(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw MetricError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  }
  if (a.rank() != 2) throw MetricError(std::string(op) + ": masks must be [H,W]");
  for (const Tensor* t : {&a, &b}) {
    for (float v : t->data()) {
      if (v != 0.0f && v != 1.0f) throw MetricError(std::string(op) + ": mask is not binary");
    }
  }
}

// Fraction of `from` boundary pixels with a `to` boundary pixel within radius.
std::size_t matched(const std::vector<std::uint8_t>& from, const std::vector<std::uint8_t>& to,
                    long H, long W, long radius) {
  std::size_t hits = 0;
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      if (!from[y * W + x]) continue;
      bool found = false;
      for (long yy = std::max(0L, y - radius); yy <= std::min(H - 1, y + radius) && !found; ++yy)
        for (long xx = std::max(0L, x - radius); xx <= std::min(W - 1, x + radius); ++xx)
          if (to[yy * W + xx]) {
            found = true;
            break;
          }
      hits += found;
    }
  }
  return hits;
}

Tensor slice_object(const Tensor& t, std::size_t o) {
  const std::size_t plane = t.dim(1) * t.dim(2);
  auto d = t.data();
  return Tensor::from_data({t.dim(1), t.dim(2)},
                           std::vector<float>(d.begin() + o * plane, d.begin() + (o + 1) * plane));
}

}  // namespace

double region_similarity(const Tensor& pred, const Tensor& gt) {
  check_binary_pair("region_similarity", pred, gt);
  auto p = pred.data(), g = gt.data();
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] != 0.0f, b = g[i] != 0.0f;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

std::vector<std::uint8_t> boundary_map(const Tensor& mask) {
  const long H = static_cast<long>(mask.dim(0)), W = static_cast<long>(mask.dim(1));
  auto m = mask.data();
  auto at = [&](long y, long x) -> bool {
    if (y < 0 || x < 0 || y >= H || x >= W) return false;
    return m[y * W + x] != 0.0f;
  };
  std::vector<std::uint8_t> out(static_cast<std::size_t>(H * W), 0);
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      const bool c = at(y, x), n = at(y - 1, x), s = at(y + 1, x), w = at(y, x - 1), e = at(y, x + 1);
      const bool dil = c || n || s || w || e;
      const bool ero = c && n && s && w && e;
      out[y * W + x] = dil && !ero;
    }
  }
  return out;
}

double contour_accuracy(const Tensor& pred, const Tensor& gt, int radius) {
  check_binary_pair("contour_accuracy", pred, gt);
  if (radius < 0) throw MetricError("contour_accuracy: radius must be >= 0");
  const long H = static_cast<long>(pred.dim(0)), W = static_cast<long>(pred.dim(1));
  const auto bp = boundary_map(pred), bg = boundary_map(gt);
  const auto np = static_cast<std::size_t>(std::count(bp.begin(), bp.end(), 1));
  const auto ng = static_cast<std::size_t>(std::count(bg.begin(), bg.end(), 1));
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const double precision = double(matched(bp, bg, H, W, radius)) / double(np);
  const double recall = double(matched(bg, bp, H, W, radius)) / double(ng);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

EvalResult evaluate_video(const std::vector<Tensor>& preds, const std::vector<Tensor>& gts, int radius) {
  if (preds.size() != gts.size()) {
    throw MetricError("evaluate_video: " + std::to_string(preds.size()) + " predictions for " +
                      std::to_string(gts.size()) + " ground-truth frames");
  }
  EvalResult r;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Tensor& p = preds[i];
    const Tensor& g = gts[i];
    if (p.shape() != g.shape()) {
      throw MetricError("evaluate_video: frame " + std::to_string(i) + " shape mismatch");
    }
    double j = 0.0, f = 0.0;
    if (p.rank() == 2) {
      j = region_similarity(p, g);
      f = contour_accuracy(p, g, radius);
    } else if (p.rank() == 3) {
      const std::size_t O = p.dim(0);
      for (std::size_t o = 0; o < O; ++o) {
        Tensor po = slice_object(p, o), go = slice_object(g, o);
        j += region_similarity(po, go);
        f += contour_accuracy(po, go, radius);
      }
      j /= double(O);
      f /= double(O);
    } else {
      throw MetricError("evaluate_video: masks must be [H,W] or [O,H,W]");
    }
    r.frame_j.push_back(j);
    r.frame_f.push_back(f);
  }
  if (!r.frame_j.empty()) {
    double sj = 0.0, sf = 0.0;
    for (double v : r.frame_j) sj += v;
    for (double v : r.frame_f) sf += v;
    r.mean_j = sj / double(r.frame_j.size());
    r.mean_f = sf / double(r.frame_f.size());
  }
  r.jf = (r.mean_j + r.mean_f) / 2.0;
  return r;
}

double attack_drop(const EvalResult& clean, const EvalResult& attacked) { return clean.jf - attacked.jf; }

Tensor binarize(const Tensor& probs, float threshold) {
  std::vector<float> out(probs.numel());
  auto p = probs.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = p[i] >= threshold ? 1.0f : 0.0f;
  return Tensor::from_data(probs.shape(), std::move(out));
}

}  // namespace ara::metrics
