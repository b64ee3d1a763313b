#include <exception>

#include "ara/attacks.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ara::attacks {

metrics::EvalResult evaluate(const vos::VosParams& params, const synthvid::VideoSequence& video,
                             const vos::FrameOverrides& overrides) {
  const vos::VideoPrediction pred = vos::infer_video(params, video, overrides);
  std::vector<Tensor> preds(pred.masks.begin() + 1, pred.masks.end());
  std::vector<Tensor> gts(video.masks.begin() + 1, video.masks.end());
  return metrics::evaluate_video(preds, gts);
}

std::vector<VideoOutcome> run_attacks(AttackerKind kind, const vos::VosParams& params,
                                      const std::vector<synthvid::VideoSequence>& videos,
                                      const AttackConfig& config, int jobs) {
  config.validate();
  std::vector<VideoOutcome> out(videos.size());
  std::vector<std::exception_ptr> errors(videos.size());
  const long n = static_cast<long>(videos.size());
#ifdef _OPENMP
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
  for (long i = 0; i < n; ++i) {
    try {
      const auto& v = videos[static_cast<std::size_t>(i)];
      VideoOutcome& o = out[static_cast<std::size_t>(i)];
      o.id = v.id;
      o.clean = evaluate(params, v);
      o.attack = attack_video(kind, params, v, config, static_cast<std::uint64_t>(i));
      o.attacked = evaluate(params, v, o.attack.frames);
      o.drop = metrics::attack_drop(o.clean, o.attacked);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  (void)jobs;
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace ara::attacks
