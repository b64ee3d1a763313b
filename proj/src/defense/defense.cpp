#include "ara/defense.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>

#include "ara/optim.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ara::defense {

vos::TrainResult adversarial_finetune(const vos::VosParams& params,
                                      const std::vector<synthvid::VideoSequence>& dataset,
                                      const DefenseConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("defend: dataset is empty");
  config.attack.validate();
  vos::TrainResult result;
  result.params = params.copy(true);
  if (config.steps == 0) return result;

  Adam adam(result.params.tensors(), AdamConfig{.lr = config.lr});
  Rng rng = Rng::substream(config.seed, "defense-sampling");
  const long n = static_cast<long>(dataset.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; step < config.steps; ++epoch) {
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const std::size_t take = std::min(order.size(), config.steps - step);

    // Attack this epoch's videos against a frozen snapshot.
    const vos::VosParams snapshot = result.params.copy(false);
    attacks::AttackConfig ac = config.attack;
    ac.frames_to_attack = 1;
    std::vector<Tensor> adv(dataset.size());
    std::vector<std::exception_ptr> errors(dataset.size());
#ifdef _OPENMP
    const int threads = config.jobs > 0 ? config.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
    for (long i = 0; i < static_cast<long>(take); ++i) {
      try {
        const std::size_t v = order[static_cast<std::size_t>(i)];
        const auto clean = vos::infer_video(snapshot, dataset[v]);
        adv[v] = attacks::attack_frame(config.attacker, snapshot, dataset[v], clean, 0, ac,
                                       epoch * static_cast<std::uint64_t>(n) + v)
                     .adversarial;
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);

    for (std::size_t i = 0; i < take; ++i, ++step) {
      const auto& video = dataset[order[i]];
      const std::size_t T = video.length();
      const std::size_t object = rng.below(video.object_count);
      const std::size_t t2 = 1 + rng.below(std::min(config.max_skip, T - 2));
      const std::size_t t3 = t2 + 1 + rng.below(std::min(config.max_skip, T - 1 - t2));
      adam.zero_grad();
      Tensor loss = vos::clip_loss(result.params, video, object, t2, t3, adv[order[i]]);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw vos::TrainingDiverged("defend: loss became " + std::to_string(value) + " at step " +
                                    std::to_string(step) + " (video " + video.id + ")");
      }
      loss.backward();
      adam.step();
      result.losses.push_back(value);
      if (config.log_every && (step + 1) % config.log_every == 0) {
        std::fprintf(stderr, "defend step %zu loss %.4f\n", step + 1, value);
      }
    }
  }
  const std::size_t tail = std::min<std::size_t>(100, result.losses.size());
  double acc = 0.0;
  for (std::size_t i = result.losses.size() - tail; i < result.losses.size(); ++i) acc += result.losses[i];
  result.final_loss = acc / double(tail);
  return result;
}

DefenseGrid evaluate_grid(const std::map<std::string, vos::VosParams>& models,
                          const std::vector<synthvid::VideoSequence>& eval,
                          const std::vector<attacks::AttackerKind>& attackers,
                          const attacks::AttackConfig& attack, int jobs) {
  DefenseGrid grid;
  for (const auto& [name, params] : models) {
    grid.defenses.push_back(name);
    for (auto kind : attackers) {
      const auto outcomes = attacks::run_attacks(kind, params, eval, attack, jobs);
      double clean = 0.0, adv = 0.0;
      for (const auto& o : outcomes) {
        clean += o.clean.jf;
        adv += o.attacked.jf;
      }
      clean /= double(outcomes.size());
      adv /= double(outcomes.size());
      grid.clean_jf[name] = clean;
      grid.cells[std::string(attacks::to_string(kind))][name] = {adv, clean - adv};
    }
  }
  for (auto kind : attackers) grid.attackers.emplace_back(attacks::to_string(kind));
  return grid;
}

}  // namespace ara::defense
