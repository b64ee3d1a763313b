#pragma once

#include <map>
#include <string>
#include <vector>

#include "ara/attacks.hpp"

// Adversarial fine-tuning of a clean-trained model.
namespace ara::defense {

struct DefenseConfig {
  attacks::AttackerKind attacker = attacks::AttackerKind::ara;
  attacks::AttackConfig attack;
  std::size_t steps = 500;  // a quarter of the clean schedule
  float lr = 1e-4f;         // a tenth of the clean rate
  std::size_t max_skip = 4;
  std::uint64_t seed = 11;
  int jobs = 0;
  std::size_t log_every = 0;
};

/// Each epoch (one pass over the dataset, in a seeded order) first attacks
/// every video's first frame against a snapshot of the current params, then
/// takes one training step per video on the attacked clip.
vos::TrainResult adversarial_finetune(const vos::VosParams& params,
                                      const std::vector<synthvid::VideoSequence>& dataset,
                                      const DefenseConfig& config);

struct GridCell {
  double jf = 0.0;
  double drop = 0.0;  // clean J&F of the same model minus jf
};

/// Rows = attacker, columns = defense ("none", "pgd", "ara").
struct DefenseGrid {
  std::vector<std::string> defenses;
  std::vector<std::string> attackers;
  std::map<std::string, double> clean_jf;  // per defense
  std::map<std::string, std::map<std::string, GridCell>> cells;  // [attacker][defense]
};

/// Mean clean and attacked J&F of each model over `eval`.
DefenseGrid evaluate_grid(const std::map<std::string, vos::VosParams>& models,
                          const std::vector<synthvid::VideoSequence>& eval,
                          const std::vector<attacks::AttackerKind>& attackers,
                          const attacks::AttackConfig& attack, int jobs = 0);

}  // namespace ara::defense
