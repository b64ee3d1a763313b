#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ara/cli.hpp"
#include "ara/defense.hpp"
#include "ara/serialize.hpp"
#include "metric_oracles.hpp"
#include "op_cases.hpp"

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

using namespace ara;
using attacks::AttackerKind;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

constexpr std::size_t kEvalVideos = 20;
constexpr std::size_t kAttackSeeds = 5;

int failures = 0;

void verdict(int id, bool pass, const std::string& what) {
  std::printf("criterion %d %s: %s\n", id, pass ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void note(const char* fmt, auto... args) {
  std::printf("  ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

// Percentile-bootstrap interval of the mean of paired differences.
struct Interval {
  double lo, hi;
};

Interval bootstrap_mean(const std::vector<double>& diffs, std::uint64_t seed, std::size_t resamples = 10000) {
  Rng rng = Rng::substream(seed, "bootstrap");
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i) s += diffs[rng.below(diffs.size())];
    m = s / double(diffs.size());
  }
  std::sort(means.begin(), means.end());
  return {means[static_cast<std::size_t>(0.025 * double(resamples))],
          means[static_cast<std::size_t>(0.975 * double(resamples)) - 1]};
}

// ---------------------------------------------------------------------------

void gradient_checks() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  std::size_t checked = 0;
  double worst = 0.0;
  std::string worst_case;
  for (auto& c : testing::op_cases(rng)) {
    const auto g = testing::gradcheck(c.lib, c.ref, c.inputs, rng, c.per_input, 1e-4, c.check);
    checked += g.checked;
    if (g.max_rel >= worst) {
      worst = g.max_rel;
      worst_case = c.name;
    }
  }
  const double s = seconds_since(t0);
  verdict(1, checked >= 100 && worst < 1e-3 && s < 30.0,
          fmt("%zu elements, max relative error %.2e (%s), %.1fs", checked, worst, worst_case.c_str(), s));
}

void metric_oracles() {
  std::size_t pairs = 0;
  double worst = 0.0;
  for (const auto& p : testing::metric_oracles()) {
    worst = std::max(worst, std::abs(metrics::region_similarity(p.pred, p.gt) - p.j));
    worst = std::max(worst, std::abs(metrics::contour_accuracy(p.pred, p.gt, p.radius) - p.f));
    ++pairs;
  }
  verdict(2, pairs >= 10 && worst <= 1e-9, fmt("%zu oracle pairs, max deviation %.1e", pairs, worst));
}

// Independent predicate: some object has a foreground pixel whose literal CE exceeds alpha.
bool predicate(const Tensor& gt, const Tensor& probs, std::size_t i, double alpha) {
  const std::size_t plane = gt.dim(1) * gt.dim(2);
  for (std::size_t o = 0; o < gt.dim(0); ++o) {
    const double y = gt.data()[o * plane + i];
    const double p = std::clamp(double(probs.data()[o * plane + i]), 1e-7, 1.0 - 1e-7);
    if (-y * std::log(p) > alpha) return true;
  }
  return false;
}

void constraint_suite(const vos::VosParams& params, const std::vector<synthvid::VideoSequence>& eval) {
  const auto t0 = Clock::now();
  attacks::AttackConfig cfg;
  const float eps = cfg.epsilon;
  std::size_t frames = 0, box_violations = 0, range_violations = 0;
  for (auto kind : {AttackerKind::random, AttackerKind::fgsm, AttackerKind::bim, AttackerKind::pgd, AttackerKind::ara,
                    AttackerKind::ara_black}) {
    const auto out = attacks::run_attacks(kind, params, eval, cfg);
    for (std::size_t i = 0; i < eval.size(); ++i) {
      for (const auto& [t, adv] : out[i].attack.frames) {
        ++frames;
        const auto o = eval[i].frames[t].data();
        const auto [lo, hi] = std::minmax_element(o.begin(), o.end());
        for (std::size_t k = 0; k < o.size(); ++k) {
          const float a = adv.data()[k];
          if (std::abs(a - o[k]) > eps + 1e-6f) ++box_violations;
          if (a < *lo - eps - 1e-6f || a > *hi + eps + 1e-6f) ++range_violations;
        }
      }
    }
  }

  // Drive the hard-region loop by hand to inspect every intermediate map.
  std::size_t sign_violations = 0, hardness_violations = 0, label_mismatches = 0, maps = 0;
  double hmin = 1.0, hmax = 0.0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const auto& v = eval[i];
    const auto clean = vos::infer_video(params, v);
    const auto memory = attacks::build_memory_prime(clean, v, 0);
    Rng init = Rng::substream(cfg.seed, "hrl", i);
    hrl::HrlTrainer trainer(hrl::HrlParams::init(init), cfg.hrl_optimizer);
    Tensor x = v.frames[0];
    for (std::size_t r = 0; r < cfg.iterations; ++r) {
      const auto g = attacks::gradient_map(params, memory, x, v.masks[0]);
      const Tensor s = ops::sign(g.raw);
      for (float e : s.data()) sign_violations += !(e == -1.0f || e == 0.0f || e == 1.0f);
      const Tensor pseudo = hrl::pseudo_labels(v.masks[0], g.probs, cfg.alpha);
      for (std::size_t p = 0; p < pseudo.numel(); ++p)
        label_mismatches += (pseudo.data()[p] == 1.0f) != predicate(v.masks[0], g.probs, p, cfg.alpha);
      const auto step = trainer.step(g.normalized, pseudo);
      ++maps;
      for (float h : step.hardness.data()) {
        hardness_violations += !(h > 0.0f && h < 1.0f);
        hmin = std::min(hmin, double(h));
        hmax = std::max(hmax, double(h));
      }
      std::vector<float> hz(x.numel());
      for (std::size_t k = 0; k < hz.size(); ++k) hz[k] = step.hardness.data()[k / 3] * s.data()[k] * cfg.beta;
      x = attacks::clip_to_ball(ops::add(x, Tensor::from_data(x.shape(), hz)), v.frames[0], eps);
    }
  }
  const double secs = seconds_since(t0);
  note("hardness range over %zu maps: [%.3g, %.3g]", maps, hmin, hmax);
  verdict(3,
          box_violations == 0 && range_violations == 0 && sign_violations == 0 && hardness_violations == 0 &&
              label_mismatches == 0,
          fmt("%zu frames from 6 attackers x %zu videos; violations: box %zu, range %zu, sign %zu, hardness %zu, "
              "pseudo-label %zu (%.0fs)",
              frames, eval.size(), box_violations, range_violations, sign_violations, hardness_violations,
              label_mismatches, secs));
}

vos::VosParams clean_training(const std::vector<synthvid::VideoSequence>& train,
                              const std::vector<synthvid::VideoSequence>& eval) {
  const auto t0 = Clock::now();
  vos::TrainConfig tc;
  const auto result = vos::train(train, tc);
  const double train_s = seconds_since(t0);
  double jf = 0.0;
  for (const auto& v : eval) jf += attacks::evaluate(result.params, v).jf;
  jf /= double(eval.size());
  const double total = seconds_since(t0);
  note("trained %zu steps on %zu videos in %.0fs, final loss %.4f", tc.steps, train.size(), train_s,
       result.final_loss);
  verdict(4, jf >= 0.80 && total < 600.0,
          fmt("clean J&F %.4f on %zu held-out videos, train + eval %.0fs", jf, eval.size(), total));
  return result.params;
}

// drops[attacker][seed * videos + video]
using DropTable = std::map<AttackerKind, std::vector<double>>;

DropTable attack_matrix(const vos::VosParams& params, const std::vector<synthvid::VideoSequence>& eval,
                        std::vector<double>& ara_first, std::vector<double>& ara_last, double& seconds) {
  const auto t0 = Clock::now();
  DropTable drops;
  for (std::uint64_t seed = 1; seed <= kAttackSeeds; ++seed) {
    attacks::AttackConfig cfg;
    cfg.seed = seed;
    for (auto kind : {AttackerKind::random, AttackerKind::fgsm, AttackerKind::pgd, AttackerKind::ara,
                      AttackerKind::ara_black}) {
      const auto out = attacks::run_attacks(kind, params, eval, cfg);
      for (const auto& o : out) {
        drops[kind].push_back(o.drop);
        if (kind == AttackerKind::ara && seed == 1) {
          ara_first.push_back(o.attack.log.front().hardness_loss);
          ara_last.push_back(o.attack.log.back().hardness_loss);
        }
      }
    }
  }
  seconds = seconds_since(t0);
  return drops;
}

void drop_ordering(const DropTable& drops, double seconds) {
  const double r = mean(drops.at(AttackerKind::random)), f = mean(drops.at(AttackerKind::fgsm)),
               p = mean(drops.at(AttackerKind::pgd)), a = mean(drops.at(AttackerKind::ara));
  std::vector<double> diff;
  for (std::size_t i = 0; i < drops.at(AttackerKind::ara).size(); ++i)
    diff.push_back(drops.at(AttackerKind::ara)[i] - drops.at(AttackerKind::pgd)[i]);
  const Interval ci = bootstrap_mean(diff, 5);
  note("mean drop over %zu videos x %zu seeds: random %.4f, fgsm %.4f, pgd %.4f, ara %.4f, ara-black %.4f",
       kEvalVideos, kAttackSeeds, r, f, p, a, mean(drops.at(AttackerKind::ara_black)));
  verdict(5, r < f && f < p && p < a && ci.lo > 0.0 && seconds < 1200.0,
          fmt("random %.4f < fgsm %.4f < pgd %.4f < ara %.4f; ara - pgd 95%% CI [%.4f, %.4f]; %.0fs", r, f, p, a,
              ci.lo, ci.hi, seconds));
}

void black_box(const DropTable& drops) {
  std::vector<double> diff;
  for (std::size_t i = 0; i < drops.at(AttackerKind::ara_black).size(); ++i)
    diff.push_back(drops.at(AttackerKind::ara_black)[i] - drops.at(AttackerKind::random)[i]);
  const Interval ci = bootstrap_mean(diff, 6);
  verdict(6, ci.lo > 0.0,
          fmt("ara-black drop %.4f vs random %.4f; difference 95%% CI [%.4f, %.4f]",
              mean(drops.at(AttackerKind::ara_black)), mean(drops.at(AttackerKind::random)), ci.lo, ci.hi));
}

void hrl_learning(const std::vector<double>& first, const std::vector<double>& last) {
  std::size_t improved = 0;
  for (std::size_t i = 0; i < first.size(); ++i) improved += last[i] < first[i];
  const double share = double(improved) / double(first.size());
  verdict(7, share >= 0.8,
          fmt("hardness loss fell from iteration 1 to K in %zu of %zu videos (mean %.4f -> %.4f)", improved,
              first.size(), mean(first), mean(last)));
}

bool non_increasing(const std::vector<double>& jf, double band) {
  for (std::size_t i = 1; i < jf.size(); ++i)
    if (jf[i] > jf[i - 1] + band) return false;
  return true;
}

void monotonicity(const vos::VosParams& params, const std::vector<synthvid::VideoSequence>& eval) {
  const auto t0 = Clock::now();
  auto sweep = [&](const char* axis, const std::vector<double>& values, auto apply) {
    std::vector<double> jf;
    std::string line;
    for (double x : values) {
      attacks::AttackConfig cfg;
      apply(cfg, x);
      double s = 0.0;
      for (const auto& o : attacks::run_attacks(AttackerKind::ara, params, eval, cfg)) s += o.attacked.jf;
      jf.push_back(s / double(eval.size()));
      line += fmt(" %g:%.4f", x, jf.back());
    }
    note("%s sweep (value:adv J&F)%s", axis, line.c_str());
    return non_increasing(jf, 0.01);
  };
  const bool eps_ok = sweep("epsilon*255", {1, 2, 4, 8, 16, 32}, [](attacks::AttackConfig& c, double x) {
    c.epsilon = c.beta = static_cast<float>(x / 255.0);
  });
  const bool region_ok = sweep("region", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0},
                               [](attacks::AttackConfig& c, double x) { c.region_fraction = static_cast<float>(x); });
  const bool frames_ok = sweep("frames", {1, 2, 4, 8}, [](attacks::AttackConfig& c, double x) {
    c.frames_to_attack = static_cast<std::size_t>(x);
  });
  verdict(8, eps_ok && region_ok && frames_ok,
          fmt("non-increasing within 0.01: epsilon %s, region %s, frames %s (%.0fs)", eps_ok ? "yes" : "no",
              region_ok ? "yes" : "no", frames_ok ? "yes" : "no", seconds_since(t0)));
}

void defense_grid(const vos::VosParams& params, const std::vector<synthvid::VideoSequence>& train,
             const std::vector<synthvid::VideoSequence>& eval) {
  const auto t0 = Clock::now();
  std::map<std::string, vos::VosParams> models{{"none", params}};
  for (auto kind : {AttackerKind::pgd, AttackerKind::ara}) {
    defense::DefenseConfig dc;
    dc.attacker = kind;
    models[std::string(attacks::to_string(kind))] = defense::adversarial_finetune(params, train, dc).params;
  }
  const auto grid = defense::evaluate_grid(models, eval, {AttackerKind::pgd, AttackerKind::ara}, {});
  for (const auto& a : grid.attackers)
    for (const auto& d : grid.defenses)
      note("attacker %s, defense %s: clean %.4f, adv %.4f, drop %.4f", a.c_str(), d.c_str(), grid.clean_jf.at(d),
           grid.cells.at(a).at(d).jf, grid.cells.at(a).at(d).drop);
  const double base = grid.cells.at("ara").at("none").drop;
  const double defended = grid.cells.at("ara").at("ara").drop;
  const double recovery = base > 0.0 ? 1.0 - defended / base : 0.0;
  const double clean_loss = grid.clean_jf.at("none") - grid.clean_jf.at("ara");
  const double secs = seconds_since(t0);
  verdict(9, recovery >= 0.4 && clean_loss < 0.02 && secs < 1800.0,
          fmt("ARA drop %.4f -> %.4f under ARA defense (recovery %.0f%%), clean J&F change %+.4f, %.0fs", base,
              defended, 100.0 * recovery, -clean_loss, secs));
}

std::map<std::string, std::string> csv_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().extension() == ".csv")
      out[fs::relative(e.path(), root).generic_string()] = io::read_file(e.path());
  return out;
}

void reproducibility() {
  const fs::path root = fs::temp_directory_path() / "ara_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cfg = (root / "run.cfg").string();
  io::write_file(cfg,
                 "[data]\ncount = 4\neval_count = 3\nheight = 32\nwidth = 32\nlength = 5\nsize_min = 4\nsize_max = 7\n"
                 "[model]\nfeature_dim = 8\nvalue_dim = 4\ndecoder_hidden = 8\n"
                 "[train]\nsteps = 200\nlr = 0.003\nseed = 3\n"
                 "[attack]\niterations = 4\nseed = 9\n"
                 "[sweep]\nregion_fraction = 0.25, 1\n");
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const std::string dir = (root / run).string();
    auto call = [&](std::vector<std::string> args) {
      args.insert(args.begin(), "ara");
      ok = ok && cli::run(args) == 0;
    };
    call({"gen-data", "--config", cfg, "--out", dir + "/data"});
    call({"train", "--config", cfg, "--data", dir + "/data", "--out", dir + "/model.aram"});
    for (const char* attacker : {"pgd", "ara", "ara-black"})
      call({"attack", "--config", cfg, "--ckpt", dir + "/model.aram", "--data", dir + "/data", "--attacker", attacker,
            "--out", dir + "/" + attacker});
    call({"attack", "--config", cfg, "--ckpt", dir + "/model.aram", "--data", dir + "/data", "--attacker", "ara",
          "--sweep", "region", "--out", dir + "/region"});
    call({"eval", "--config", cfg, "--ckpt", dir + "/model.aram", "--data", dir + "/data", "--adv", dir + "/ara",
          "--out", dir + "/eval.csv"});
  }
  const auto a = csv_files(root / "a"), b = csv_files(root / "b");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    differing += it == b.end() || it->second != bytes;
  }
  verdict(10, ok && !a.empty() && a.size() == b.size() && differing == 0,
          fmt("%zu CSV files from two runs, %zu differ", a.size(), differing));
  fs::remove_all(root);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  gradient_checks();
  metric_oracles();

  synthvid::DataConfig dc;
  dc.count = 100;
  const auto train = synthvid::generate_dataset(dc, "train");
  dc.count = kEvalVideos;
  const auto eval = synthvid::generate_dataset(dc, "eval");

  const vos::VosParams params = clean_training(train, eval);
  constraint_suite(params, eval);

  std::vector<double> first, last;
  double matrix_s = 0.0;
  const DropTable drops = attack_matrix(params, eval, first, last, matrix_s);
  drop_ordering(drops, matrix_s);
  black_box(drops);
  hrl_learning(first, last);
  monotonicity(params, eval);
  defense_grid(params, train, eval);
  reproducibility();

  std::printf("%d of 10 criteria failed (%.0fs)\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
