#include "ara/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "ara/config.hpp"
#include "ara/kernels.hpp"
#include "ara/report.hpp"
#include "ara/serialize.hpp"

namespace ara::cli {

namespace fs = std::filesystem;

namespace {

using attacks::AttackerKind;

struct Common {
  std::string config_path;
  int jobs = 0;
};

RunConfig resolve_config(const Common& common) {
  return common.config_path.empty() ? RunConfig{} : load_config(common.config_path);
}

std::vector<fs::path> config_inputs(const Common& common) {
  if (common.config_path.empty()) return {};
  return {common.config_path};
}

// A gen-data root holds train/ and eval/; a plain dataset directory is used as is.
fs::path dataset_dir(const fs::path& root, const char* split) {
  if (fs::exists(root / split / "manifest.txt")) return root / split;
  return root;
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  return file.parent_path() / (file.filename().string() + suffix);
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string loss_csv(const std::vector<double>& losses) {
  std::ostringstream os;
  os << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) os << i + 1 << ',' << fixed(losses[i], 8) << '\n';
  return os.str();
}

// Plain-text greyscale preview: channel mean mapped to 0..255.
std::string pgm(const Tensor& frame, float scale = 1.0f, const Tensor& minus = {}) {
  const std::size_t H = frame.dim(0), W = frame.dim(1);
  auto d = frame.data();
  std::ostringstream os;
  os << "P2\n" << W << ' ' << H << "\n255\n";
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      double v = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t i = (y * W + x) * 3 + c;
        v += minus.defined() ? std::abs(d[i] - minus.data()[i]) : d[i];
      }
      v = std::clamp(v / 3.0 * scale, 0.0, 1.0);
      os << static_cast<int>(std::lround(v * 255.0)) << (x + 1 < W ? ' ' : '\n');
    }
  }
  return os.str();
}

struct Perturbation {
  double linf = 0.0;
  double mean_abs = 0.0;
  std::size_t pixels = 0;  // pixels with any channel changed
};

Perturbation perturbation(const synthvid::VideoSequence& video, const vos::FrameOverrides& frames) {
  Perturbation p;
  std::size_t count = 0;
  for (const auto& [t, adv] : frames) {
    auto a = adv.data(), o = video.frames[t].data();
    for (std::size_t i = 0; i < a.size(); i += 3) {
      bool changed = false;
      for (std::size_t c = 0; c < 3; ++c) {
        const double d = std::abs(double(a[i + c]) - double(o[i + c]));
        p.linf = std::max(p.linf, d);
        p.mean_abs += d;
        changed = changed || d > 0.0;
      }
      p.pixels += changed;
    }
    count += a.size();
  }
  if (count) p.mean_abs /= double(count);
  return p;
}

const char* kPerVideoHeader =
    "attacker,sweep,value,video,objects,clean_j,clean_f,clean_jf,adv_j,adv_f,adv_jf,drop,linf,mean_abs,"
    "perturbed_pixels,aborted\n";
const char* kSummaryHeader = "attacker,sweep,value,videos,clean_jf,adv_jf,drop,drop_std,linf_max,aborted\n";
const char* kIterationHeader =
    "attacker,sweep,value,video,frame,iteration,seg_loss,hardness_loss,mean_hardness,eta_linf\n";

struct AttackTables {
  std::ostringstream per_video, summary, iterations;
};

void append_run(AttackTables& out, const std::string& attacker, const std::string& sweep, const std::string& value,
                const std::vector<synthvid::VideoSequence>& videos,
                const std::vector<attacks::VideoOutcome>& outcomes) {
  double clean = 0.0, adv = 0.0, drop = 0.0, sq = 0.0, linf = 0.0;
  std::size_t aborted = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    const Perturbation p = perturbation(videos[i], o.attack.frames);
    out.per_video << attacker << ',' << sweep << ',' << value << ',' << o.id << ',' << videos[i].object_count << ','
                  << fixed(o.clean.mean_j) << ',' << fixed(o.clean.mean_f) << ',' << fixed(o.clean.jf) << ','
                  << fixed(o.attacked.mean_j) << ',' << fixed(o.attacked.mean_f) << ',' << fixed(o.attacked.jf)
                  << ',' << fixed(o.drop) << ',' << fixed(p.linf, 8) << ',' << fixed(p.mean_abs, 8) << ','
                  << p.pixels << ',' << (o.attack.aborted ? 1 : 0) << '\n';
    for (const auto& r : o.attack.log) {
      out.iterations << attacker << ',' << sweep << ',' << value << ',' << o.id << ',' << r.frame << ','
                     << r.iteration << ',' << fixed(r.seg_loss, 8) << ',' << fixed(r.hardness_loss, 8) << ','
                     << fixed(r.mean_hardness, 8) << ',' << fixed(r.eta_linf, 8) << '\n';
    }
    clean += o.clean.jf;
    adv += o.attacked.jf;
    drop += o.drop;
    sq += o.drop * o.drop;
    linf = std::max(linf, p.linf);
    aborted += o.attack.aborted;
  }
  const double n = double(std::max<std::size_t>(outcomes.size(), 1));
  const double mean_drop = drop / n;
  const double var = outcomes.size() > 1 ? std::max(0.0, (sq - n * mean_drop * mean_drop) / (n - 1.0)) : 0.0;
  out.summary << attacker << ',' << sweep << ',' << value << ',' << outcomes.size() << ',' << fixed(clean / n) << ','
              << fixed(adv / n) << ',' << fixed(mean_drop) << ',' << fixed(std::sqrt(var)) << ',' << fixed(linf, 8)
              << ',' << aborted << '\n';
}

// ---- subcommands ----

void cmd_gen_data(const Common& common, const fs::path& out) {
  RunConfig config = resolve_config(common);
  synthvid::DataConfig train = config.data;
  synthvid::DataConfig eval = config.data;
  eval.count = config.eval_count;
  synthvid::save_dataset(synthvid::generate_dataset(train, "train"), out / "train");
  synthvid::save_dataset(synthvid::generate_dataset(eval, "eval"), out / "eval");
  write_manifest(out / "run.manifest", {"gen-data", out.filename().string(), config.data.seed, config_inputs(common)},
                 config);
  std::printf("wrote %zu training and %zu evaluation videos to %s\n", train.count, eval.count, out.c_str());
}

void cmd_train(const Common& common, const fs::path& data, const fs::path& out) {
  RunConfig config = resolve_config(common);
  const fs::path dir = dataset_dir(data, "train");
  const auto videos = synthvid::load_dataset(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const vos::TrainResult r = vos::train(videos, config.train, config.arch);
  ensure_parent(out);
  vos::save_checkpoint(r.params, out);
  io::write_file(sibling(out, ".loss.csv"), loss_csv(r.losses));
  auto inputs = config_inputs(common);
  inputs.push_back(dir);
  write_manifest(sibling(out, ".manifest"), {"train", out.stem().string(), config.train.seed, inputs}, config);
  std::printf("trained %zu steps on %zu videos in %.1fs, final loss %.5f\n", config.train.steps, videos.size(),
              seconds_since(t0), r.final_loss);
}

void cmd_attack(const Common& common, const fs::path& ckpt, const fs::path& data, const std::string& attacker,
                const std::string& sweep, const fs::path& out) {
  RunConfig config = resolve_config(common);
  const AttackerKind kind = attacks::parse_attacker(attacker);
  const vos::VosParams params = vos::load_checkpoint(ckpt);
  const fs::path dir = dataset_dir(data, "eval");
  const auto videos = synthvid::load_dataset(dir);
  fs::create_directories(out);

  std::vector<std::pair<std::string, attacks::AttackConfig>> runs;
  auto with = [&](auto&& mutate, const std::string& value) {
    attacks::AttackConfig c = config.attack;
    mutate(c);
    runs.emplace_back(value, c);
  };
  if (sweep.empty()) {
    runs.emplace_back("-", config.attack);
  } else if (sweep == "epsilon") {
    for (float v : config.sweeps.epsilon) with([v](auto& c) { c.epsilon = c.beta = v; }, fixed(v, 8));
  } else if (sweep == "alpha") {
    for (float v : config.sweeps.alpha) with([v](auto& c) { c.alpha = v; }, fixed(v, 8));
  } else if (sweep == "region") {
    for (float v : config.sweeps.region_fraction) with([v](auto& c) { c.region_fraction = v; }, fixed(v, 4));
  } else if (sweep == "frames") {
    for (std::size_t v : config.sweeps.frames) with([v](auto& c) { c.frames_to_attack = v; }, std::to_string(v));
  } else {
    throw std::invalid_argument("unknown sweep axis '" + sweep + "' (expected epsilon, alpha, region or frames)");
  }
  if (runs.empty()) throw std::invalid_argument("sweep '" + sweep + "' has no values in the [sweep] section");

  AttackTables tables;
  const std::string sweep_name = sweep.empty() ? "none" : sweep;
  for (const auto& [value, attack] : runs) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto outcomes = attacks::run_attacks(kind, params, videos, attack, common.jobs);
    append_run(tables, attacker, sweep_name, value, videos, outcomes);
    double drop = 0.0;
    for (const auto& o : outcomes) drop += o.drop / double(outcomes.size());
    std::printf("%s %s=%s: mean drop %.4f over %zu videos (%.1fs)\n", attacker.c_str(), sweep_name.c_str(),
                value.c_str(), drop, outcomes.size(), seconds_since(t0));
    if (sweep.empty()) {
      fs::create_directories(out / "frames");
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        for (const auto& [t, adv] : outcomes[i].attack.frames) {
          const std::string stem = videos[i].id + "_f" + std::to_string(t);
          io::save_tensor(out / "frames" / (stem + ".arat"), adv);
          io::write_file(out / "frames" / (stem + ".pgm"), pgm(adv));
          const float scale = attack.epsilon > 0.0f ? 1.0f / attack.epsilon : 1.0f;
          io::write_file(out / "frames" / (stem + "_delta.pgm"), pgm(adv, scale, videos[i].frames[t]));
        }
      }
    }
  }
  io::write_file(out / "per_video.csv", kPerVideoHeader + tables.per_video.str());
  io::write_file(out / "summary.csv", kSummaryHeader + tables.summary.str());
  io::write_file(out / "iterations.csv", kIterationHeader + tables.iterations.str());
  auto inputs = config_inputs(common);
  inputs.push_back(ckpt);
  inputs.push_back(dir);
  write_manifest(out / "run.manifest", {"attack " + attacker, ckpt.stem().string(), config.attack.seed, inputs},
                 config);
}

void cmd_eval(const Common& common, const fs::path& ckpt, const fs::path& data, const std::string& adv,
              const fs::path& out) {
  RunConfig config = resolve_config(common);
  const vos::VosParams params = vos::load_checkpoint(ckpt);
  const fs::path dir = dataset_dir(data, "eval");
  const auto videos = synthvid::load_dataset(dir);
  std::vector<metrics::EvalResult> results(videos.size());
  std::vector<std::size_t> overridden(videos.size(), 0);
  std::vector<vos::FrameOverrides> overrides(videos.size());
  if (!adv.empty()) {
    for (std::size_t i = 0; i < videos.size(); ++i) {
      for (std::size_t t = 0; t < videos[i].length(); ++t) {
        const fs::path f = fs::path(adv) / "frames" / (videos[i].id + "_f" + std::to_string(t) + ".arat");
        if (fs::exists(f)) overrides[i][t] = io::load_tensor(f);
      }
      overridden[i] = overrides[i].size();
    }
  }
  const long n = static_cast<long>(videos.size());
  std::vector<std::exception_ptr> errors(videos.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(common.jobs > 0 ? common.jobs : kernels::max_threads())
#endif
  for (long i = 0; i < n; ++i) {
    try {
      results[i] = attacks::evaluate(params, videos[i], overrides[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::ostringstream os;
  os << "video,objects,adv_frames,j,f,jf\n";
  double j = 0.0, f = 0.0, jf = 0.0;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const auto& r = results[i];
    os << videos[i].id << ',' << videos[i].object_count << ',' << overridden[i] << ',' << fixed(r.mean_j) << ','
       << fixed(r.mean_f) << ',' << fixed(r.jf) << '\n';
    j += r.mean_j;
    f += r.mean_f;
    jf += r.jf;
  }
  const double cnt = double(std::max<std::size_t>(videos.size(), 1));
  os << "mean,,," << fixed(j / cnt) << ',' << fixed(f / cnt) << ',' << fixed(jf / cnt) << '\n';
  ensure_parent(out);
  io::write_file(out, os.str());
  auto inputs = config_inputs(common);
  inputs.push_back(ckpt);
  inputs.push_back(dir);
  if (!adv.empty()) inputs.push_back(fs::path(adv) / "frames");
  write_manifest(sibling(out, ".manifest"), {"eval", ckpt.stem().string(), 0, inputs}, config);
  std::printf("mean J&F %.4f over %zu videos\n", jf / cnt, videos.size());
}

void cmd_defend(const Common& common, const fs::path& ckpt, const fs::path& data, const std::string& attacker,
                const fs::path& out) {
  RunConfig config = resolve_config(common);
  defense::DefenseConfig dc = config.defense;
  dc.attacker = attacks::parse_attacker(attacker);
  if (dc.attacker != AttackerKind::pgd && dc.attacker != AttackerKind::ara) {
    throw std::invalid_argument("defend: --attacker must be pgd or ara");
  }
  dc.jobs = common.jobs;
  const vos::VosParams params = vos::load_checkpoint(ckpt);
  const fs::path dir = dataset_dir(data, "train");
  const auto videos = synthvid::load_dataset(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const vos::TrainResult r = defense::adversarial_finetune(params, videos, dc);
  ensure_parent(out);
  vos::save_checkpoint(r.params, out);
  io::write_file(sibling(out, ".loss.csv"), loss_csv(r.losses));
  config.defense = dc;
  auto inputs = config_inputs(common);
  inputs.push_back(ckpt);
  inputs.push_back(dir);
  write_manifest(sibling(out, ".manifest"), {"defend " + attacker, out.stem().string(), dc.seed, inputs}, config);
  std::printf("%s fine-tuning: %zu steps in %.1fs, final loss %.5f\n", attacker.c_str(), dc.steps,
              seconds_since(t0), r.final_loss);
}

void cmd_defense_grid(const Common& common, const fs::path& ckpt, const fs::path& data, const std::string& pgd_ckpt,
                      const std::string& ara_ckpt, const fs::path& out) {
  RunConfig config = resolve_config(common);
  fs::create_directories(out);
  const vos::VosParams clean = vos::load_checkpoint(ckpt);
  std::map<std::string, vos::VosParams> models{{"none", clean}};
  auto inputs = config_inputs(common);
  inputs.push_back(ckpt);
  for (AttackerKind kind : {AttackerKind::pgd, AttackerKind::ara}) {
    const std::string name(attacks::to_string(kind));
    const std::string& given = kind == AttackerKind::pgd ? pgd_ckpt : ara_ckpt;
    if (!given.empty()) {
      models[name] = vos::load_checkpoint(given);
      inputs.push_back(given);
      continue;
    }
    defense::DefenseConfig dc = config.defense;
    dc.attacker = kind;
    dc.jobs = common.jobs;
    const auto t0 = std::chrono::steady_clock::now();
    const auto train = synthvid::load_dataset(dataset_dir(data, "train"));
    const vos::TrainResult r = defense::adversarial_finetune(clean, train, dc);
    vos::save_checkpoint(r.params, out / ("defended_" + name + ".aram"));
    models[name] = r.params;
    std::printf("%s fine-tuning: %zu steps in %.1fs\n", name.c_str(), dc.steps, seconds_since(t0));
  }
  if (pgd_ckpt.empty() || ara_ckpt.empty()) inputs.push_back(dataset_dir(data, "train"));
  const fs::path eval_dir = dataset_dir(data, "eval");
  inputs.push_back(eval_dir);
  const auto eval = synthvid::load_dataset(eval_dir);
  const auto grid =
      defense::evaluate_grid(models, eval, {AttackerKind::pgd, AttackerKind::ara}, config.attack, common.jobs);

  std::ostringstream os;
  os << "attacker,defense,clean_jf,adv_jf,drop,jf_gain,recovery\n";
  for (const auto& a : grid.attackers) {
    const double base_drop = grid.cells.at(a).at("none").drop;
    const double base_jf = grid.cells.at(a).at("none").jf;
    for (const std::string d : {"none", "pgd", "ara"}) {
      const auto& cell = grid.cells.at(a).at(d);
      const double recovery = base_drop > 0.0 ? 1.0 - cell.drop / base_drop : 0.0;
      os << a << ',' << d << ',' << fixed(grid.clean_jf.at(d)) << ',' << fixed(cell.jf) << ',' << fixed(cell.drop)
         << ',' << fixed(cell.jf - base_jf) << ',' << fixed(recovery) << '\n';
      std::printf("attacker %-3s defense %-4s clean %.4f attacked %.4f drop %.4f\n", a.c_str(), d.c_str(),
                  grid.clean_jf.at(d), cell.jf, cell.drop);
    }
  }
  io::write_file(out / "defense_grid.csv", os.str());
  write_manifest(out / "run.manifest", {"defense-grid", ckpt.stem().string(), config.defense.seed, inputs}, config);
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Adversarial region attacks on a toy video object segmenter"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--jobs", common.jobs, "Worker thread cap (0 = all available)")->check(CLI::NonNegativeNumber);

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Experiment config file")->check(CLI::ExistingFile);
  };

  std::string out, data, ckpt, attacker, adv, sweep, pgd_ckpt, ara_ckpt;
  std::vector<std::string> runs;
  const std::vector<std::string> all_attackers{"random", "fgsm", "bim", "pgd", "ara", "ara-black"};

  auto* gen = app.add_subcommand("gen-data", "Generate train/ and eval/ synthetic datasets");
  add_config(gen);
  gen->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train the segmenter on clean videos");
  add_config(train);
  train->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", out, "Checkpoint to write")->required();

  auto* attack = app.add_subcommand("attack", "Attack every evaluation video");
  add_config(attack);
  attack->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  attack->add_option("--data", data)->required()->check(CLI::ExistingDirectory);
  attack->add_option("--attacker", attacker)->required()->check(CLI::IsMember(all_attackers));
  attack->add_option("--sweep", sweep, "Sweep axis from the [sweep] section")
      ->check(CLI::IsMember({"epsilon", "alpha", "region", "frames"}));
  attack->add_option("--out", out, "Output directory")->required();

  auto* defend = app.add_subcommand("defend", "Adversarially fine-tune a trained checkpoint");
  add_config(defend);
  defend->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  defend->add_option("--data", data, "Training dataset")->required()->check(CLI::ExistingDirectory);
  defend->add_option("--attacker", attacker)->required()->check(CLI::IsMember({"pgd", "ara"}));
  defend->add_option("--out", out, "Checkpoint to write")->required();

  auto* grid = app.add_subcommand("defense-grid", "Attacker {pgd,ara} x defense {none,pgd,ara} evaluation");
  add_config(grid);
  grid->add_option("--ckpt", ckpt, "Clean checkpoint")->required()->check(CLI::ExistingFile);
  grid->add_option("--data", data, "gen-data root with train/ and eval/")->required()->check(CLI::ExistingDirectory);
  grid->add_option("--pgd-ckpt", pgd_ckpt, "Reuse a PGD-defended checkpoint")->check(CLI::ExistingFile);
  grid->add_option("--ara-ckpt", ara_ckpt, "Reuse an ARA-defended checkpoint")->check(CLI::ExistingFile);
  grid->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate clean or attacked J&F");
  add_config(eval);
  eval->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--adv", adv, "Attack output directory")->check(CLI::ExistingDirectory);
  eval->add_option("--out", out, "CSV to write")->required();

  auto* report = app.add_subcommand("report", "Aggregate attack runs into comparison tables");
  report->add_option("--runs", runs, "Attack output directories")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", out, "Report file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (common.jobs > 0) kernels::set_threads(common.jobs);
    if (gen->parsed()) cmd_gen_data(common, out);
    else if (train->parsed()) cmd_train(common, data, out);
    else if (attack->parsed()) cmd_attack(common, ckpt, data, attacker, sweep, out);
    else if (defend->parsed()) cmd_defend(common, ckpt, data, attacker, out);
    else if (grid->parsed()) cmd_defense_grid(common, ckpt, data, pgd_ckpt, ara_ckpt, out);
    else if (eval->parsed()) cmd_eval(common, ckpt, data, adv, out);
    else if (report->parsed()) {
      std::vector<fs::path> dirs(runs.begin(), runs.end());
      write_report(dirs, out);
      std::printf("wrote %s\n", out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

int run(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  std::vector<std::string> copy = args;
  for (auto& a : copy) argv.push_back(a.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(copy.size()), argv.data());
}

}  // namespace ara::cli
