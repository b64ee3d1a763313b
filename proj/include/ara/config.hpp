#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ara/defense.hpp"

// Experiment configuration: "[section]" headers and "key = value" lines;
// '#' and ';' start comments. Fractions such as 8/255 are accepted wherever
// a number is, and lists are comma-separated.
namespace ara::cli {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Sweeps {
  std::vector<float> epsilon;          // beta follows epsilon
  std::vector<float> alpha;
  std::vector<float> region_fraction;
  std::vector<std::size_t> frames;
};

struct RunConfig {
  synthvid::DataConfig data;           // data.count is the training-set size
  std::size_t eval_count = 20;
  vos::VosArch arch;
  vos::TrainConfig train;
  attacks::AttackConfig attack;
  defense::DefenseConfig defense;      // defense.attack is taken from `attack`
  Sweeps sweeps;
};

/// Parses and validates config text. Unknown sections or keys, malformed
/// values and duplicate keys are errors that name the line.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text of every field, loadable by parse_config.
std::string snapshot(const RunConfig& config);

}  // namespace ara::cli
