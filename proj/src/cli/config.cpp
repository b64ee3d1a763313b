#include "ara/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace ara::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_float(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double parse_number(const std::string& text) {
  auto one = [](std::string_view s) {
    double v = 0.0;
    const std::string t = trim(s);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
      throw std::invalid_argument("'" + t + "' is not a number");
    }
    return v;
  };
  const auto slash = text.find('/');
  if (slash == std::string::npos) return one(text);
  const double den = one(std::string_view(text).substr(slash + 1));
  if (den == 0.0) throw std::invalid_argument("division by zero in '" + text + "'");
  return one(std::string_view(text).substr(0, slash)) / den;
}

std::uint64_t parse_unsigned(const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("'" + text + "' is not a non-negative integer");
  }
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("'" + text + "' is not a boolean (true/false)");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty list item in '" + text + "'");
    out.push_back(item);
  }
  return out;
}

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

using Fields = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>;

Field size_field(std::size_t& f) {
  return {[&f](const std::string& v) { f = static_cast<std::size_t>(parse_unsigned(v)); },
          [&f] { return std::to_string(f); }};
}
Field u64_field(std::uint64_t& f) {
  return {[&f](const std::string& v) { f = parse_unsigned(v); }, [&f] { return std::to_string(f); }};
}
Field double_field(double& f) {
  return {[&f](const std::string& v) { f = parse_number(v); }, [&f] { return fmt_float(f); }};
}
Field float_field(float& f) {
  return {[&f](const std::string& v) { f = static_cast<float>(parse_number(v)); },
          [&f] { return fmt_float(f); }};
}
Field bool_field(bool& f) {
  return {[&f](const std::string& v) { f = parse_bool(v); }, [&f] { return std::string(f ? "true" : "false"); }};
}
Field float_list(std::vector<float>& f) {
  return {[&f](const std::string& v) {
            f.clear();
            for (const auto& item : split_list(v)) f.push_back(static_cast<float>(parse_number(item)));
          },
          [&f] {
            std::string s;
            for (std::size_t i = 0; i < f.size(); ++i) s += (i ? ", " : "") + fmt_float(f[i]);
            return s;
          }};
}
Field size_list(std::vector<std::size_t>& f) {
  return {[&f](const std::string& v) {
            f.clear();
            for (const auto& item : split_list(v)) f.push_back(static_cast<std::size_t>(parse_unsigned(item)));
          },
          [&f] {
            std::string s;
            for (std::size_t i = 0; i < f.size(); ++i) s += (i ? ", " : "") + std::to_string(f[i]);
            return s;
          }};
}

Fields bind(RunConfig& c) {
  auto& d = c.data;
  auto& a = c.attack;
  Fields fields;
  fields.push_back({"data",
                    {{"count", size_field(d.count)},
                     {"eval_count", size_field(c.eval_count)},
                     {"height", size_field(d.height)},
                     {"width", size_field(d.width)},
                     {"length", size_field(d.length)},
                     {"two_object_fraction", double_field(d.two_object_fraction)},
                     {"distractors", size_field(d.distractors)},
                     {"contrast_min", double_field(d.contrast_min)},
                     {"contrast_max", double_field(d.contrast_max)},
                     {"noise", double_field(d.noise)},
                     {"size_min", double_field(d.size_min)},
                     {"size_max", double_field(d.size_max)},
                     {"speed_max", double_field(d.speed_max)},
                     {"seed", u64_field(d.seed)}}});
  fields.push_back({"model",
                    {{"feature_dim", size_field(c.arch.feature_dim)},
                     {"value_dim", size_field(c.arch.value_dim)},
                     {"downsample", size_field(c.arch.downsample)},
                     {"decoder_hidden", size_field(c.arch.decoder_hidden)},
                     {"memory_cap", size_field(c.arch.memory_cap)}}});
  fields.push_back({"train",
                    {{"steps", size_field(c.train.steps)},
                     {"lr", float_field(c.train.lr)},
                     {"max_skip", size_field(c.train.max_skip)},
                     {"seed", u64_field(c.train.seed)},
                     {"log_every", size_field(c.train.log_every)}}});
  Field norm{[&a](const std::string& v) { a.norm = attacks::parse_norm(v); },
             [&a] { return std::string(attacks::to_string(a.norm)); }};
  Field pseudo{[&a](const std::string& v) {
                 if (v == "literal") a.pseudo_mode = ops::CeMode::literal;
                 else if (v == "full") a.pseudo_mode = ops::CeMode::full;
                 else throw std::invalid_argument("'" + v + "' is not a CE mode (literal/full)");
               },
               [&a] { return std::string(a.pseudo_mode == ops::CeMode::literal ? "literal" : "full"); }};
  Field hloss{[&a](const std::string& v) {
                if (v == "mse") a.hardness_loss = hrl::HardnessLoss::mse;
                else if (v == "mae") a.hardness_loss = hrl::HardnessLoss::mae;
                else if (v == "ce") a.hardness_loss = hrl::HardnessLoss::ce;
                else throw std::invalid_argument("'" + v + "' is not a hardness loss (mse/mae/ce)");
              },
              [&a] {
                switch (a.hardness_loss) {
                  case hrl::HardnessLoss::mse: return std::string("mse");
                  case hrl::HardnessLoss::mae: return std::string("mae");
                  case hrl::HardnessLoss::ce: return std::string("ce");
                }
                return std::string("?");
              }};
  fields.push_back({"attack",
                    {{"epsilon", float_field(a.epsilon)},
                     {"beta", float_field(a.beta)},
                     {"iterations", size_field(a.iterations)},
                     {"alpha", float_field(a.alpha)},
                     {"norm", norm},
                     {"region_fraction", float_field(a.region_fraction)},
                     {"frames_to_attack", size_field(a.frames_to_attack)},
                     {"seed", u64_field(a.seed)},
                     {"literal_clip", bool_field(a.literal_clip)},
                     {"pseudo_mode", pseudo},
                     {"hardness_loss", hloss},
                     {"hrl_lr", float_field(a.hrl_optimizer.lr)},
                     {"hrl_weight_decay", float_field(a.hrl_optimizer.weight_decay)}}});
  auto& df = c.defense;
  Field attacker{[&df](const std::string& v) { df.attacker = attacks::parse_attacker(v); },
                 [&df] { return std::string(attacks::to_string(df.attacker)); }};
  fields.push_back({"defense",
                    {{"attacker", attacker},
                     {"steps", size_field(df.steps)},
                     {"lr", float_field(df.lr)},
                     {"max_skip", size_field(df.max_skip)},
                     {"seed", u64_field(df.seed)},
                     {"log_every", size_field(df.log_every)}}});
  fields.push_back({"sweep",
                    {{"epsilon", float_list(c.sweeps.epsilon)},
                     {"alpha", float_list(c.sweeps.alpha)},
                     {"region_fraction", float_list(c.sweeps.region_fraction)},
                     {"frames", size_list(c.sweeps.frames)}}});
  return fields;
}

void validate(const RunConfig& c) {
  if (c.data.count == 0) throw std::invalid_argument("data.count must be >= 1");
  if (c.data.height % 4 || c.data.width % 4) throw std::invalid_argument("data height/width must be multiples of 4");
  if (c.data.length < 3) throw std::invalid_argument("data.length must be >= 3");
  if (c.arch.downsample != 4) throw std::invalid_argument("model.downsample must be 4");
  if (!(c.train.lr > 0.0f)) throw std::invalid_argument("train.lr must be > 0");
  if (!(c.defense.lr > 0.0f)) throw std::invalid_argument("defense.lr must be > 0");
  if (c.defense.attacker != attacks::AttackerKind::pgd && c.defense.attacker != attacks::AttackerKind::ara) {
    throw std::invalid_argument("defense.attacker must be pgd or ara");
  }
  c.attack.validate();
  for (float f : c.sweeps.region_fraction)
    if (!(f > 0.0f && f <= 1.0f)) throw std::invalid_argument("sweep.region_fraction values must be in (0, 1]");
  for (std::size_t n : c.sweeps.frames)
    if (n < 1) throw std::invalid_argument("sweep.frames values must be >= 1");
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig config;
  Fields fields = bind(config);
  std::set<std::string> seen;
  std::string section;
  std::string raw;
  std::size_t line_no = 0, last_line = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find_first_of("#;");
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    last_line = line_no;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& [name, _] : fields) known = known || name == section;
      if (!known) throw ConfigError(source, line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line_no, "expected key = value");
    if (section.empty()) throw ConfigError(source, line_no, "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    Field* field = nullptr;
    for (auto& [name, entries] : fields)
      if (name == section)
        for (auto& [k, f] : entries)
          if (k == key) field = &f;
    if (!field) throw ConfigError(source, line_no, "unknown key '" + key + "' in [" + section + "]");
    if (!seen.insert(section + "." + key).second) {
      throw ConfigError(source, line_no, "duplicate key '" + key + "' in [" + section + "]");
    }
    try {
      field->set(value);
    } catch (const std::exception& e) {
      throw ConfigError(source, line_no, section + "." + key + ": " + e.what());
    }
  }
  try {
    validate(config);
  } catch (const std::exception& e) {
    throw ConfigError(source, last_line, e.what());
  }
  config.defense.attack = config.attack;
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return parse_config(in, path.string());
}

std::string snapshot(const RunConfig& config) {
  RunConfig copy = config;
  std::ostringstream os;
  bool first = true;
  for (auto& [section, entries] : bind(copy)) {
    if (!first) os << '\n';
    first = false;
    os << '[' << section << "]\n";
    for (auto& [key, field] : entries) os << key << " = " << field.get() << '\n';
  }
  return os.str();
}

}  // namespace ara::cli
