#include "ara/report.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ara/serialize.hpp"

namespace ara::cli {

namespace fs = std::filesystem;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string git_blob_hash(std::string_view bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || !EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) || !EVP_DigestUpdate(ctx, header.data(), header.size()) ||
      !EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) || !EVP_DigestFinal_ex(ctx, digest, &len)) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha1 failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

InputHash hash_inputs(const std::vector<fs::path>& inputs) {
  InputHash h;
  std::string listing;
  for (const auto& input : inputs) {
    std::vector<fs::path> files;
    if (fs::is_directory(input)) {
      for (const auto& e : fs::recursive_directory_iterator(input))
        if (e.is_regular_file()) files.push_back(e.path());
      std::sort(files.begin(), files.end());
    } else {
      files.push_back(input);
    }
    for (const auto& f : files) {
      const fs::path rel = fs::is_directory(input) ? input.filename() / fs::relative(f, input) : f.filename();
      const std::string blob = git_blob_hash(io::read_file(f));
      h.files.emplace_back(rel.generic_string(), blob);
      listing += blob + ' ' + rel.generic_string() + '\n';
    }
  }
  h.combined = git_blob_hash(listing);
  return h;
}

void write_manifest(const fs::path& file, const ManifestInfo& info, const RunConfig& config) {
  const InputHash h = hash_inputs(info.inputs);
  std::ostringstream os;
  os << "command = " << info.command << '\n';
  os << "label = " << info.label << '\n';
  os << "seed = " << info.seed << '\n';
  os << "content_hash = " << h.combined << '\n';
  for (const auto& [path, blob] : h.files) os << "input = " << blob << ' ' << path << '\n';
  os << '\n' << snapshot(config);
  io::write_file(file, os.str());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

struct SummaryRow {
  std::string attacker, sweep, value;
  double clean_jf = 0.0, adv_jf = 0.0, drop = 0.0;
};

std::string manifest_value(const fs::path& dir, const std::string& key) {
  std::istringstream in(io::read_file(dir / "run.manifest"));
  std::string line;
  const std::string prefix = key + " = ";
  while (std::getline(in, line)) {
    if (line.empty()) break;
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  }
  throw std::runtime_error(dir.string() + "/run.manifest has no '" + key + "' entry");
}

std::vector<SummaryRow> read_summary(const fs::path& dir) {
  std::istringstream in(io::read_file(dir / "summary.csv"));
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error(dir.string() + "/summary.csv lacks column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ca = col("attacker"), cs = col("sweep"), cv = col("value"), cc = col("clean_jf"),
                    cj = col("adv_jf"), cd = col("drop");
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw std::runtime_error(dir.string() + "/summary.csv: ragged row");
    rows.push_back({cells[ca], cells[cs], cells[cv], std::stod(cells[cc]), std::stod(cells[cj]), std::stod(cells[cd])});
  }
  return rows;
}

}  // namespace

void write_report(const std::vector<fs::path>& runs, const fs::path& out) {
  if (runs.empty()) throw std::invalid_argument("report: no runs given");
  // checkpoint label -> attacker -> row, in first-seen checkpoint order
  std::vector<std::string> labels;
  std::map<std::string, std::map<std::string, SummaryRow>> table;
  std::map<std::string, std::vector<std::pair<std::string, SummaryRow>>> sweeps;  // axis -> (label, row)
  for (const auto& dir : runs) {
    const std::string label = manifest_value(dir, "label");
    for (const auto& row : read_summary(dir)) {
      if (row.sweep == "none") {
        if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
        table[label][row.attacker] = row;
      } else {
        sweeps[row.sweep].emplace_back(label, row);
      }
    }
  }

  std::ostringstream os;
  if (!labels.empty()) {
    std::map<std::string, double> mean_drop;
    std::map<std::string, double> clean;
    for (const auto& label : labels)
      for (const auto& [attacker, row] : table[label]) {
        mean_drop[attacker] += row.drop / double(labels.size());
        clean[label] = row.clean_jf;
      }
    std::vector<std::string> attackers;
    for (const auto& [a, _] : mean_drop) attackers.push_back(a);
    std::stable_sort(attackers.begin(), attackers.end(),
                     [&](const auto& a, const auto& b) { return mean_drop[a] < mean_drop[b]; });
    os << "# comparison\nattacker";
    for (const auto& label : labels) os << ',' << label << "_jf," << label << "_drop";
    os << "\nclean";
    for (const auto& label : labels) os << ',' << fixed(clean[label]) << ',' << fixed(0.0);
    os << '\n';
    for (const auto& a : attackers) {
      os << a;
      for (const auto& label : labels) {
        const auto it = table[label].find(a);
        if (it == table[label].end()) os << ",,";
        else os << ',' << fixed(it->second.adv_jf) << ',' << fixed(it->second.drop);
      }
      os << '\n';
    }
  }
  for (const auto& [axis, rows] : sweeps) {
    if (os.tellp() > 0) os << '\n';
    os << "# sweep " << axis << "\nattacker,checkpoint,value,clean_jf,adv_jf,drop\n";
    for (const auto& [label, row] : rows) {
      os << row.attacker << ',' << label << ',' << row.value << ',' << fixed(row.clean_jf) << ','
         << fixed(row.adv_jf) << ',' << fixed(row.drop) << '\n';
    }
  }
  io::write_file(out, os.str());
}

}  // namespace ara::cli
