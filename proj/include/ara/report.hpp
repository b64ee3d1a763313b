#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ara/config.hpp"

// CSV and manifest emission shared by the subcommands. Column layouts are
// documented in docs/report-schema.md.
namespace ara::cli {

/// Fixed-point text with `digits` decimals; "-0.000000" is printed as "0.000000".
std::string fixed(double v, int digits = 6);

/// SHA-1 of "blob <size>\0<bytes>", as git computes object ids.
std::string git_blob_hash(std::string_view bytes);

/// Hash of a set of files and directories (walked recursively, sorted by
/// path): the blob hash of the "<blob-hash> <relative-path>\n" listing.
struct InputHash {
  std::string combined;
  std::vector<std::pair<std::string, std::string>> files;  // (relative path, blob hash)
};
InputHash hash_inputs(const std::vector<std::filesystem::path>& inputs);

struct ManifestInfo {
  std::string command;
  std::string label;  // short run name used by `report` (the checkpoint stem)
  std::uint64_t seed = 0;
  std::vector<std::filesystem::path> inputs;
};

/// Writes "key = value" lines, the input hashes, then the config snapshot.
void write_manifest(const std::filesystem::path& file, const ManifestInfo& info, const RunConfig& config);

/// One comparison table (attackers x checkpoints) plus one table per sweep
/// axis, gathered from the summary.csv of each run directory.
void write_report(const std::vector<std::filesystem::path>& runs, const std::filesystem::path& out);

}  // namespace ara::cli
