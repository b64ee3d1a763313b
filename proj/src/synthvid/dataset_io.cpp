#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ara/serialize.hpp"
#include "ara/synthvid.hpp"

namespace ara::synthvid {

using io::FormatError;

namespace {

constexpr const char* kManifestHeader = "# ara-dataset";

std::string crc_hex(std::uint32_t c) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", c);
  return buf;
}

}  // namespace

// manifest.txt:
//   # ara-dataset <version>
//   <id> <H> <W> <T> <object_count> <seed> <crc32-hex>
void save_dataset(const std::vector<VideoSequence>& videos, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  manifest << kManifestHeader << ' ' << kDatasetVersion << '\n';
  for (const auto& v : videos) {
    std::ostringstream payload;
    for (const auto& f : v.frames) io::write_tensor(payload, f);
    for (const auto& m : v.masks) io::write_tensor(payload, m);
    const std::string bytes = payload.str();
    io::write_file(dir / (v.id + ".bin"), bytes);
    manifest << v.id << ' ' << v.height() << ' ' << v.width() << ' ' << v.length() << ' '
             << v.object_count << ' ' << v.seed << ' ' << crc_hex(io::crc32(bytes)) << '\n';
  }
  io::write_file(dir / "manifest.txt", manifest.str());
}

std::vector<VideoSequence> load_dataset(const std::filesystem::path& dir) {
  std::istringstream manifest(io::read_file(dir / "manifest.txt"));
  std::string line;
  if (!std::getline(manifest, line)) {
    throw FormatError(FormatError::Kind::truncated, "empty dataset manifest in " + dir.string());
  }
  {
    std::istringstream hs(line);
    std::string hash, tag;
    int version = -1;
    hs >> hash >> tag >> version;
    if (hash + " " + tag != kManifestHeader) {
      throw FormatError(FormatError::Kind::bad_magic, "not a dataset manifest: " + dir.string());
    }
    if (version != kDatasetVersion) {
      throw FormatError(FormatError::Kind::version_mismatch,
                        "dataset version " + std::to_string(version) + " (expected " +
                            std::to_string(kDatasetVersion) + ")");
    }
  }

  std::vector<VideoSequence> videos;
  std::size_t lineno = 1;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    VideoSequence v;
    std::size_t H = 0, W = 0, T = 0;
    std::string crc;
    if (!(ls >> v.id >> H >> W >> T >> v.object_count >> v.seed >> crc)) {
      throw FormatError(FormatError::Kind::malformed,
                        "manifest line " + std::to_string(lineno) + " is malformed");
    }
    const std::string bytes = io::read_file(dir / (v.id + ".bin"));
    std::istringstream payload(bytes);
    for (std::size_t t = 0; t < T; ++t) {
      Tensor f = io::read_tensor(payload);
      if (f.shape() != Shape{H, W, 3}) {
        throw FormatError(FormatError::Kind::malformed, v.id + ": frame shape " + shape_str(f.shape()));
      }
      v.frames.push_back(std::move(f));
    }
    for (std::size_t t = 0; t < T; ++t) {
      Tensor m = io::read_tensor(payload);
      if (m.shape() != Shape{v.object_count, H, W}) {
        throw FormatError(FormatError::Kind::malformed, v.id + ": mask shape " + shape_str(m.shape()));
      }
      v.masks.push_back(std::move(m));
    }
    if (payload.peek() != std::char_traits<char>::eof()) {
      throw FormatError(FormatError::Kind::malformed, v.id + ": trailing bytes after payload");
    }
    if (crc_hex(io::crc32(bytes)) != crc) {
      throw FormatError(FormatError::Kind::checksum, v.id + ": CRC32 mismatch");
    }
    videos.push_back(std::move(v));
  }
  return videos;
}

}  // namespace ara::synthvid
