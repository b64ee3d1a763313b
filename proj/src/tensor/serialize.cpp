#include "ara/serialize.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ara::io {

namespace {

constexpr std::array<char, 4> kMagic{'A', 'R', 'A', 'T'};
constexpr std::uint32_t kMaxRank = 8;

std::uint32_t float_bits(float f) { return std::bit_cast<std::uint32_t>(f); }

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t read_u32(std::istream& is, std::string_view context) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(FormatError::Kind::truncated,
                      "truncated input while reading " + std::string(context));
  }
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic.data(), 4);
  write_u32(os, kTensorFormatVersion);
  write_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
  for (float v : t.data()) write_u32(os, float_bits(v));
}

Tensor read_tensor(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4)) {
    throw FormatError(FormatError::Kind::truncated, "truncated input while reading tensor magic");
  }
  if (magic != kMagic) throw FormatError(FormatError::Kind::bad_magic, "not an ARAT tensor record");
  auto version = read_u32(is, "tensor version");
  if (version != kTensorFormatVersion) {
    throw FormatError(FormatError::Kind::version_mismatch,
                      "tensor format version " + std::to_string(version) + " (expected " +
                          std::to_string(kTensorFormatVersion) + ")");
  }
  auto rank = read_u32(is, "tensor rank");
  if (rank > kMaxRank) {
    throw FormatError(FormatError::Kind::malformed, "tensor rank " + std::to_string(rank) + " too large");
  }
  Shape shape(rank);
  for (auto& d : shape) d = read_u32(is, "tensor dims");
  const std::size_t n = shape_numel(shape);
  std::string raw(n * 4, '\0');
  if (!is.read(raw.data(), static_cast<std::streamsize>(raw.size()))) {
    throw FormatError(FormatError::Kind::truncated, "truncated tensor payload");
  }
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* b = reinterpret_cast<const unsigned char*>(raw.data() + 4 * i);
    std::uint32_t u = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                      (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
    values[i] = std::bit_cast<float>(u);
  }
  return Tensor::from_data(shape, std::move(values));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ostringstream os;
  write_tensor(os, t);
  write_file(path, os.str());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::istringstream is(read_file(path));
  return read_tensor(is);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::io, "write failed for " + path.string());
}

std::uint32_t crc32(std::string_view bytes) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    std::size_t len = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    c = ::crc32(c, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(len));
    off += len;
  }
  return static_cast<std::uint32_t>(c);
}

}  // namespace ara::io
