#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ara/tensor.hpp"

// Tensor binary format (little-endian):
//   "ARAT" | version u32 | rank u32 | dims u32[rank] | payload f32[numel]
namespace ara::io {

inline constexpr std::uint32_t kTensorFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, version_mismatch, truncated, checksum, malformed, io };

  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void write_u32(std::ostream& os, std::uint32_t v);
std::uint32_t read_u32(std::istream& is, std::string_view context);

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

std::uint32_t crc32(std::string_view bytes);

}  // namespace ara::io
