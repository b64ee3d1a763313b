#include <array>
#include <map>
#include <sstream>

#include "ara/serialize.hpp"
#include "ara/vos_model.hpp"

namespace ara::vos {

using io::FormatError;

void save_checkpoint(const VosParams& params, const std::filesystem::path& path) {
  std::ostringstream os;
  os.write("ARAM", 4);
  io::write_u32(os, kCheckpointVersion);
  io::write_u32(os, static_cast<std::uint32_t>(params.arch.feature_dim));
  io::write_u32(os, static_cast<std::uint32_t>(params.arch.value_dim));
  io::write_u32(os, static_cast<std::uint32_t>(params.arch.downsample));
  io::write_u32(os, static_cast<std::uint32_t>(params.arch.decoder_hidden));
  io::write_u32(os, static_cast<std::uint32_t>(params.arch.memory_cap));
  const auto named = params.named_tensors();
  io::write_u32(os, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    io::write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::write_tensor(os, t);
  }
  io::write_file(path, os.str());
}

VosParams load_checkpoint(const std::filesystem::path& path) {
  std::istringstream is(io::read_file(path));
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4)) throw FormatError(FormatError::Kind::truncated, "empty checkpoint");
  if (std::string(magic.data(), 4) != "ARAM") {
    throw FormatError(FormatError::Kind::bad_magic, path.string() + " is not an ARAM checkpoint");
  }
  auto version = io::read_u32(is, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw FormatError(FormatError::Kind::version_mismatch,
                      "checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  VosArch arch;
  arch.feature_dim = io::read_u32(is, "arch");
  arch.value_dim = io::read_u32(is, "arch");
  arch.downsample = io::read_u32(is, "arch");
  arch.decoder_hidden = io::read_u32(is, "arch");
  arch.memory_cap = io::read_u32(is, "arch");

  std::map<std::string, Tensor> records;
  const auto count = io::read_u32(is, "record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = io::read_u32(is, "record name length");
    if (len > 256) throw FormatError(FormatError::Kind::malformed, "record name too long");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError(FormatError::Kind::truncated, "truncated record name");
    records[name] = io::read_tensor(is);
  }

  // Build the expected layout, then fill it from the records.
  Rng dummy(0);
  VosParams params = VosParams::init(arch, dummy);
  auto fill = [&](const std::string& prefix, std::vector<ConvLayer>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      for (auto [suffix, slot] : {std::pair{".weight", &layers[i].weight}, std::pair{".bias", &layers[i].bias}}) {
        const std::string key = prefix + "." + std::to_string(i) + suffix;
        auto it = records.find(key);
        if (it == records.end()) {
          throw FormatError(FormatError::Kind::malformed, "checkpoint is missing tensor " + key);
        }
        if (it->second.shape() != slot->shape()) {
          throw FormatError(FormatError::Kind::malformed,
                            "checkpoint tensor " + key + " has shape " + shape_str(it->second.shape()) +
                                ", architecture expects " + shape_str(slot->shape()));
        }
        *slot = it->second;
        slot->set_requires_grad(true);
      }
    }
  };
  fill("memory_encoder", params.memory_encoder);
  fill("query_encoder", params.query_encoder);
  fill("decoder", params.decoder);
  return params;
}

}  // namespace ara::vos
