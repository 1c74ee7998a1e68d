#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace cfsim {

inline constexpr const char* kToolVersion = "cfsim 1.0.0";

/// FNV-1a 64-bit digest; used for reproducibility equality checks, not
/// content authentication.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::string& path);
std::string digest_hex(std::uint64_t digest);

/// Record of one completed run: resolved config, seeds, input/output file
/// digests, tool version and timing. The embedded config snapshot is enough
/// to reproduce the run bit-for-bit.
struct RunManifest {
  std::string tool_version = kToolVersion;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, std::string> output_digests;
  double wall_seconds = 0.0;
};

void save_manifest(const RunManifest& manifest, const std::string& path);
RunManifest load_manifest(const std::string& path);

}  // namespace cfsim
