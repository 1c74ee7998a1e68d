#include "cfsim/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cfsim/errors.hpp"

namespace cfsim {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for digest");
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

std::string digest_hex(std::uint64_t digest) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

void save_manifest(const RunManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["tool_version"] = manifest.tool_version;
  j["config"] = manifest.config;
  j["seed"] = manifest.seed;
  j["input_digests"] = manifest.input_digests;
  j["output_digests"] = manifest.output_digests;
  j["wall_seconds"] = manifest.wall_seconds;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << j.dump(2) << "\n";
}

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("manifest '" + path + "': " + e.what());
  }
  RunManifest m;
  m.tool_version = j.value("tool_version", "");
  m.config = j.at("config");
  m.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("input_digests")) {
    m.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
  }
  if (j.contains("output_digests")) {
    m.output_digests = j.at("output_digests").get<std::map<std::string, std::string>>();
  }
  m.wall_seconds = j.value("wall_seconds", 0.0);
  return m;
}

}  // namespace cfsim
