#include "parade/manifest.hpp"

#include "parade/rng.hpp"
#include "parade/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace parade {

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for digest: " + path);
  std::ostringstream bytes;
  bytes << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.str())));
  return buf;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["command"] = manifest.command;
  j["config"] = manifest.config;
  j["seeds"] = manifest.seeds;
  j["inputs"] = manifest.input_digests;
  j["artifacts"] = manifest.artifact_digests;
  if (!manifest.checkpoint_path.empty()) j["checkpoint"] = manifest.checkpoint_path;
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace parade
