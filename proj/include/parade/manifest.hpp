#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace parade {

inline constexpr const char* kToolVersion = "0.1.0";

// Provenance record written next to every produced artifact set. Holds only
// reproducible content (no timestamps), so identical runs yield identical
// manifests.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, std::string> artifact_digests;
  std::string checkpoint_path;
};

// FNV-1a 64 over the file bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

void write_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace parade
