#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rwalk {

inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const std::string& path);

// Reproducibility sidecar: every file the CLI writes gets
// <file>.manifest.json next to it.
struct RunManifest {
  std::vector<std::string> command_line;
  std::map<std::string, std::string> input_digests;  // path -> sha256
  std::optional<std::uint64_t> seed;
  std::string tool_version = kToolVersion;
  double wall_seconds = 0.0;
};

std::string serialize_manifest(const RunManifest& m);
void write_manifest_for(const std::string& output_path, const RunManifest& m);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace rwalk
