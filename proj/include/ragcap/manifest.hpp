#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ragcap {

// Emitted next to every CLI run's outputs; carries everything needed to
// repeat the run bit-exactly.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;  // full command line, program included
  std::string resolved_config;    // JSON text of the effective configuration
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string engine_version;
};

void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

}  // namespace ragcap
