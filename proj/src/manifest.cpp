#include "ragcap/manifest.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "ragcap/common.hpp"
#include "ragcap/io.hpp"

namespace ragcap {

using ordered_json = nlohmann::ordered_json;

void write_manifest(const std::string& path, const RunManifest& manifest) {
  ordered_json out;
  out["subcommand"] = manifest.subcommand;
  out["argv"] = manifest.argv;
  if (!manifest.resolved_config.empty()) {
    out["resolved_config"] = ordered_json::parse(manifest.resolved_config);
  } else {
    out["resolved_config"] = ordered_json::object();
  }
  out["inputs"] = manifest.inputs;
  out["outputs"] = manifest.outputs;
  out["seed"] = manifest.seed;
  out["engine_version"] = manifest.engine_version;
  write_text_file(path, out.dump(2) + "\n");
}

RunManifest read_manifest(const std::string& path) {
  ordered_json parsed;
  try {
    parsed = ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad manifest " + path + ": " + e.what());
  }
  RunManifest manifest;
  manifest.subcommand = parsed.at("subcommand").get<std::string>();
  manifest.argv = parsed.at("argv").get<std::vector<std::string>>();
  manifest.resolved_config = parsed.at("resolved_config").dump();
  manifest.inputs = parsed.at("inputs").get<std::vector<std::string>>();
  manifest.outputs = parsed.at("outputs").get<std::vector<std::string>>();
  manifest.seed = parsed.at("seed").get<std::uint64_t>();
  manifest.engine_version = parsed.at("engine_version").get<std::string>();
  return manifest;
}

}  // namespace ragcap
