#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace justgen {

std::string iso8601_utc_now();

// Provenance record written as manifest.json next to a command's outputs.
// Timestamps make it the one output file that is not run-to-run identical,
// so reproducibility checks compare everything except it.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<uint64_t> seeds;
  std::vector<std::string> inputs;   // stamped with their current hash
  std::vector<std::string> outputs;  // stamped when the manifest is written
  std::string started_at;

  void write(const std::string& directory) const;
};

}  // namespace justgen
