#include "justgen/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "justgen/errors.hpp"
#include "justgen/text.hpp"

namespace justgen {

std::string iso8601_utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char out[32];
  std::strftime(out, sizeof(out), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return out;
}

void RunManifest::write(const std::string& directory) const {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["seeds"] = seeds;
  auto stamp = [](const std::vector<std::string>& paths) {
    nlohmann::json arr = nlohmann::json::array();
    for (const std::string& p : paths) arr.push_back({{"path", p}, {"fnv1a64", hex64(fnv1a64_file(p))}});
    return arr;
  };
  j["inputs"] = stamp(inputs);
  j["outputs"] = stamp(outputs);
  j["started_at"] = started_at;
  j["finished_at"] = iso8601_utc_now();

  const std::string path = (fs::path(directory) / "manifest.json").string();
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  f << j.dump(2) << "\n";
  if (!f) fail(ErrorKind::IoError, "write failed: " + path);
}

}  // namespace justgen
