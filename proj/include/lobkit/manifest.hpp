#pragma once

#include <json.hpp>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace lobkit {

inline constexpr const char* kToolVersion = "0.1.0";

// 64-bit FNV-1a over a file's bytes, hex encoded. Good enough to detect
// that inputs or outputs changed between runs.
inline std::string fnv1a64_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return "missing";
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 15];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    const std::streamsize n = is.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
    if (!is) break;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

// Every CLI run emits one of these next to its outputs: what ran, with which
// inputs (by content hash), and what it produced. Re-running with identical
// manifest inputs reproduces identical outputs.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool"] = "lobkit";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["config"] = config_path;
    j["seed"] = seed;
    j["wall_seconds"] = wall_seconds;
    nlohmann::json in = nlohmann::json::object(), out = nlohmann::json::object();
    for (const auto& p : inputs) in[p] = fnv1a64_file(p);
    for (const auto& p : outputs) out[p] = fnv1a64_file(p);
    j["inputs"] = in;
    j["outputs"] = out;
    return j;
  }
};

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace lobkit
