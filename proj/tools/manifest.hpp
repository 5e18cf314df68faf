#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ilts::cli {

std::string sha256_file(const std::filesystem::path& path);

// Provenance record written next to every command's outputs.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv, std::string config);

  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
  void input(const std::filesystem::path& path) { inputs_.push_back(path); }
  void output(const std::filesystem::path& path) { outputs_.push_back(path); }

  // Digests every input and output, stamps the wall clock, writes atomically.
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string config_;
  std::map<std::string, std::uint64_t> seeds_;
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> outputs_;
  std::chrono::steady_clock::time_point start_;
  std::chrono::system_clock::time_point started_at_;
};

}  // namespace ilts::cli
