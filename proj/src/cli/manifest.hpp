#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace mcuq::cli {

std::string sha256_file(const std::filesystem::path& path);

/// Provenance record written next to every command output.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> args);

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  nlohmann::json& config() { return doc_["config"]; }
  nlohmann::json& diagnostics() { return doc_["diagnostics"]; }
  void set_seed(std::uint64_t seed) { doc_["seed"] = seed; }
  void set_wall_seconds(double s) { doc_["timings"]["wall_seconds"] = s; }

  void write(const std::filesystem::path& path) const;

 private:
  nlohmann::json doc_;
};

}  // namespace mcuq::cli
