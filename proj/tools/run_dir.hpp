#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <list>
#include <string>
#include <vector>

namespace eigenglue::cli {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// One output directory per invocation. Records inputs and outputs and writes manifest.json last.
class RunDir {
public:
  RunDir(std::filesystem::path dir, std::string command, std::vector<std::string> argv, std::uint64_t seed);

  const std::filesystem::path& path() const { return dir_; }

  void set_config(const std::filesystem::path& config);
  void add_input(const std::filesystem::path& file);
  void add_builtin(const std::string& spec);

  /// Write a whole output file.
  void write(const std::string& name, const std::string& content);
  /// Stream an output file; it is hashed when the manifest is written.
  std::ofstream& stream(const std::string& name);

  void finish(int exit_code, const std::string& error = {});

private:
  struct Input {
    std::string label;
    std::string sha256;
    bool builtin = false;
  };
  std::filesystem::path dir_;
  std::string command_;
  std::vector<std::string> argv_;
  std::uint64_t seed_;
  std::string config_;
  std::string started_;
  std::vector<Input> inputs_;
  std::vector<std::string> outputs_;
  std::list<std::pair<std::string, std::ofstream>> streams_;
  bool finished_ = false;
};

} // namespace eigenglue::cli
