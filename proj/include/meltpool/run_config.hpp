#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace meltpool {

/// Parsed command configuration with validation findings.
struct RunConfig {
  std::string command;
  std::string json_text;   // original document
  std::uint64_t hash = 0;  // FNV-1a of json_text
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }
};

std::uint64_t fnv1a(const std::string& text);

/// Parses and validates a config document for the given command. Never
/// throws on invalid content; findings land in errors/warnings.
RunConfig load_config(const std::string& command, const std::string& json_text);

/// Reads a whole file; throws std::runtime_error if unreadable.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace meltpool
