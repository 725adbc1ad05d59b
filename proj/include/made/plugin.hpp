#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace made::plugin {

// Transport-level failure (timeout, EOF, malformed line). Distinct from
// application-level validation errors so callers can decide what is
// retryable.
struct PluginError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Child process speaking line-delimited JSON on stdin/stdout: exactly one
// UTF-8 JSON object per line in each direction.
class PluginProcess {
 public:
  PluginProcess(std::vector<std::string> command, double timeout_s = 300.0);
  ~PluginProcess();

  PluginProcess(const PluginProcess&) = delete;
  PluginProcess& operator=(const PluginProcess&) = delete;

  // Writes one request line and blocks for one response line.
  // Throws std::runtime_error on timeout, EOF, or unparseable payload
  // (the offending payload is included in the message).
  nlohmann::json request(const nlohmann::json& msg);

  const std::vector<std::string>& command() const { return command_; }

 private:
  void write_line(const std::string& line);
  std::string read_line();

  std::vector<std::string> command_;
  double timeout_s_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace made::plugin
