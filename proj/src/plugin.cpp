#include <made/plugin.hpp>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace made::plugin {

PluginProcess::PluginProcess(std::vector<std::string> command, double timeout_s)
    : command_(std::move(command)), timeout_s_(timeout_s) {
  if (command_.empty()) throw std::invalid_argument("empty plugin command");

  int to_child[2], from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0)
    throw PluginError("plugin pipe failed: " + std::string(strerror(errno)));

  pid_ = fork();
  if (pid_ < 0) throw PluginError("plugin fork failed: " + std::string(strerror(errno)));

  if (pid_ == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    std::vector<char*> argv;
    for (auto& a : command_) argv.push_back(a.data());
    argv.push_back(nullptr);
    execvp(argv[0], argv.data());
    _exit(127);
  }

  close(to_child[0]);
  close(from_child[1]);
  to_child_ = to_child[1];
  from_child_ = from_child[0];
}

PluginProcess::~PluginProcess() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    // Give the child a moment to exit on stdin EOF, then force it.
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) return;
      usleep(10000);
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
  }
}

void PluginProcess::write_line(const std::string& line) {
  std::string payload = line + "\n";
  size_t off = 0;
  while (off < payload.size()) {
    const ssize_t n = write(to_child_, payload.data() + off, payload.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw PluginError("plugin write failed (" + command_[0] +
                               "): " + strerror(errno));
    }
    off += size_t(n);
  }
}

std::string PluginProcess::read_line() {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    struct pollfd pfd {
      from_child_, POLLIN, 0
    };
    const int pr = poll(&pfd, 1, static_cast<int>(timeout_s_ * 1000.0));
    if (pr == 0) throw PluginError("plugin timeout after " +
                                          std::to_string(timeout_s_) + "s (" + command_[0] + ")");
    if (pr < 0) {
      if (errno == EINTR) continue;
      throw PluginError("plugin poll failed: " + std::string(strerror(errno)));
    }
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n == 0) throw PluginError("plugin closed its stdout (" + command_[0] + ")");
    if (n < 0) {
      if (errno == EINTR) continue;
      throw PluginError("plugin read failed: " + std::string(strerror(errno)));
    }
    buffer_.append(chunk, size_t(n));
  }
}

nlohmann::json PluginProcess::request(const nlohmann::json& msg) {
  write_line(msg.dump());
  const std::string line = read_line();
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw PluginError("plugin sent malformed JSON (" + command_[0] + "): " + e.what() +
                             "; payload: " + line);
  }
}

}  // namespace made::plugin
