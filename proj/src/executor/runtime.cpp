#include <fcntl.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "slamhive/executor.hpp"

namespace slamhive::executor {

namespace {

struct ProcStat {
  pid_t pid = 0;
  char state = '?';
  pid_t pgrp = 0;
  unsigned long long ticks = 0;  // utime + stime
  long long rss_pages = 0;
};

std::optional<ProcStat> read_stat(pid_t pid) {
  std::ifstream in("/proc/" + std::to_string(pid) + "/stat");
  std::string line;
  if (!in || !std::getline(in, line)) return std::nullopt;
  // comm may contain spaces and parentheses; fields resume after the last ')'
  const auto close = line.rfind(')');
  if (close == std::string::npos) return std::nullopt;
  std::istringstream rest(line.substr(close + 2));
  ProcStat stat;
  stat.pid = pid;
  std::string skip;
  long long ppid = 0, pgrp = 0;
  rest >> stat.state >> ppid >> pgrp;
  stat.pgrp = static_cast<pid_t>(pgrp);
  // fields 6..13 (session .. cmajflt)
  for (int i = 0; i < 8; ++i) rest >> skip;
  unsigned long long utime = 0, stime = 0;
  rest >> utime >> stime;
  // fields 16..23 (cutime .. vsize)
  for (int i = 0; i < 8; ++i) rest >> skip;
  rest >> stat.rss_pages;
  if (!rest) return std::nullopt;
  stat.ticks = utime + stime;
  return stat;
}

std::vector<ProcStat> group_members(pid_t pgid) {
  std::vector<ProcStat> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator("/proc", ec)) {
    const auto name = entry.path().filename().string();
    if (name.empty() || name.find_first_not_of("0123456789") != std::string::npos) continue;
    const auto stat = read_stat(static_cast<pid_t>(std::stol(name)));
    if (stat && stat->pgrp == pgid && stat->state != 'Z' && stat->state != 'X') out.push_back(*stat);
  }
  return out;
}

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

class LocalProcess : public SandboxProcess {
 public:
  explicit LocalProcess(pid_t pid) : pid_(pid) {}
  ~LocalProcess() override { terminate(); }

  std::string id() const override { return "pid-" + std::to_string(pid_); }

  std::optional<int> poll_exit() override {
    if (!exit_code_) {
      int status = 0;
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_) exit_code_ = decode_status(status);
    }
    return exit_code_;
  }

  ProcessUsage usage() override {
    const auto members = group_members(pid_);
    if (members.empty() || terminated_) throw Error(Errc::SandboxGone, "sandbox " + id() + " has no live process");
    static const double ticks_per_second = static_cast<double>(::sysconf(_SC_CLK_TCK));
    static const double page_mb = static_cast<double>(::sysconf(_SC_PAGESIZE)) / (1024.0 * 1024.0);
    ProcessUsage usage;
    for (const auto& m : members) {
      usage.cpu_seconds += static_cast<double>(m.ticks) / ticks_per_second;
      usage.rss_mb += static_cast<double>(m.rss_pages) * page_mb;
    }
    usage.processes = members.size();
    // CPU time of members that already exited would vanish from the sum and
    // produce negative deltas; keep the total monotone.
    usage.cpu_seconds = std::max(usage.cpu_seconds, max_cpu_seconds_);
    max_cpu_seconds_ = usage.cpu_seconds;
    return usage;
  }

  void terminate() override {
    if (terminated_) return;
    terminated_ = true;
    ::kill(-pid_, SIGKILL);
    if (!exit_code_) {
      int status = 0;
      if (::waitpid(pid_, &status, 0) == pid_) exit_code_ = decode_status(status);
    }
    // Grandchildren reparented to us (child subreaper) still carry the group id.
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (std::chrono::steady_clock::now() < deadline) {
      ::kill(-pid_, SIGKILL);
      while (::waitpid(-pid_, nullptr, WNOHANG) > 0) {
      }
      if (group_members(pid_).empty()) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

 private:
  pid_t pid_;
  std::optional<int> exit_code_;
  bool terminated_ = false;
  double max_cpu_seconds_ = 0.0;
};

}  // namespace

LocalProcessRuntime::LocalProcessRuntime() { ::prctl(PR_SET_CHILD_SUBREAPER, 1); }

std::unique_ptr<SandboxProcess> LocalProcessRuntime::spawn(const SpawnRequest& request) {
  if (!std::filesystem::exists(request.executable))
    throw Error(Errc::SandboxSpawnFailure, "no executable at " + request.executable.string());

  // Everything the child needs is built before fork.
  std::vector<std::string> args{request.executable.string()};
  args.insert(args.end(), request.args.begin(), request.args.end());
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  std::map<std::string, std::string> env_map;
  for (char** e = environ; *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq != std::string::npos) env_map[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  for (const auto& [k, v] : request.env) env_map[k] = v;
  std::vector<std::string> env_entries;
  for (const auto& [k, v] : env_map) env_entries.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& e : env_entries) envp.push_back(e.data());
  envp.push_back(nullptr);

  const std::string cwd = request.working_dir.string();
  const std::string log = request.log_file.string();

  int report[2];
  if (::pipe2(report, O_CLOEXEC) != 0)
    throw Error(Errc::SandboxSpawnFailure, std::string("pipe: ") + std::strerror(errno));

  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(report[0]);
    ::close(report[1]);
    throw Error(Errc::SandboxSpawnFailure, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::close(report[0]);
    ::setpgid(0, 0);
    int err = 0;
    if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) err = errno;
    if (!err && !log.empty()) {
      const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
      if (fd >= 0) {
        ::dup2(fd, STDOUT_FILENO);
        ::dup2(fd, STDERR_FILENO);
        ::close(fd);
      }
    }
    if (!err) {
      ::execve(argv[0], argv.data(), envp.data());
      err = errno;
    }
    [[maybe_unused]] auto n = ::write(report[1], &err, sizeof err);
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(report[1]);
  int child_errno = 0;
  const auto n = ::read(report[0], &child_errno, sizeof child_errno);
  ::close(report[0]);
  if (n == static_cast<ssize_t>(sizeof child_errno)) {
    ::waitpid(pid, nullptr, 0);
    throw Error(Errc::SandboxSpawnFailure,
                "cannot start " + request.executable.string() + ": " + std::strerror(child_errno));
  }
  return std::make_unique<LocalProcess>(pid);
}

std::unique_ptr<SandboxProcess> ContainerRuntime::spawn(const SpawnRequest& request) {
  throw Error(Errc::SandboxSpawnFailure,
              "container engine '" + engine_ + "' is not available for " + request.executable.string());
}

void AdapterRegistry::add(const std::string& image_ref, fs::path executable) {
  adapters_[image_ref] = std::move(executable);
}

const fs::path& AdapterRegistry::resolve(const config::AlgorithmSpec& algorithm) const {
  const auto it = adapters_.find(algorithm.image_ref);
  if (it == adapters_.end())
    throw Error(Errc::AdapterMissing,
                "no adapter for image '" + algorithm.image_ref + "' of algorithm " + std::to_string(algorithm.id));
  return it->second;
}

}  // namespace slamhive::executor
