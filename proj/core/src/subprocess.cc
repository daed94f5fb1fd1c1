#include "grace/subprocess.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <mutex>

#include "grace/errors.h"

namespace grace {
namespace {

class Pipe {
 public:
  Pipe() {
    if (::pipe2(fds_.data(), O_CLOEXEC) != 0) {
      throw DataError(std::string("pipe: ") + std::strerror(errno));
    }
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;

  int read_end() const { return fds_[0]; }
  int write_end() const { return fds_[1]; }
  void close_read() { close_fd(fds_[0]); }
  void close_write() { close_fd(fds_[1]); }

 private:
  static void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
  std::array<int, 2> fds_{-1, -1};
};

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input) {
  if (argv.empty()) throw DataError("run_process: empty argv");
  Pipe in;
  Pipe out;
  Pipe err;

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw DataError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in.read_end(), STDIN_FILENO);
    ::dup2(out.write_end(), STDOUT_FILENO);
    ::dup2(err.write_end(), STDERR_FILENO);
    ::execvp(cargv[0], cargv.data());
    ::_exit(127);
  }
  in.close_read();
  out.close_write();
  err.close_write();

  // Writing to a child that exited early must not kill us.
  static std::once_flag sigpipe_once;
  std::call_once(sigpipe_once, [] { ::signal(SIGPIPE, SIG_IGN); });

  ProcessResult result;
  std::size_t written = 0;
  if (input.empty()) in.close_write();
  bool out_open = true;
  bool err_open = true;
  std::array<char, 65536> buf{};
  while (out_open || err_open) {
    std::array<pollfd, 3> fds{};
    nfds_t count = 0;
    const bool writing = written < input.size() && in.write_end() >= 0;
    if (out_open) fds[count++] = {out.read_end(), POLLIN, 0};
    if (err_open) fds[count++] = {err.read_end(), POLLIN, 0};
    if (writing) fds[count++] = {in.write_end(), POLLOUT, 0};
    if (::poll(fds.data(), count, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (nfds_t i = 0; i < count; ++i) {
      if (!fds[i].revents) continue;
      if (fds[i].fd == in.write_end()) {
        const ssize_t n = ::write(in.write_end(), input.data() + written, input.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 || written >= input.size()) in.close_write();
        continue;
      }
      const ssize_t n = ::read(fds[i].fd, buf.data(), buf.size());
      if (n > 0) {
        (fds[i].fd == out.read_end() ? result.out : result.err).append(buf.data(),
                                                                       static_cast<std::size_t>(n));
      } else if (n == 0 || errno != EINTR) {
        if (fds[i].fd == out.read_end()) out_open = false;
        else err_open = false;
      }
    }
  }
  in.close_write();

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
  return result;
}

ProcessResult run_shell(const std::string& command, std::string_view input) {
  return run_process({"/bin/sh", "-c", command}, input);
}

}  // namespace grace
