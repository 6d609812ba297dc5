#include "sgs/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <utility>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "sgs/errors.hpp"

namespace sgs {
namespace {

struct Pipe {
    int fd[2] = {-1, -1};
    Pipe() {
        if (::pipe2(fd, O_CLOEXEC) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
    }
    ~Pipe() { close_both(); }
    void close_read() { close_fd(fd[0]); }
    void close_write() { close_fd(fd[1]); }
    void close_both() { close_read(); close_write(); }
    int release_read() { return std::exchange(fd[0], -1); }
    int release_write() { return std::exchange(fd[1], -1); }
    static void close_fd(int& f) {
        if (f >= 0) ::close(f);
        f = -1;
    }
};

std::vector<char*> make_argv(const std::vector<std::string>& argv) {
    std::vector<char*> out;
    for (const auto& a : argv) out.push_back(const_cast<char*>(a.c_str()));
    out.push_back(nullptr);
    return out;
}

// Child side of fork: wire the pipes to 0/1/2 and exec. Never returns.
[[noreturn]] void exec_child(char* const* argv, int in_fd, int out_fd, int err_fd) {
    ::dup2(in_fd, STDIN_FILENO);
    ::dup2(out_fd, STDOUT_FILENO);
    if (err_fd >= 0) ::dup2(err_fd, STDERR_FILENO);
    ::setpgid(0, 0);
    ::execvp(argv[0], argv);
    _exit(127);
}

int wait_exit(pid_t pid) {
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {}
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::milliseconds timeout,
                          const std::string& input) {
    if (argv.empty()) throw InvalidInput("empty command");
    Pipe in, out, err;
    auto cargv = make_argv(argv);

    const pid_t pid = ::fork();
    if (pid < 0) throw Error(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) exec_child(cargv.data(), in.fd[0], out.fd[1], err.fd[1]);

    in.close_read();
    out.close_write();
    err.close_write();

    ProcessResult result;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::size_t written = 0;
    if (input.empty()) in.close_write();
    else ::fcntl(in.fd[1], F_SETFL, O_NONBLOCK);

    char buf[4096];
    while (out.fd[0] >= 0 || err.fd[0] >= 0) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            result.timed_out = true;
            break;
        }
        pollfd fds[3];
        int n = 0;
        if (out.fd[0] >= 0) fds[n++] = {out.fd[0], POLLIN, 0};
        if (err.fd[0] >= 0) fds[n++] = {err.fd[0], POLLIN, 0};
        if (in.fd[1] >= 0) fds[n++] = {in.fd[1], POLLOUT, 0};
        const int rc = ::poll(fds, n, static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc < 0) break;
        for (int i = 0; i < n; ++i) {
            if (!fds[i].revents) continue;
            if (fds[i].fd == in.fd[1]) {
                const ssize_t w = ::write(in.fd[1], input.data() + written, input.size() - written);
                if (w > 0) written += static_cast<std::size_t>(w);
                if (w < 0 || written == input.size()) in.close_write();
                continue;
            }
            const ssize_t r = ::read(fds[i].fd, buf, sizeof buf);
            const bool is_out = fds[i].fd == out.fd[0];
            if (r > 0) (is_out ? result.out : result.err).append(buf, static_cast<std::size_t>(r));
            else is_out ? out.close_read() : err.close_read();
        }
    }

    if (result.timed_out) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
        wait_exit(pid);
        result.exit_code = -1;
    } else {
        result.exit_code = wait_exit(pid);
    }
    return result;
}

Coprocess::Coprocess(std::vector<std::string> argv) : argv_(std::move(argv)) {}

Coprocess::~Coprocess() { stop(); }

void Coprocess::start() {
    if (argv_.empty()) throw BackendUnavailable("empty helper command");
    Pipe in, out;
    auto cargv = make_argv(argv_);
    const pid_t pid = ::fork();
    if (pid < 0) throw BackendUnavailable(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) exec_child(cargv.data(), in.fd[0], out.fd[1], -1);
    in.close_read();
    out.close_write();
    pid_ = pid;
    to_child_ = in.release_write();
    from_child_ = out.release_read();
    buffer_.clear();
}

void Coprocess::stop() {
    if (pid_ <= 0) return;
    Pipe::close_fd(to_child_);
    Pipe::close_fd(from_child_);
    ::kill(pid_, SIGTERM);
    wait_exit(pid_);
    pid_ = -1;
}

std::string Coprocess::request(const std::string& line) {
    if (pid_ <= 0) start();

    // A dead helper turns writes into SIGPIPE; block it for this thread's write.
    sigset_t block, old;
    sigemptyset(&block);
    sigaddset(&block, SIGPIPE);
    pthread_sigmask(SIG_BLOCK, &block, &old);
    std::string msg = line + "\n";
    std::size_t off = 0;
    bool ok = true;
    while (off < msg.size()) {
        const ssize_t w = ::write(to_child_, msg.data() + off, msg.size() - off);
        if (w < 0 && errno == EINTR) continue;
        if (w <= 0) {
            ok = false;
            break;
        }
        off += static_cast<std::size_t>(w);
    }
    timespec zero{0, 0};
    while (sigtimedwait(&block, nullptr, &zero) > 0) {}
    pthread_sigmask(SIG_SETMASK, &old, nullptr);
    if (!ok) {
        stop();
        throw BackendUnavailable("model helper exited before accepting a request");
    }

    char buf[4096];
    for (;;) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string reply = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return reply;
        }
        const ssize_t r = ::read(from_child_, buf, sizeof buf);
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) {
            stop();
            throw BackendUnavailable("model helper exited without replying");
        }
        buffer_.append(buf, static_cast<std::size_t>(r));
    }
}

}  // namespace sgs
