#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <sys/types.h>

namespace sgs {

struct ProcessResult {
    int exit_code = -1;  // -1 when killed or timed out
    bool timed_out = false;
    std::string out;
    std::string err;
};

// Runs argv[0] (PATH lookup) to completion, feeding `input` on stdin. The child
// is killed once `timeout` elapses. Throws Error if the process cannot start.
ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::milliseconds timeout,
                          const std::string& input = {});

// Long-lived child speaking one line per request and one line per reply.
// Not thread-safe; callers serialize.
class Coprocess {
public:
    explicit Coprocess(std::vector<std::string> argv);
    ~Coprocess();
    Coprocess(const Coprocess&) = delete;
    Coprocess& operator=(const Coprocess&) = delete;

    // Starts the child on first use. Throws BackendUnavailable if it has exited
    // or closes its stdout.
    std::string request(const std::string& line);
    bool running() const { return pid_ > 0; }

private:
    void start();
    void stop();

    std::vector<std::string> argv_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
};

}  // namespace sgs
