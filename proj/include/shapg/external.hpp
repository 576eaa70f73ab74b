#ifndef SHAPG_EXTERNAL_HPP
#define SHAPG_EXTERNAL_HPP

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapg/common.hpp"
#include "shapg/dataset.hpp"
#include "shapg/models.hpp"

namespace shapg {

/// Bridge to an external model process. The child is spawned once per
/// evaluator; each call writes one JSON request line to its stdin and reads
/// one JSON response line from its stdout:
///
///   {"task":"regression","feature_indices":[..],
///    "train":{"X":[[..]],"y":[..]},"test":{"X":[[..]],"y":[..]}}
///   -> {"score": <number>}
///
/// Requests are serialized per child. SHAPG_EXTERNAL_TIMEOUT (seconds)
/// overrides the per-call timeout.
class ExternalEvaluator {
public:
    explicit ExternalEvaluator(std::string command,
                               std::chrono::seconds timeout = default_timeout())
        : command_(std::move(command)), timeout_(timeout) {
        if (command_.empty()) throw InvalidArgument("external evaluator needs a command");
    }

    ~ExternalEvaluator() { shutdown(); }

    ExternalEvaluator(const ExternalEvaluator&) = delete;
    ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

    static std::chrono::seconds default_timeout() {
        if (const char* env = std::getenv("SHAPG_EXTERNAL_TIMEOUT")) {
            long v = std::strtol(env, nullptr, 10);
            if (v > 0) return std::chrono::seconds(v);
        }
        return std::chrono::seconds(300);
    }

    Metric evaluate(TaskKind task, const std::vector<int>& feature_indices,
                    const Matrix& train_x, const std::vector<double>& train_y,
                    const Matrix& test_x, const std::vector<double>& test_y,
                    const std::string& context) {
        if (pid_ < 0) spawn();

        nlohmann::json req = {
            {"task", to_string(task)},
            {"feature_indices", feature_indices},
            {"train", {{"X", train_x}, {"y", train_y}}},
            {"test", {{"X", test_x}, {"y", test_y}}},
        };
        std::string line = req.dump();
        line.push_back('\n');

        write_all(line, context);
        std::string reply = read_line(context);

        nlohmann::json resp;
        try {
            resp = nlohmann::json::parse(reply);
        } catch (const nlohmann::json::exception& e) {
            fail(context, std::string("malformed response: ") + e.what());
        }
        if (!resp.contains("score") || !resp["score"].is_number())
            fail(context, "response lacks a numeric \"score\" field");

        return {default_metric(task), resp["score"].get<double>()};
    }

private:
    void spawn() {
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0)
            throw Error("external evaluator: pipe() failed");
        pid_t pid = fork();
        if (pid < 0) throw Error("external evaluator: fork() failed");
        if (pid == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command_.c_str(), (char*)nullptr);
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        pid_ = pid;
        stdin_fd_ = to_child[1];
        stdout_fd_ = from_child[0];
        buffer_.clear();
    }

    void shutdown() {
        if (stdin_fd_ >= 0) close(stdin_fd_);
        if (stdout_fd_ >= 0) close(stdout_fd_);
        stdin_fd_ = stdout_fd_ = -1;
        if (pid_ > 0) {
            int status = 0;
            if (waitpid(pid_, &status, WNOHANG) == 0) {
                kill(pid_, SIGTERM);
                waitpid(pid_, &status, 0);
            }
            pid_ = -1;
        }
    }

    [[noreturn]] void fail(const std::string& context, const std::string& what) {
        int status = 0;
        std::string exit_note;
        if (pid_ > 0 && waitpid(pid_, &status, WNOHANG) == pid_) {
            if (WIFEXITED(status))
                exit_note = " (exit code " + std::to_string(WEXITSTATUS(status)) + ")";
            pid_ = -1;
        }
        shutdown();
        throw Error("external evaluator [" + context + "]: " + what + exit_note);
    }

    void write_all(const std::string& data, const std::string& context) {
        std::size_t off = 0;
        while (off < data.size()) {
            ssize_t n = write(stdin_fd_, data.data() + off, data.size() - off);
            if (n <= 0) fail(context, "write to child failed");
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line(const std::string& context) {
        auto deadline = std::chrono::steady_clock::now() + timeout_;
        for (;;) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (remaining.count() <= 0) fail(context, "timeout waiting for response");

            pollfd pfd{stdout_fd_, POLLIN, 0};
            int rc = poll(&pfd, 1, static_cast<int>(remaining.count()));
            if (rc == 0) fail(context, "timeout waiting for response");
            if (rc < 0) fail(context, "poll on child stdout failed");

            char chunk[4096];
            ssize_t n = read(stdout_fd_, chunk, sizeof chunk);
            if (n <= 0) fail(context, "child closed its stdout before replying");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    std::string command_;
    std::chrono::seconds timeout_;
    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    std::string buffer_;
};

/// One-shot helper matching the protocol surface.
inline Metric external_evaluate(const std::string& command, TaskKind task,
                                const std::vector<int>& feature_indices, const Matrix& train_x,
                                const std::vector<double>& train_y, const Matrix& test_x,
                                const std::vector<double>& test_y,
                                const std::string& context = "adhoc") {
    ExternalEvaluator ev(command);
    return ev.evaluate(task, feature_indices, train_x, train_y, test_x, test_y, context);
}

}  // namespace shapg

#endif
