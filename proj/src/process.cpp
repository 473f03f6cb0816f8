#include "shadowfix/shadow.hpp"

#include <cerrno>
#include <chrono>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace shadowfix::shadow {

void to_json(nlohmann::json& j, const CIConfig& c) {
    j = nlohmann::json{
        {"command", c.command}, {"timeout_seconds", c.timeout_seconds}, {"env", c.env}, {"workdir", c.workdir}};
}

void from_json(const nlohmann::json& j, CIConfig& c) {
    c.command = j.at("command").get<std::vector<std::string>>();
    c.timeout_seconds = j.value("timeout_seconds", 300);
    c.env = j.value("env", std::map<std::string, std::string>{});
    c.workdir = j.value("workdir", "");
}

namespace {

constexpr std::size_t kMaxLogBytes = std::size_t{8} << 20;

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    ~Fd() { reset(); }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;

    [[nodiscard]] int get() const noexcept { return fd_; }
    void reset() noexcept {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_ = -1;
};

std::vector<std::string> build_env(const std::map<std::string, std::string>& overrides) {
    std::vector<std::string> out;
    for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
        const std::string_view entry(*e);
        const auto eq = entry.find('=');
        if (overrides.count(std::string(entry.substr(0, eq))) == 0) {
            out.emplace_back(entry);
        }
    }
    for (const auto& [k, v] : overrides) {
        out.push_back(k + "=" + v);
    }
    return out;
}

std::vector<char*> pointers(std::vector<std::string>& strings) {
    std::vector<char*> out;
    out.reserve(strings.size() + 1);
    for (auto& s : strings) {
        out.push_back(s.data());
    }
    out.push_back(nullptr);
    return out;
}

}  // namespace

CIVerdict run_ci(const fs::path& workspace, const CIConfig& ci) {
    if (ci.command.empty()) {
        throw ConfigError("CI command is empty");
    }
    if (ci.timeout_seconds <= 0) {
        throw ConfigError("CI timeout must be positive");
    }
    fs::path dir = workspace;
    if (!ci.workdir.empty()) {
        const auto wd = fixmine::resolve_within(workspace, ci.workdir);
        if (!wd) {
            throw ConfigError("CI workdir '" + ci.workdir + "' escapes the workspace");
        }
        dir = *wd;
    }

    auto argv_strings = ci.command;
    auto env_strings = build_env(ci.env);
    auto argv = pointers(argv_strings);
    auto envp = pointers(env_strings);
    const auto dir_string = dir.string();

    const auto start = std::chrono::steady_clock::now();
    const auto deadline = start + std::chrono::seconds(ci.timeout_seconds);
    auto elapsed = [&] {
        return std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - start);
    };

    int out_pipe[2];
    int err_pipe[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        return {Outcome::fail, std::string(stage::launch_failed), std::strerror(errno), elapsed()};
    }
    Fd out_read(out_pipe[0]);
    Fd out_write(out_pipe[1]);
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
        return {Outcome::fail, std::string(stage::launch_failed), std::strerror(errno), elapsed()};
    }
    Fd exec_read(err_pipe[0]);
    Fd exec_write(err_pipe[1]);

    const pid_t pid = ::fork();
    if (pid < 0) {
        return {Outcome::fail, std::string(stage::launch_failed), std::strerror(errno), elapsed()};
    }
    if (pid == 0) {
        // Child: only async-signal-safe calls from here on.
        ::setpgid(0, 0);
        ::dup2(out_write.get(), STDOUT_FILENO);
        ::dup2(out_write.get(), STDERR_FILENO);
        const int devnull = ::open("/dev/null", O_RDONLY | O_CLOEXEC);
        if (devnull >= 0) {
            ::dup2(devnull, STDIN_FILENO);
        }
        int err = 0;
        if (::chdir(dir_string.c_str()) != 0) {
            err = errno;
        } else {
            ::execvpe(argv[0], argv.data(), envp.data());
            err = errno;
        }
        [[maybe_unused]] auto n = ::write(exec_write.get(), &err, sizeof err);
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    out_write.reset();
    exec_write.reset();

    std::string log;
    bool timed_out = false;
    bool reaped = false;
    int status = 0;
    char buf[65536];
    while (true) {
        const auto left = std::chrono::duration_cast<Millis>(deadline - std::chrono::steady_clock::now()).count();
        if (left <= 0) {
            timed_out = true;
            break;
        }
        pollfd pfd{out_read.get(), POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left, 1000)));
        if (ready < 0 && errno == EINTR) {
            continue;
        }
        if (ready == 0) {
            if (::waitpid(pid, &status, WNOHANG) == pid) {
                reaped = true;
                break;
            }
            continue;
        }
        if (ready < 0) {
            continue;
        }
        const auto n = ::read(out_read.get(), buf, sizeof buf);
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n <= 0) {
            break;
        }
        if (log.size() < kMaxLogBytes) {
            log.append(buf, static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(n),
                                                                            kMaxLogBytes - log.size())));
        }
    }
    if (timed_out) {
        ::kill(-pid, SIGKILL);
    }

    while (!reaped && ::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (!timed_out) {
        // Grandchildren may outlive the command; do not let them linger.
        ::kill(-pid, SIGKILL);
    }

    int exec_errno = 0;
    const bool exec_failed = ::read(exec_read.get(), &exec_errno, sizeof exec_errno) == sizeof exec_errno;
    const auto duration = elapsed();

    if (exec_failed) {
        log += "cannot run '" + ci.command.front() + "': " + std::strerror(exec_errno) + "\n";
        return {Outcome::fail, std::string(stage::launch_failed), std::move(log), duration};
    }
    if (timed_out) {
        log += "timed out after " + std::to_string(ci.timeout_seconds) + " s\n";
        return {Outcome::fail, std::string(stage::timeout), std::move(log), duration};
    }
    if (WIFEXITED(status) && WEXITSTATUS(status) == 0) {
        return {Outcome::pass, std::string(stage::complete), std::move(log), duration};
    }
    return {Outcome::fail, std::string(stage::ci_failed), std::move(log), duration};
}

}  // namespace shadowfix::shadow
