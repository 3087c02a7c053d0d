// Copyright 2026 The Ens2 Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ens2/process.hpp"

#include <errno.h>
#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <mutex>

#include "ens2/error.hpp"
#include "ens2/worker.hpp"

extern char** environ;

namespace ens2 {

namespace {

using SteadyClock = std::chrono::steady_clock;

void ignore_sigpipe_once() {
  static std::once_flag once;
  std::call_once(once, [] { signal(SIGPIPE, SIG_IGN); });
}

struct Running {
  pid_t pid = -1;
  int out_fd = -1;
  std::string buffer;
  SteadyClock::time_point started;
  SteadyClock::time_point last_envelope;
  SteadyClock::time_point term_at;
  SteadyClock::time_point kill_at;
  bool reaped = false;
};

// Spawns the job with stdin/stdout pipes. Returns false and fills
// spawn_error on failure.
bool spawn(const WorkerJob& job, Running& r, WorkerExit& exit) {
  if (job.argv.empty()) {
    exit.spawn_error = "empty command";
    return false;
  }
  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) {
    exit.spawn_error = std::strerror(errno);
    return false;
  }
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    exit.spawn_error = std::strerror(errno);
    close(in_pipe[0]);
    close(in_pipe[1]);
    return false;
  }
  std::error_code ec;
  if (job.log_path.has_parent_path()) std::filesystem::create_directories(job.log_path.parent_path(), ec);

  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_adddup2(&fa, in_pipe[0], 0);
  posix_spawn_file_actions_adddup2(&fa, out_pipe[1], 1);
  const std::string log = job.log_path.empty() ? std::string("/dev/null") : job.log_path.string();
  posix_spawn_file_actions_addopen(&fa, 2, log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);

  std::vector<char*> argv;
  for (const auto& a : job.argv) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  pid_t pid = -1;
  const int rc = posix_spawnp(&pid, argv[0], &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  close(in_pipe[0]);
  close(out_pipe[1]);
  if (rc != 0) {
    exit.spawn_error = std::string("cannot start ") + job.argv[0] + ": " + std::strerror(rc);
    close(in_pipe[1]);
    close(out_pipe[0]);
    return false;
  }
  // The request is far below the pipe capacity; a child that exits without
  // reading it yields EPIPE, which is harmless here.
  write_all(in_pipe[1], job.request_line);
  close(in_pipe[1]);
  fcntl(out_pipe[0], F_SETFL, fcntl(out_pipe[0], F_GETFL) | O_NONBLOCK);

  r.pid = pid;
  r.out_fd = out_pipe[0];
  r.started = SteadyClock::now();
  r.last_envelope = r.started;
  const auto secs = [](double s) {
    return std::chrono::duration_cast<SteadyClock::duration>(std::chrono::duration<double>(s));
  };
  r.term_at = r.started + secs(job.budget_s);
  r.kill_at = r.term_at + secs(job.grace_s);
  return true;
}

void handle_line(const WorkerJob& job, Running& r, WorkerExit& exit, std::string_view line) {
  if (line.empty()) return;
  const auto now = SteadyClock::now();
  exit.max_silence_s = std::max(exit.max_silence_s, std::chrono::duration<double>(now - r.last_envelope).count());
  r.last_envelope = now;
  protocol::Envelope e;
  try {
    e = protocol::decode(line);
  } catch (const ProtocolError& err) {
    exit.protocol_errors.push_back(err.what());
    return;
  }
  ++exit.envelopes;
  if (e.kind() == protocol::Kind::kHeartbeat) {
    ++exit.heartbeats;
  } else {
    exit.last_envelope = e;
  }
  if (job.on_envelope) job.on_envelope(e);
}

// Reads whatever is available. Returns false at EOF or on error.
bool drain(const WorkerJob& job, Running& r, WorkerExit& exit) {
  char chunk[65536];
  while (true) {
    const ssize_t n = read(r.out_fd, chunk, sizeof chunk);
    if (n > 0) {
      r.buffer.append(chunk, static_cast<std::size_t>(n));
      std::size_t pos;
      while ((pos = r.buffer.find('\n')) != std::string::npos) {
        handle_line(job, r, exit, std::string_view(r.buffer).substr(0, pos));
        r.buffer.erase(0, pos + 1);
      }
      continue;
    }
    if (n == 0) return false;
    if (errno == EINTR) continue;
    return errno == EAGAIN || errno == EWOULDBLOCK;
  }
}

void close_out(Running& r) {
  if (r.out_fd >= 0) {
    close(r.out_fd);
    r.out_fd = -1;
  }
}

void record_status(Running& r, WorkerExit& exit, int status) {
  r.reaped = true;
  exit.elapsed_s = std::chrono::duration<double>(SteadyClock::now() - r.started).count();
  if (WIFEXITED(status)) {
    exit.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    exit.signal = WTERMSIG(status);
    if (exit.killed || (exit.terminated && *exit.signal == SIGTERM)) {
      exit.exit_code = protocol::kExitBudgetKill;
    } else {
      exit.exit_code = 128 + *exit.signal;
    }
  }
}

}  // namespace

std::vector<WorkerExit> supervise(std::vector<WorkerJob> jobs) {
  ignore_sigpipe_once();
  std::vector<WorkerExit> exits(jobs.size());
  std::vector<Running> running(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!spawn(jobs[i], running[i], exits[i])) running[i].reaped = true;
  }

  while (true) {
    std::vector<pollfd> fds;
    std::vector<std::size_t> owners;
    bool pending = false;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (running[i].out_fd >= 0) {
        fds.push_back({running[i].out_fd, POLLIN, 0});
        owners.push_back(i);
      }
      pending = pending || !running[i].reaped || running[i].out_fd >= 0;
    }
    if (!pending) break;

    poll(fds.data(), fds.size(), 50);
    for (std::size_t f = 0; f < fds.size(); ++f) {
      if (fds[f].revents == 0) continue;
      const std::size_t i = owners[f];
      if (!drain(jobs[i], running[i], exits[i])) close_out(running[i]);
    }

    const auto now = SteadyClock::now();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      Running& r = running[i];
      if (r.reaped) continue;
      int status = 0;
      const pid_t w = waitpid(r.pid, &status, WNOHANG);
      if (w == r.pid) {
        record_status(r, exits[i], status);
        if (r.out_fd >= 0 && !drain(jobs[i], r, exits[i])) close_out(r);
        // A grandchild may still hold the pipe open; do not wait for it.
        close_out(r);
        continue;
      }
      if (!exits[i].terminated && now >= r.term_at) {
        kill(r.pid, SIGTERM);
        exits[i].terminated = true;
      }
      if (!exits[i].killed && now >= r.kill_at) {
        kill(r.pid, SIGKILL);
        exits[i].killed = true;
      }
    }
  }
  return exits;
}

}  // namespace ens2
