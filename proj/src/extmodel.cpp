#include "sdpso/extmodel.hpp"

#include <json.hpp>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <iostream>
#include <sstream>
#include <thread>

namespace sdpso {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

int remaining_ms(double deadline) {
  const double left = deadline - now_seconds();
  if (left <= 0.0) return 0;
  return static_cast<int>(std::min(left * 1000.0 + 1.0, 2.0e9));
}

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

std::string format_request(long id, const Vector& x) {
  std::ostringstream ss;
  ss.precision(17);
  ss << R"({"type":"eval","id":)" << id << R"(,"x":[)";
  for (Eigen::Index i = 0; i < x.size(); ++i) ss << (i ? "," : "") << x[i];
  ss << "]}";
  return ss.str();
}

}  // namespace

std::string to_string(ExtModelError::Kind kind) {
  switch (kind) {
    case ExtModelError::Kind::launch: return "launch";
    case ExtModelError::Kind::handshake: return "handshake";
    case ExtModelError::Kind::dimension_mismatch: return "dimension_mismatch";
    case ExtModelError::Kind::timeout: return "timeout";
    case ExtModelError::Kind::protocol: return "protocol";
    case ExtModelError::Kind::child_exited: return "child_exited";
    case ExtModelError::Kind::aborted: return "aborted";
    case ExtModelError::Kind::closed: return "closed";
  }
  return "unknown";
}

ModelEndpoint::ModelEndpoint(EndpointSpec spec) : spec_(std::move(spec)) {
  if (spec_.command.empty()) throw ExtModelError(ExtModelError::Kind::launch, "extmodel: empty command");
  if (spec_.bounds.dim() != spec_.dim) throw ConfigError("extmodel: bounds dimension must equal dim");

  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw ExtModelError(ExtModelError::Kind::launch, std::string("extmodel: socketpair: ") + std::strerror(errno));
  }
  int exec_pipe[2];
  if (::pipe2(exec_pipe, O_CLOEXEC) != 0 || ::pipe2(abort_pipe_, O_CLOEXEC) != 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw ExtModelError(ExtModelError::Kind::launch, std::string("extmodel: pipe: ") + std::strerror(errno));
  }

  std::vector<char*> argv;
  for (auto& arg : spec_.command) argv.push_back(arg.data());
  argv.push_back(nullptr);

  pid_ = ::fork();
  if (pid_ < 0) {
    const int err = errno;
    ::close(sv[0]);
    ::close(sv[1]);
    ::close(exec_pipe[0]);
    ::close(exec_pipe[1]);
    throw ExtModelError(ExtModelError::Kind::launch, std::string("extmodel: fork: ") + std::strerror(err));
  }
  if (pid_ == 0) {
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execvp(argv[0], argv.data());
    const int err = errno;
    [[maybe_unused]] auto n = ::write(exec_pipe[1], &err, sizeof err);
    ::_exit(127);
  }

  ::close(sv[1]);
  ::close(exec_pipe[1]);
  fd_ = sv[0];
  int child_errno = 0;
  ssize_t got;
  do {
    got = ::read(exec_pipe[0], &child_errno, sizeof child_errno);
  } while (got < 0 && errno == EINTR);
  ::close(exec_pipe[0]);
  if (got > 0) {
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
    close_fd(fd_);
    close_fd(abort_pipe_[0]);
    close_fd(abort_pipe_[1]);
    state_ = EndpointState::failed;
    throw ExtModelError(ExtModelError::Kind::launch,
                        "extmodel: cannot launch '" + spec_.command[0] + "': " + std::strerror(child_errno));
  }

  try {
    const double deadline = now_seconds() + spec_.timeout;
    send_line(R"({"type":"hello","dim":)" + std::to_string(spec_.dim) + "}", deadline);
    const std::string line = read_line(deadline);
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ExtModelError::Kind::handshake, "extmodel: malformed handshake reply: " + line);
    }
    if (!reply.is_object() || reply.value("type", "") != "ready" || !reply.contains("dim") ||
        !reply["dim"].is_number_integer()) {
      fail(ExtModelError::Kind::handshake, "extmodel: unexpected handshake reply: " + line);
    }
    const int declared = reply["dim"].get<int>();
    if (declared != spec_.dim) {
      fail(ExtModelError::Kind::dimension_mismatch, "extmodel: model declares dim " + std::to_string(declared) +
                                                        ", configuration expects " + std::to_string(spec_.dim));
    }
  } catch (const ExtModelError& e) {
    kill_child();
    close_fd(fd_);
    close_fd(abort_pipe_[0]);
    close_fd(abort_pipe_[1]);
    if (e.kind() == ExtModelError::Kind::dimension_mismatch || e.kind() == ExtModelError::Kind::handshake) throw;
    throw ExtModelError(ExtModelError::Kind::handshake, std::string("extmodel: handshake failed: ") + e.what());
  }
  state_ = EndpointState::ready;
}

ModelEndpoint::~ModelEndpoint() {
  try {
    shutdown();
  } catch (...) {
  }
}

void ModelEndpoint::fail(ExtModelError::Kind kind, const std::string& what) {
  state_ = EndpointState::failed;
  throw ExtModelError(kind, what);
}

void ModelEndpoint::kill_child() {
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }
}

void ModelEndpoint::send_line(const std::string& line, double deadline) {
  std::string data = line + "\n";
  std::size_t sent = 0;
  while (sent < data.size()) {
    pollfd pfd{fd_, POLLOUT, 0};
    const int ready = ::poll(&pfd, 1, remaining_ms(deadline));
    if (ready < 0 && errno == EINTR) continue;
    if (ready == 0) fail(ExtModelError::Kind::timeout, "extmodel: timed out writing request");
    const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      fail(ExtModelError::Kind::child_exited, std::string("extmodel: write failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string ModelEndpoint::read_line(double deadline) {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      return line;
    }
    pollfd pfds[2] = {{fd_, POLLIN, 0}, {abort_pipe_[0], POLLIN, 0}};
    const int ready = ::poll(pfds, 2, remaining_ms(deadline));
    if (ready < 0 && errno == EINTR) continue;
    if (ready < 0) fail(ExtModelError::Kind::protocol, std::string("extmodel: poll: ") + std::strerror(errno));
    if (pfds[1].revents != 0 || aborting_) fail(ExtModelError::Kind::aborted, "extmodel: request aborted by shutdown");
    if (ready == 0) {
      kill_child();
      fail(ExtModelError::Kind::timeout,
           "extmodel: no reply within " + std::to_string(spec_.timeout) + " s; child terminated");
    }
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && (errno == EINTR || errno == EAGAIN)) continue;
    if (n <= 0) fail(ExtModelError::Kind::child_exited, "extmodel: model process closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

double ModelEndpoint::evaluate(const Vector& x, std::string* aux) {
  std::lock_guard lock(io_mutex_);
  if (aborting_ || state_ == EndpointState::closed) throw ExtModelError(ExtModelError::Kind::closed, "extmodel: endpoint closed");
  if (state_ != EndpointState::ready) throw ExtModelError(ExtModelError::Kind::closed, "extmodel: endpoint not ready");
  if (x.size() != spec_.dim) throw ConfigError("extmodel: input has dimension " + std::to_string(x.size()));
  if (!spec_.bounds.contains(x)) throw ConfigError("extmodel: input lies outside the declared bounds");

  const long id = next_id_++;
  const double deadline = now_seconds() + spec_.timeout;
  send_line(format_request(id, x), deadline);
  const std::string line = read_line(deadline);

  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    fail(ExtModelError::Kind::protocol, "extmodel: malformed reply to request " + std::to_string(id) + ": " + line);
  }
  if (!reply.is_object() || reply.value("type", "") != "fitness") {
    fail(ExtModelError::Kind::protocol, "extmodel: unexpected reply to request " + std::to_string(id) + ": " + line);
  }
  if (!reply.contains("id") || !reply["id"].is_number_integer() || reply["id"].get<long>() != id) {
    fail(ExtModelError::Kind::protocol, "extmodel: reply id does not match request " + std::to_string(id));
  }
  if (!reply.contains("value") || !reply["value"].is_number()) {
    fail(ExtModelError::Kind::protocol, "extmodel: reply to request " + std::to_string(id) + " has no numeric value");
  }
  if (aux) *aux = reply.contains("aux") ? reply["aux"].dump() : std::string{};
  return reply["value"].get<double>();
}

void ModelEndpoint::shutdown() {
  std::lock_guard guard(shutdown_mutex_);
  if (state_ == EndpointState::closed) return;
  aborting_ = true;
  if (abort_pipe_[1] >= 0) {
    const char byte = 1;
    [[maybe_unused]] auto n = ::write(abort_pipe_[1], &byte, 1);
  }
  std::lock_guard lock(io_mutex_);

  if (pid_ > 0) {
    if (fd_ >= 0) {
      try {
        send_line(R"({"type":"bye"})", now_seconds() + spec_.shutdown_timeout);
      } catch (const ExtModelError&) {
      }
      ::shutdown(fd_, SHUT_WR);
    }
    const double deadline = now_seconds() + spec_.shutdown_timeout;
    bool exited = false;
    while (now_seconds() < deadline) {
      const pid_t r = ::waitpid(pid_, nullptr, WNOHANG);
      if (r == pid_ || r < 0) {
        exited = true;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (exited) {
      pid_ = -1;
    } else {
      std::cerr << "extmodel: '" << spec_.command[0] << "' (pid " << pid_
                << ") did not exit after bye; sending SIGKILL\n";
      forced_ = true;
      kill_child();
    }
  }
  close_fd(fd_);
  close_fd(abort_pipe_[0]);
  close_fd(abort_pipe_[1]);
  state_ = EndpointState::closed;
}

std::shared_ptr<ModelEndpoint> spawn(EndpointSpec spec) { return std::make_shared<ModelEndpoint>(std::move(spec)); }

double evaluate_remote(ModelEndpoint& endpoint, const Vector& x) { return endpoint.evaluate(x); }

void shutdown(ModelEndpoint& endpoint) { endpoint.shutdown(); }

Objective make_external_objective(std::shared_ptr<ModelEndpoint> endpoint, std::string name) {
  Objective obj;
  obj.name = std::move(name);
  obj.dim = endpoint->spec().dim;
  obj.bounds = endpoint->spec().bounds;
  obj.evaluate = [endpoint](const Vector& x) { return endpoint->evaluate(x); };
  return obj;
}

}  // namespace sdpso
