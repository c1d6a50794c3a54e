#pragma once

// Child-process bridge to expensive external models. Messages are single-line
// JSON objects on the child's stdin/stdout:
//
//   {"type":"hello","dim":D}            -> {"type":"ready","dim":D}
//   {"type":"eval","id":n,"x":[...]}    -> {"type":"fitness","id":n,"value":f[,"aux":{...}]}
//   {"type":"bye"}                      -> child exits 0
//
// Requests are strictly sequential; ids increase by one per request.

#include "sdpso/domain.hpp"
#include "sdpso/objectives.hpp"

#include <sys/types.h>

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace sdpso {

class ExtModelError : public EvaluationError {
 public:
  enum class Kind { launch, handshake, dimension_mismatch, timeout, protocol, child_exited, aborted, closed };

  ExtModelError(Kind kind, const std::string& what) : EvaluationError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string to_string(ExtModelError::Kind kind);

enum class EndpointState { spawned, ready, failed, closed };

struct EndpointSpec {
  std::vector<std::string> command;  ///< argv; command[0] is resolved through PATH
  int dim = 0;
  Bounds bounds;
  double timeout = 300.0;           ///< per request, seconds
  double shutdown_timeout = 5.0;    ///< grace period before SIGKILL
};

class ModelEndpoint {
 public:
  /// Launches the child and completes the handshake. Throws ExtModelError
  /// (launch, handshake or dimension_mismatch); the child is reaped on failure.
  explicit ModelEndpoint(EndpointSpec spec);
  ~ModelEndpoint();

  ModelEndpoint(const ModelEndpoint&) = delete;
  ModelEndpoint& operator=(const ModelEndpoint&) = delete;

  /// Fitness reported by the child for `x`. `aux`, when non-null, receives the
  /// reply's optional "aux" object serialised as JSON text (empty if absent).
  double evaluate(const Vector& x, std::string* aux = nullptr);

  /// Sends bye and reaps the child, force-killing it after the grace period.
  /// A request in flight on another thread is aborted. Idempotent.
  void shutdown();

  EndpointState state() const { return state_.load(); }
  const EndpointSpec& spec() const { return spec_; }
  pid_t pid() const { return pid_; }
  long requests_sent() const { return next_id_ - 1; }
  /// True when the last shutdown had to kill the child.
  bool forced_termination() const { return forced_; }

 private:
  void send_line(const std::string& line, double deadline);
  std::string read_line(double deadline);
  void fail(ExtModelError::Kind kind, const std::string& what);
  void kill_child();

  EndpointSpec spec_;
  pid_t pid_ = -1;
  int fd_ = -1;
  int abort_pipe_[2] = {-1, -1};
  std::string buffer_;
  long next_id_ = 1;
  std::atomic<EndpointState> state_{EndpointState::spawned};
  std::atomic<bool> aborting_{false};
  bool forced_ = false;
  std::mutex io_mutex_;
  std::mutex shutdown_mutex_;
};

std::shared_ptr<ModelEndpoint> spawn(EndpointSpec spec);
double evaluate_remote(ModelEndpoint& endpoint, const Vector& x);
void shutdown(ModelEndpoint& endpoint);

/// Objective backed by `endpoint`. The endpoint stays alive as long as the
/// objective does; only one worker may use it at a time.
Objective make_external_objective(std::shared_ptr<ModelEndpoint> endpoint, std::string name = "external");

}  // namespace sdpso
