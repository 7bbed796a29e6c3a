#pragma once

// JSON-over-HTTP front end for SessionStore.
//
//   POST /sessions                 body: session config (may be empty) -> 201 state
//   GET  /sessions/{id}            -> state
//   POST /sessions/{id}/actions    body: {"action": "SLOW"|"FAST", "turn": n?} -> turn result
//   GET  /export[?session=id,...]  -> crossing records, one JSON object per line
//
// Errors come back as {"error": message} with 400 for invalid input, 404 for an
// unknown session and 409 for out-of-turn, concurrent or finished submissions.

#include <memory>
#include <string>

#include "seqchicken/session.hpp"

namespace httplib {
class Server;
}

namespace seqchicken {

class HttpServer {
 public:
  explicit HttpServer(SessionStore& store);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool listen();
  void stop();

 private:
  SessionStore& store_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace seqchicken
