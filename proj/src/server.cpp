#include "seqchicken/server.hpp"

#include <httplib.h>

#include <sstream>

namespace seqchicken {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

// Maps library exceptions onto status codes.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const UnknownSessionError& e) {
    send_error(res, 404, e.what());
  } catch (const SequencingError& e) {
    send_error(res, 409, e.what());
  } catch (const ConcurrentSubmitError& e) {
    send_error(res, 409, e.what());
  } catch (const SessionFinishedError& e) {
    send_error(res, 409, e.what());
  } catch (const ValidationError& e) {
    send_error(res, 400, e.what());
  } catch (const ParseError& e) {
    send_error(res, 400, e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, std::string("malformed JSON: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.find_first_not_of(" \t\r\n") == std::string::npos) return nlohmann::json::object();
  return nlohmann::json::parse(req.body);
}

}  // namespace

HttpServer::HttpServer(SessionStore& store)
    : store_(store), http_(std::make_unique<httplib::Server>()) {
  auto& http = *http_;
  http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  http.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const SessionConfig config = session_config_from_json(parse_body(req));
      const std::string id = store_.create_session(config);
      send_json(res, 201, to_json(store_.session_state(id)));
    });
  });

  http.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, to_json(store_.session_state(req.matches[1]))); });
  });

  http.Post(R"(/sessions/([^/]+)/actions)", [this](const httplib::Request& req,
                                                  httplib::Response& res) {
    guarded(res, [&] {
      const nlohmann::json body = parse_body(req);
      const auto a = body.find("action");
      if (a == body.end() || !a->is_string()) {
        throw ValidationError("field 'action' must be \"SLOW\" or \"FAST\"");
      }
      Action action;
      try {
        action = parse_action(a->get<std::string>());
      } catch (const Error&) {
        throw ValidationError("field 'action' must be \"SLOW\" or \"FAST\"");
      }
      std::optional<int> turn;
      if (const auto t = body.find("turn"); t != body.end() && !t->is_null()) {
        if (!t->is_number_integer()) throw ValidationError("field 'turn' must be an integer");
        turn = t->get<int>();
      }
      send_json(res, 200, to_json(store_.submit_action(req.matches[1], action, turn)));
    });
  });

  http.Get("/export", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::vector<std::string> ids;
      if (req.has_param("session")) {
        std::istringstream list(req.get_param_value("session"));
        std::string id;
        while (std::getline(list, id, ',')) {
          if (!id.empty()) ids.push_back(id);
        }
      }
      res.set_content(store_.export_sessions(ids), "application/x-ndjson");
    });
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

bool HttpServer::listen() { return http_->listen_after_bind(); }

void HttpServer::stop() {
  if (http_) http_->stop();
}

}  // namespace seqchicken
