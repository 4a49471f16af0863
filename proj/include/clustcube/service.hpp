#pragma once

// JSON-over-HTTP front end for Engine. Every route lives under /api; every
// response body is a JSON object carrying `engine_version` and the `snapshot`
// it was computed against.

#include <chrono>
#include <map>
#include <mutex>
#include <random>
#include <string>

// engine.hpp (and Eigen) must precede httplib.h: <resolv.h> defines a `_res` macro
#include "clustcube/engine.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace clustcube {

class Unauthorized : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string random_token(std::size_t bytes = 16) {
  std::random_device rd;
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < bytes; ++i) {
    auto b = static_cast<unsigned>(rd() & 0xffu);
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

class Service {
 public:
  using Clock = std::chrono::system_clock;

  Service(Engine& engine, std::string auth_token, std::chrono::seconds session_ttl = std::chrono::hours(8))
      : engine_(engine), auth_token_(std::move(auth_token)), ttl_(session_ttl) {
    routes();
  }

  httplib::Server& server() { return server_; }
  const std::string& auth_token() const { return auth_token_; }

 private:
  using json = nlohmann::ordered_json;

  void reply(httplib::Response& res, int status, json body, std::uint64_t snapshot) {
    json out;
    out["engine_version"] = kEngineVersion;
    out["snapshot"] = snapshot;
    for (auto& [k, v] : body.items()) out[k] = std::move(v);
    res.status = status;
    res.set_content(out.dump(), "application/json");
  }

  template <class Fn>
  httplib::Server::Handler guarded(bool needs_session, Fn fn) {
    return [this, needs_session, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        if (needs_session) authorize(req);
        fn(req, res);
      } catch (const Unauthorized& e) {
        error(res, 401, e.what());
      } catch (const nlohmann::json::exception& e) {
        error(res, 400, std::string("malformed request: ") + e.what());
      } catch (const Error& e) {
        switch (e.kind()) {
          case Error::Kind::kSyntax: error(res, 400, e.what()); break;
          case Error::Kind::kReference: error(res, 404, e.what()); break;
          case Error::Kind::kConflict: error(res, 409, e.what()); break;
          default: error(res, 422, e.what());
        }
      } catch (const std::exception& e) {
        error(res, 500, e.what());
      }
    };
  }

  void error(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, json{{"error", message}}, engine_.snapshot()->id);
  }

  void authorize(const httplib::Request& req) {
    auto header = req.get_header_value("Authorization");
    constexpr std::string_view kBearer = "Bearer ";
    if (header.rfind(kBearer, 0) != 0) throw Unauthorized("missing bearer token");
    std::string session = header.substr(kBearer.size());
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(session);
    if (it == sessions_.end() || it->second < Clock::now()) throw Unauthorized("invalid or expired session");
  }

  static json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json j = json::parse(req.body);
    if (!j.is_object()) throw SyntaxError("request body must be a JSON object", 0);
    return j;
  }

  static bool wait_flag(const httplib::Request& req, const json& body) {
    if (req.has_param("wait")) return req.get_param_value("wait") != "false";
    return body.value("wait", true);
  }

  void routes() {
    server_.Post("/api/login", guarded(false, [this](const httplib::Request& req, httplib::Response& res) {
      json body = body_of(req);
      if (body.value("token", std::string()) != auth_token_) throw Unauthorized("bad credentials");
      std::string session = random_token();
      auto expires = Clock::now() + ttl_;
      {
        std::lock_guard lock(sessions_mutex_);
        sessions_[session] = expires;
      }
      auto secs = std::chrono::duration_cast<std::chrono::seconds>(expires.time_since_epoch()).count();
      reply(res, 200, json{{"session", session}, {"expires", secs}}, engine_.snapshot()->id);
    }));

    server_.Get("/api/tree", guarded(true, [this](const httplib::Request&, httplib::Response& res) {
      auto id = engine_.snapshot()->id;
      reply(res, 200, json{{"tree", engine_.tree()}}, id);
    }));

    server_.Get("/api/cuboids", guarded(true, [this](const httplib::Request&, httplib::Response& res) {
      auto id = engine_.snapshot()->id;
      reply(res, 200, json{{"cuboids", engine_.cuboids()}}, id);
    }));

    server_.Post(R"(/api/cuboids/([^/]+)/build)", guarded(true, [this](const httplib::Request& req, httplib::Response& res) {
      json body = body_of(req);
      std::string name = req.matches[1];
      CubeConfig config;
      auto preset = tourism::find_preset(name);
      config.k = body.value("k", preset ? preset->default_k : config.k);
      config.seed = body.value("seed", config.seed);
      config.min_cell_size = body.value("min_cell_size", config.min_cell_size);
      config.lambda = body.value("lambda", config.lambda);
      if (body.contains("target")) config.target = body.at("target").get<std::string>();
      std::optional<std::string> at, codq;
      if (body.contains("at")) at = body.at("at").get<std::string>();
      if (body.contains("codq")) codq = body.at("codq").get<std::string>();
      engine_.build(name, config, at, codq, wait_flag(req, body));
      auto snap = engine_.snapshot();
      reply(res, 200, to_json(*snap->cube(name)), snap->id);
    }));

    server_.Get(R"(/api/cuboids/([^/]+)/cells)", guarded(true, [this](const httplib::Request& req, httplib::Response& res) {
      std::string name = req.matches[1];
      auto snap = engine_.snapshot();
      auto cube = snap->cube(name);
      std::vector<std::string> slices;
      for (std::size_t i = 0, n = req.get_param_value_count("slice"); i < n; ++i) {
        slices.push_back(req.get_param_value("slice", i));
      }
      ClustCube view = dice(*cube, parse_slices(slices));
      json out = to_json(view);
      out["name"] = name;
      reply(res, 200, std::move(out), snap->id);
    }));

    server_.Post(R"(/api/cuboids/([^/]+)/cluster)", guarded(true, [this](const httplib::Request& req, httplib::Response& res) {
      json body = body_of(req);
      std::string name = req.matches[1];
      auto k = body.at("k").get<std::size_t>();
      auto seed = body.at("seed").get<std::uint64_t>();
      engine_.cluster(name, k, seed, wait_flag(req, body));
      auto snap = engine_.snapshot();
      reply(res, 200, to_json(*snap->cube(name)), snap->id);
    }));

    server_.Post(R"(/api/cuboids/([^/]+)/regress)", guarded(true, [this](const httplib::Request& req, httplib::Response& res) {
      json body = body_of(req);
      std::string name = req.matches[1];
      engine_.regress(name, body.at("target").get<std::string>(), body.value("lambda", 0.0), wait_flag(req, body));
      auto snap = engine_.snapshot();
      reply(res, 200, to_json(*snap->cube(name)), snap->id);
    }));

    server_.Post(R"(/api/cuboids/([^/]+)/rollup)", guarded(true, [this](const httplib::Request& req, httplib::Response& res) {
      json body = body_of(req);
      std::string name = req.matches[1];
      auto snap = engine_.snapshot();
      auto cube = snap->cube(name);
      ClustCube parent = roll_up(*cube, body.at("dim").get<std::string>(),
                                 parse_recompute_mode(body.value("mode", std::string("merge_stats"))));
      json out = to_json(parent);
      out["name"] = name;
      out["child_cuboid"] = cube->cuboid_name();
      reply(res, 200, std::move(out), snap->id);
    }));

    server_.Get(R"(/api/export/([^/]+))", guarded(true, [this](const httplib::Request& req, httplib::Response& res) {
      std::string name = req.matches[1];
      auto snap = engine_.snapshot();
      reply(res, 200, to_json(*snap->cube(name)), snap->id);
    }));
  }

  Engine& engine_;
  std::string auth_token_;
  std::chrono::seconds ttl_;
  httplib::Server server_;
  std::mutex sessions_mutex_;
  std::map<std::string, Clock::time_point> sessions_;
};

}  // namespace clustcube
