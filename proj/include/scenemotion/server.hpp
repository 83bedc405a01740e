// Copyright 2026 The scenemotion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Session service speaking newline-delimited JSON over TCP. The protocol
// logic (SessionService) is independent of sockets; SessionServer adds one
// thread per connection and wall-clock frame pacing.

#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "scenemotion/error.hpp"
#include "scenemotion/runtime.hpp"

namespace scenemotion {

/// Per-connection protocol state.
struct Connection {
  std::optional<Session> session;
  bool paused = false;
  SessionStatus reported = SessionStatus::Navigating;
};

class SessionService {
 public:
  SessionService(Scene scene, Models models, SessionOptions defaults = {})
      : scene_(std::move(scene)), models_(models), defaults_(defaults) {}

  const Scene& scene() const { return scene_; }

  static nlohmann::json error(const std::string& message, const std::string& code = "BadMessage") {
    return {{"type", "error"}, {"code", code}, {"message", message}};
  }

  /// Replies to one client line. Never throws; problems become error replies.
  std::vector<nlohmann::json> handle(const std::string& line, Connection& conn) const {
    nlohmann::json msg;
    try {
      msg = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      return {error(std::string("malformed JSON: ") + e.what())};
    }
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
      return {error("message needs a string 'type'")};
    }
    const std::string type = msg["type"];
    try {
      if (type == "hello") return {sceneMessage()};
      if (type == "start") return start(msg, conn);
      if (type == "resample") {
        if (!conn.session) return {error("no active session", "NoSession")};
        resampleStyle(*conn.session, msg.at("seed").get<std::uint64_t>(), msg.value("goal", false));
        conn.reported = conn.session->status;
        return {statusMessage(conn)};
      }
      if (type == "pause" || type == "resume") {
        conn.paused = type == "pause";
        return {statusMessage(conn)};
      }
      return {error("unknown message type '" + type + "'")};
    } catch (const Error& e) {
      return {error(e.what(), std::string(errcName(e.code())))};
    } catch (const nlohmann::json::exception& e) {
      return {error(std::string("bad field: ") + e.what())};
    }
  }

  /// Advances the connection's session by one frame when it is running.
  std::vector<nlohmann::json> tick(Connection& conn) const {
    if (!running(conn)) return {};
    std::vector<nlohmann::json> out;
    try {
      out.push_back(frameEventJson(step(*conn.session)));
    } catch (const Error& e) {
      conn.session->status = SessionStatus::Failed;
      out.push_back(error(e.what(), std::string(errcName(e.code()))));
    }
    if (conn.session->status != conn.reported) {
      conn.reported = conn.session->status;
      out.push_back(statusMessage(conn));
    }
    return out;
  }

  static bool running(const Connection& conn) {
    return conn.session && !conn.paused && conn.session->status != SessionStatus::Done &&
           conn.session->status != SessionStatus::Failed;
  }

  nlohmann::json sceneMessage() const {
    const StateConfig cfg = models_.motion ? models_.motion->config.state : StateConfig::tiny();
    return {{"type", "scene"}, {"scene", sceneToJson(scene_)}, {"skeleton", skeletonToJson(skeletonFor(cfg))},
            {"fps", cfg.fps}};
  }

 private:
  std::vector<nlohmann::json> start(const nlohmann::json& msg, Connection& conn) const {
    const auto id = msg.at("objectId").get<std::string>();
    const auto name = msg.at("action").get<std::string>();
    const auto action = parseAction(name);
    if (!action) return {error("unknown action '" + name + "'", "UnsupportedAction")};
    const auto seed = msg.value("seed", std::uint64_t{0});
    SessionOptions opts = defaults_;
    if (msg.contains("start")) opts.start = Vec2(msg["start"].at(0).get<double>(), msg["start"].at(1).get<double>());
    conn.session = startSession(scene_, id, *action, seed, models_, opts);
    conn.paused = false;
    conn.reported = conn.session->status;
    return {statusMessage(conn)};
  }

  static nlohmann::json statusMessage(const Connection& conn) {
    nlohmann::json j = {{"type", "status"}, {"paused", conn.paused}};
    if (!conn.session) {
      j["status"] = "idle";
      return j;
    }
    const Session& s = *conn.session;
    j["status"] = statusName(s.status);
    j["objectId"] = s.objectId;
    j["action"] = std::string(actionName(s.action));
    j["frame"] = s.frame;
    j["goal"] = goalJson(s.goal);
    j["path"] = pathToJson(s.path);
    return j;
  }

  Scene scene_;
  Models models_;
  SessionOptions defaults_;
};

/// TCP front end: one thread per connection, frames paced at the state fps.
class SessionServer {
 public:
  explicit SessionServer(const SessionService& service) : service_(service) {}
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;
  ~SessionServer() { stop(); }

  /// Binds and listens; port 0 picks a free port. Returns the bound port.
  int listen(const std::string& host, int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw Error(Errc::Io, "socket() failed");
    const int yes = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      throw Error(Errc::InvalidConfig, "bad bind address '" + host + "'");
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 16) != 0) {
      throw Error(Errc::Io, "cannot listen on " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    return port_;
  }

  int port() const { return port_; }

  /// Accepts connections until stop() is called.
  void serve() {
    while (!stopping_) {
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, 100) <= 0) continue;
      const int client = ::accept(fd_, nullptr, nullptr);
      if (client < 0) continue;
      std::lock_guard<std::mutex> lock(mu_);
      clients_.push_back(client);
      threads_.emplace_back([this, client] { session(client); });
    }
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (int c : clients_) ::shutdown(c, SHUT_RDWR);
    }
    for (auto& t : threads_)
      if (t.joinable()) t.join();
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  static bool sendLine(int fd, const nlohmann::json& j) {
    const std::string s = j.dump() + "\n";
    std::size_t off = 0;
    while (off < s.size()) {
      const ssize_t n = ::send(fd, s.data() + off, s.size() - off, MSG_NOSIGNAL);
      if (n <= 0) return false;
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  void session(int fd) {
    using Clock = std::chrono::steady_clock;
    Connection conn;
    std::string buffer;
    const double fps = service_.sceneMessage().at("fps").get<double>();
    const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / fps));
    auto nextFrame = Clock::now();
    bool open = true;
    while (open && !stopping_) {
      int wait = 100;
      if (SessionService::running(conn)) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(nextFrame - Clock::now()).count();
        wait = static_cast<int>(std::max<long long>(0, left));
      }
      pollfd p{fd, POLLIN, 0};
      const int ready = ::poll(&p, 1, wait);
      if (ready > 0) {
        char chunk[4096];
        const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        for (auto pos = buffer.find('\n'); pos != std::string::npos; pos = buffer.find('\n')) {
          const std::string line = buffer.substr(0, pos);
          buffer.erase(0, pos + 1);
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          const bool wasRunning = SessionService::running(conn);
          for (const auto& reply : service_.handle(line, conn)) open = open && sendLine(fd, reply);
          if (!wasRunning && SessionService::running(conn)) nextFrame = Clock::now();
        }
      }
      if (SessionService::running(conn) && Clock::now() >= nextFrame) {
        for (const auto& msg : service_.tick(conn)) open = open && sendLine(fd, msg);
        nextFrame += period;
      }
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      clients_.erase(std::remove(clients_.begin(), clients_.end(), fd), clients_.end());
    }
    ::close(fd);
  }

  const SessionService& service_;
  int fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<int> clients_;
  std::list<std::thread> threads_;
};

}  // namespace scenemotion
