// SPDX-License-Identifier: Apache-2.0
#pragma once

// TCP transport: LF-delimited UTF-8 lines in the protocol.hpp encoding, one
// request line answered by one reply line.

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "sikv/transport.hpp"

namespace sikv {

class Server;

class AddressInUse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HostPort {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Parses "HOST:PORT"; throws std::invalid_argument.
HostPort parse_host_port(const std::string& text);

class TcpChannel final : public Channel {
 public:
  /// Connects immediately; throws TransportError on failure.
  explicit TcpChannel(const HostPort& address);
  ~TcpChannel() override;

  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  Reply call(const Request& request) override;
  /// Sends a raw line and returns the raw reply line (LF included).
  std::string call_raw(const std::string& line);
  void close() override;
  bool is_open() const override { return fd_ >= 0; }

 private:
  std::string read_line();

  int fd_ = -1;
  std::string buffer_;
};

class TcpEndpoint final : public Endpoint {
 public:
  explicit TcpEndpoint(HostPort address) : address_(std::move(address)) {}
  std::unique_ptr<Channel> open() const override;
  std::string describe() const override;

 private:
  HostPort address_;
};

/// Accepts connections and serves each on its own thread; handler execution
/// is serialized by the Server's lock.
class TcpServer {
 public:
  /// Binds and listens; port 0 picks an ephemeral port. Throws AddressInUse
  /// or TransportError.
  TcpServer(Server& server, const HostPort& address);
  ~TcpServer();

  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }

  /// Accept loop; returns after stop().
  void serve();
  /// Runs serve() on a background thread.
  void start();
  /// Asks the accept loop to exit; safe to call from a signal handler.
  void request_stop() { stopping_.store(true); }
  /// Stops accepting, disconnects clients and joins all threads.
  void stop();

  /// Set when a handler raised ModelViolation; the accept loop then exits.
  bool model_violated() const { return model_violated_.load(); }

 private:
  void serve_connection(int fd);

  Server& server_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> model_violated_{false};
  std::thread accept_thread_;
  std::mutex workers_mutex_;
  std::list<std::thread> workers_;
  std::list<int> worker_fds_;
};

}  // namespace sikv
