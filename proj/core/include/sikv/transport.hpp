// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reliable, in-order, exactly-once request/response channels between a client
// proxy and the server.

#include <memory>
#include <stdexcept>
#include <string>

#include "sikv/protocol.hpp"

namespace sikv {

class Server;

/// The channel failed or was closed. Distinct from ErrorResponse, which is
/// the server rejecting a well-delivered request.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Channel {
 public:
  virtual ~Channel() = default;

  /// Exactly one reply per request, in request order.
  virtual Reply call(const Request& request) = 0;
  virtual void close() = 0;
  virtual bool is_open() const = 0;
};

/// Something a client can (repeatedly) try to open a channel to.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  /// Throws TransportError when the server is unreachable.
  virtual std::unique_ptr<Channel> open() const = 0;
  virtual std::string describe() const = 0;
};

/// Direct calls into a Server living in the same process. Used by the
/// deterministic harness.
class InProcessChannel final : public Channel {
 public:
  explicit InProcessChannel(Server& server) : server_(&server) {}

  Reply call(const Request& request) override;
  void close() override { open_ = false; }
  bool is_open() const override { return open_; }

 private:
  Server* server_;
  bool open_ = true;
};

class InProcessEndpoint final : public Endpoint {
 public:
  explicit InProcessEndpoint(Server& server) : server_(&server) {}
  std::unique_ptr<Channel> open() const override;
  std::string describe() const override { return "in-process"; }

 private:
  Server* server_;
};

}  // namespace sikv
