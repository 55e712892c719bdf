// SPDX-License-Identifier: Apache-2.0
#include "sikv/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include "sikv/server.hpp"

namespace sikv {

namespace {

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

void send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("send"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

// Reads until LF; returns false on orderly EOF with an empty buffer.
bool read_line_from(int fd, std::string& buffer, std::string& line) {
  for (;;) {
    const auto lf = buffer.find('\n');
    if (lf != std::string::npos) {
      line = buffer.substr(0, lf + 1);
      buffer.erase(0, lf + 1);
      return true;
    }
    char chunk[4096];
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n == 0) {
      if (!buffer.empty()) throw TransportError("connection closed mid-line");
      return false;
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("recv"));
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

sockaddr_in resolve(const HostPort& address) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const int rc = ::getaddrinfo(address.host.c_str(), nullptr, &hints, &result);
  if (rc != 0 || result == nullptr) {
    throw TransportError("cannot resolve '" + address.host + "': " + ::gai_strerror(rc));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, result->ai_addr, sizeof addr);
  ::freeaddrinfo(result);
  addr.sin_port = htons(address.port);
  return addr;
}

}  // namespace

HostPort parse_host_port(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw std::invalid_argument("expected HOST:PORT, got '" + text + "'");
  }
  const std::string port_text = text.substr(colon + 1);
  std::size_t used = 0;
  unsigned long port = 0;
  try {
    port = std::stoul(port_text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid port '" + port_text + "'");
  }
  if (used != port_text.size() || port > 65535) {
    throw std::invalid_argument("invalid port '" + port_text + "'");
  }
  return {text.substr(0, colon), static_cast<std::uint16_t>(port)};
}

TcpChannel::TcpChannel(const HostPort& address) {
  const sockaddr_in addr = resolve(address);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError(errno_text("socket"));
  if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string message = errno_text("connect");
    ::close(fd_);
    fd_ = -1;
    throw TransportError(message);
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpChannel::~TcpChannel() { close(); }

void TcpChannel::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::string TcpChannel::read_line() {
  std::string line;
  if (!read_line_from(fd_, buffer_, line)) {
    close();
    throw TransportError("server closed the connection");
  }
  return line;
}

std::string TcpChannel::call_raw(const std::string& line) {
  if (fd_ < 0) throw TransportError("channel is closed");
  send_all(fd_, line);
  return read_line();
}

Reply TcpChannel::call(const Request& request) {
  const std::string line = call_raw(encode(request));
  try {
    return decode_reply(line);
  } catch (const DecodeError& e) {
    throw TransportError(std::string("undecodable reply: ") + e.what());
  }
}

std::unique_ptr<Channel> TcpEndpoint::open() const {
  return std::make_unique<TcpChannel>(address_);
}

std::string TcpEndpoint::describe() const {
  return address_.host + ":" + std::to_string(address_.port);
}

TcpServer::TcpServer(Server& server, const HostPort& address) : server_(server) {
  const sockaddr_in addr = resolve(address);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError(errno_text("socket"));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    const int err = errno;
    const std::string message = errno_text("bind");
    ::close(listen_fd_);
    listen_fd_ = -1;
    if (err == EADDRINUSE) throw AddressInUse(message);
    throw TransportError(message);
  }
  if (::listen(listen_fd_, 64) != 0) {
    const std::string message = errno_text("listen");
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw TransportError(message);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpServer::~TcpServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::start() {
  accept_thread_ = std::thread([this] { serve(); });
}

void TcpServer::serve() {
  while (!stopping_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 100);
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (ready == 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(workers_mutex_);
    worker_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void TcpServer::serve_connection(int fd) {
  std::string buffer;
  std::string line;
  try {
    while (!stopping_.load() && read_line_from(fd, buffer, line)) {
      Reply reply;
      try {
        reply = server_.handle(decode_request(line));
      } catch (const DecodeError& e) {
        reply = {ErrorResponse{std::string(error_code::kMalformed), e.what()}, 0};
      } catch (const ModelViolation&) {
        model_violated_.store(true);
        stopping_.store(true);
        break;
      }
      send_all(fd, encode(reply));
    }
  } catch (const TransportError&) {
    // Peer went away; nothing to answer.
  }
  std::lock_guard lock(workers_mutex_);
  worker_fds_.remove(fd);
  ::close(fd);
}

void TcpServer::stop() {
  stopping_.store(true);
  if (accept_thread_.joinable()) accept_thread_.join();
  std::list<std::thread> workers;
  {
    std::lock_guard lock(workers_mutex_);
    for (int fd : worker_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& worker : workers) {
    if (worker.joinable()) worker.join();
  }
}

}  // namespace sikv
