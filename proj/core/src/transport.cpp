// SPDX-License-Identifier: Apache-2.0
#include "sikv/transport.hpp"

#include "sikv/server.hpp"

namespace sikv {

Reply InProcessChannel::call(const Request& request) {
  if (!open_) throw TransportError("channel is closed");
  return server_->handle(request);
}

std::unique_ptr<Channel> InProcessEndpoint::open() const {
  return std::make_unique<InProcessChannel>(*server_);
}

}  // namespace sikv
