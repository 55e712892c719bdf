// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>

#include "sikv/server.hpp"
#include "sikv/tcp.hpp"

namespace sikv::cli {

namespace exit_code {
inline constexpr int kPass = 0;
inline constexpr int kFail = 1;
inline constexpr int kRuntime = 2;
inline constexpr int kModelViolation = 3;
inline constexpr int kUsage = 64;
inline constexpr int kData = 65;
}  // namespace exit_code

/// Entry point shared by main() and the tests. Reports go to `out`, human
/// messages to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Serves `server` on `address` until stop is requested (SIGINT/SIGTERM) or
/// a debug-model violation aborts it. `on_listening` receives the bound port.
int serve(Server& server, const HostPort& address, std::ostream& err,
          const std::function<void(TcpServer&)>& on_listening = {});

}  // namespace sikv::cli
