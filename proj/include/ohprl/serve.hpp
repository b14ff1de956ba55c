#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "ohprl/intervention.hpp"
#include "ohprl/runtime.hpp"

namespace ohprl {

struct ServeOptions {
    std::string bind = "127.0.0.1";
    int port = 8765;  // 0 picks a free port
    double frame_rate = 20.0;
};

/// WebSocket endpoint for the console. Pushes frame and metrics messages at
/// the frame rate and forwards override messages to the mailbox. Runs on its
/// own thread and only reads LiveState, so a slow or vanished client never
/// blocks the actor loop.
class ConsoleServer {
public:
    ConsoleServer(ServeOptions options, const LiveState& live, OverrideMailbox& mailbox, EnvParams env);
    ~ConsoleServer();

    ConsoleServer(const ConsoleServer&) = delete;
    ConsoleServer& operator=(const ConsoleServer&) = delete;

    /// Binds and starts serving. Throws std::runtime_error if the address is unusable.
    void start();
    void stop();

    /// The bound port (useful when the options asked for port 0).
    int port() const;

    /// Messages rejected with an error frame since start().
    std::uint64_t rejected_messages() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ohprl
