#include "ohprl/serve.hpp"

#include <atomic>
#include <deque>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "ohprl/protocol.hpp"

namespace ohprl {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

struct Shared {
    const LiveState& live;
    OverrideMailbox& mailbox;
    EnvParams env;
    std::chrono::nanoseconds period;
    std::atomic<std::uint64_t> rejected{0};
};

class Session : public std::enable_shared_from_this<Session> {
public:
    Session(tcp::socket socket, Shared& shared)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), shared_(shared) {}

    void run() {
        ws_.text(true);
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->read();
            self->tick();
        });
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                self->timer_.cancel();
                return;
            }
            const std::string text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            if (auto error = dispatch_inbound(parse_inbound(text), self->shared_.mailbox)) {
                self->shared_.rejected.fetch_add(1);
                self->send(error->dump());
            }
            self->read();
        });
    }

    void tick() {
        if (closed_) return;
        const LiveFrame frame = shared_.live.frame();
        if (!sent_any_ || frame.sequence != last_sequence_) {
            send(frame_message(frame, shared_.env).dump());
            last_sequence_ = frame.sequence;
            sent_any_ = true;
        }
        const auto [row, count] = shared_.live.metrics();
        if (count != last_metrics_ && !row.empty()) {
            send(metrics_message(row).dump());
            last_metrics_ = count;
        }
        timer_.expires_after(shared_.period);
        timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
            if (!ec) self->tick();
        });
    }

    void send(std::string message) {
        queue_.push_back(std::move(message));
        if (queue_.size() == 1) write();
    }

    void write() {
        ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->closed_ = true;
                self->timer_.cancel();
                return;
            }
            self->queue_.pop_front();
            if (!self->queue_.empty()) self->write();
        });
    }

    websocket::stream<tcp::socket> ws_;
    asio::steady_timer timer_;
    Shared& shared_;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    std::uint64_t last_sequence_ = 0;
    std::uint64_t last_metrics_ = 0;
    bool sent_any_ = false;
    bool closed_ = false;
};

}  // namespace

struct ConsoleServer::Impl {
    ServeOptions options;
    Shared shared;
    asio::io_context io{1};
    tcp::acceptor acceptor{io};
    std::thread thread;
    int bound_port = 0;

    Impl(ServeOptions opts, const LiveState& live, OverrideMailbox& mailbox, EnvParams env)
        : options(std::move(opts)),
          shared{live, mailbox, env,
                 std::chrono::duration_cast<std::chrono::nanoseconds>(
                     std::chrono::duration<double>(1.0 / options.frame_rate))} {}

    void accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<Session>(std::move(socket), shared)->run();
            accept();
        });
    }
};

ConsoleServer::ConsoleServer(ServeOptions options, const LiveState& live, OverrideMailbox& mailbox, EnvParams env) {
    if (!(options.frame_rate > 0.0)) throw ConfigError("serve.frame_rate must be positive");
    impl_ = std::make_unique<Impl>(std::move(options), live, mailbox, env);
}

ConsoleServer::~ConsoleServer() { stop(); }

void ConsoleServer::start() {
    const tcp::endpoint endpoint(asio::ip::make_address(impl_->options.bind),
                                 static_cast<unsigned short>(impl_->options.port));
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen();
    impl_->bound_port = impl_->acceptor.local_endpoint().port();
    impl_->accept();
    impl_->thread = std::thread([this] { impl_->io.run(); });
}

void ConsoleServer::stop() {
    if (!impl_ || !impl_->thread.joinable()) return;
    impl_->io.stop();
    impl_->thread.join();
}

int ConsoleServer::port() const { return impl_->bound_port; }

std::uint64_t ConsoleServer::rejected_messages() const { return impl_->shared.rejected.load(); }

}  // namespace ohprl
