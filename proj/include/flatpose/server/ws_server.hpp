#pragma once

// WebSocket pose service plus static model files over plain HTTP on the
// same port: GET /models/<file> serves the exported model directory
// (model_edges.json for overlay clients).

#include "flatpose/core/error.hpp"
#include "flatpose/estimator/types.hpp"
#include "flatpose/server/protocol.hpp"
#include "flatpose/server/session.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace flatpose::server {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct ServerConfig {
    std::string bind = "127.0.0.1:8765";
    SessionConfig session;
    std::filesystem::path models_dir;  // empty: no static files
    unsigned io_threads = 1;
    unsigned worker_threads = 0;  // 0 = hardware concurrency

    void validate() const {
        session.validate();
        if (io_threads < 1) throw InvalidArgument("io_threads must be >= 1");
        if (!models_dir.empty() && !std::filesystem::is_directory(models_dir))
            throw InvalidArgument("models directory does not exist: " + models_dir.string());
    }
};

/// "host:port"; host may be an IPv4/IPv6 literal or "localhost".
inline tcp::endpoint parse_bind(const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos || colon == 0) throw InvalidArgument("bind address must look like host:port, got '" + bind + "'");
    std::string host = bind.substr(0, colon);
    const std::string port = bind.substr(colon + 1);
    if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    if (host == "localhost") host = "127.0.0.1";
    boost::system::error_code ec;
    const auto addr = net::ip::make_address(host, ec);
    if (ec) throw InvalidArgument("invalid bind host '" + host + "'");
    std::size_t used = 0;
    int p = -1;
    try {
        p = std::stoi(port, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != port.size() || port.empty() || p < 0 || p > 65535) throw InvalidArgument("invalid bind port '" + port + "'");
    return {addr, static_cast<unsigned short>(p)};
}

namespace detail {

struct Shared {
    std::shared_ptr<const estimator::Estimator> estimator;
    SessionConfig session;
    std::filesystem::path models_dir;
    net::thread_pool* workers = nullptr;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
public:
    WsSession(tcp::socket&& socket, const Shared& shared)
        : ws_(std::move(socket)), timer_(ws_.get_executor()), shared_(shared), core_(shared.session),
          start_(std::chrono::steady_clock::now()) {}

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.read_message_max(64 * 1024 * 1024);
        ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
    }

    /// Thread-safe; ends the session with a close frame.
    void close() {
        net::post(ws_.get_executor(), [self = shared_from_this()] {
            if (self->closed_) return;
            self->closed_ = true;
            self->timer_.cancel();
            self->ws_.async_close(websocket::close_code::going_away, [self](beast::error_code) {});
        });
    }

    /// Closes the socket directly; only safe once the io threads are joined.
    void force_close() {
        beast::error_code ignored;
        beast::get_lowest_layer(ws_).socket().close(ignored);
    }

private:
    double now_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

    void on_accept(beast::error_code ec) {
        if (ec) return;
        do_read();
    }

    void do_read() { ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this())); }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            closed_ = true;
            timer_.cancel();
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        if (!ws_.got_text()) {
            send(error_json(std::nullopt, codes::kMalformed, "binary messages are not supported"));
        } else {
            for (auto& reply : core_.on_text(text, now_ms())) send(std::move(reply));
        }
        pump();
        do_read();
    }

    // Dispatches the pending frame if the scheduler allows, else arms a timer.
    void pump() {
        if (closed_) return;
        auto& sched = core_.scheduler();
        if (auto job = sched.take(now_ms())) {
            auto self = shared_from_this();
            net::post(*shared_.workers, [self, job = std::move(*job)] {
                std::string out = self->core_.run(*self->shared_.estimator, job, [self] { return self->now_ms(); });
                net::post(self->ws_.get_executor(), [self, out = std::move(out)]() mutable {
                    self->core_.scheduler().complete();
                    self->send(std::move(out));
                    self->pump();
                });
            });
        } else if (!sched.busy() && sched.has_pending()) {
            const double wait = std::max(0.0, sched.next_slot_ms() - now_ms());
            timer_.expires_after(std::chrono::microseconds(static_cast<long long>(wait * 1000.0) + 1));
            timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
                if (!ec) self->pump();
            });
        }
    }

    void send(std::string msg) {
        if (closed_) return;
        queue_.push_back(std::move(msg));
        if (queue_.size() == 1) do_write();
    }

    void do_write() {
        ws_.text(true);
        ws_.async_write(net::buffer(queue_.front()), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (ec) {
            queue_.clear();
            return;
        }
        queue_.pop_front();
        if (!queue_.empty() && !closed_) do_write();
    }

    websocket::stream<beast::tcp_stream> ws_;
    net::steady_timer timer_;
    const Shared& shared_;
    SessionCore core_;
    std::chrono::steady_clock::time_point start_;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    bool closed_ = false;
};

inline std::string mime_type(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext == ".json") return "application/json";
    if (ext == ".ply") return "application/octet-stream";
    if (ext == ".png") return "image/png";
    return "application/octet-stream";
}

/// Reads one HTTP request; upgrades to a WebSocket session or serves a file.
class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    using Registry = std::function<void(const std::shared_ptr<WsSession>&)>;

    HttpSession(tcp::socket&& socket, const Shared& shared, Registry reg)
        : stream_(std::move(socket)), shared_(shared), register_(std::move(reg)) {}

    void run() {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

private:
    void on_read(beast::error_code ec, std::size_t) {
        if (ec) return;
        if (websocket::is_upgrade(req_)) {
            stream_.expires_never();
            auto ws = std::make_shared<WsSession>(stream_.release_socket(), shared_);
            register_(ws);
            ws->run(std::move(req_));
            return;
        }
        auto res = std::make_shared<http::response<http::string_body>>(respond());
        http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
            beast::error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    http::response<http::string_body> respond() const {
        http::response<http::string_body> res;
        res.version(req_.version());
        res.keep_alive(false);
        res.set(http::field::server, "flatpose");
        res.set(http::field::access_control_allow_origin, "*");
        const auto fail = [&](http::status s, const std::string& msg) {
            res.result(s);
            res.set(http::field::content_type, "text/plain");
            res.body() = msg + "\n";
            res.prepare_payload();
            return res;
        };
        if (req_.method() != http::verb::get && req_.method() != http::verb::head)
            return fail(http::status::method_not_allowed, "only GET is supported");
        const std::string target(req_.target());
        const std::string prefix = "/models/";
        if (shared_.models_dir.empty() || target.rfind(prefix, 0) != 0) return fail(http::status::not_found, "not found");
        const std::string name = target.substr(prefix.size());
        // flat directory: plain file names only
        if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos || name[0] == '.')
            return fail(http::status::not_found, "not found");
        const auto path = shared_.models_dir / name;
        if (!std::filesystem::is_regular_file(path)) return fail(http::status::not_found, "not found");
        std::string body;
        try {
            body = read_text_file(path);
        } catch (const Error&) {
            return fail(http::status::internal_server_error, "cannot read file");
        }
        res.result(http::status::ok);
        res.set(http::field::content_type, mime_type(path));
        if (req_.method() == http::verb::head) {
            res.content_length(body.size());
        } else {
            res.body() = std::move(body);
            res.prepare_payload();
        }
        return res;
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    const Shared& shared_;
    Registry register_;
};

}  // namespace detail

/**
 * Accepts any number of clients, each with its own session state.
 * Estimator calls run on a worker pool: in parallel across sessions,
 * one at a time within a session.
 */
class Server {
public:
    Server(ServerConfig cfg, std::shared_ptr<const estimator::Estimator> est)
        : cfg_((cfg.validate(), std::move(cfg))),
          workers_(cfg_.worker_threads ? cfg_.worker_threads : std::max(1u, std::thread::hardware_concurrency())),
          acceptor_(net::make_strand(ioc_)) {
        if (!est) throw InvalidArgument("server needs an estimator");
        shared_.estimator = std::move(est);
        shared_.session = cfg_.session;
        shared_.models_dir = cfg_.models_dir;
        shared_.workers = &workers_;
    }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    ~Server() { stop(); }

    /// Binds and starts serving in background threads.
    void start() {
        const auto ep = parse_bind(cfg_.bind);
        beast::error_code ec;
        acceptor_.open(ep.protocol(), ec);
        if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
        if (!ec) acceptor_.bind(ep, ec);
        if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
        if (ec) throw IoError("cannot bind " + cfg_.bind + ": " + ec.message());
        endpoint_ = acceptor_.local_endpoint();
        do_accept();
        for (unsigned i = 0; i < cfg_.io_threads; ++i) threads_.emplace_back([this] { ioc_.run(); });
        running_ = true;
    }

    tcp::endpoint endpoint() const { return endpoint_; }

    std::size_t session_count() {
        std::lock_guard lock(mu_);
        std::size_t n = 0;
        for (auto& w : sessions_) n += !w.expired();
        return n;
    }

    /// Closes every session, lets in-flight estimates finish and joins all
    /// threads. Idempotent.
    void stop() {
        if (!running_.exchange(false)) return;
        net::post(acceptor_.get_executor(), [this] {
            beast::error_code ignored;
            acceptor_.close(ignored);
        });
        {
            std::lock_guard lock(mu_);
            for (auto& w : sessions_)
                if (auto s = w.lock()) s->close();
        }
        // give close frames a moment to go out
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(300);
        while (session_count() > 0 && std::chrono::steady_clock::now() < deadline)
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        ioc_.stop();
        for (auto& t : threads_) t.join();
        threads_.clear();
        workers_.stop();
        workers_.join();
        // sessions still referenced by abandoned handlers keep their sockets open
        std::lock_guard lock(mu_);
        for (auto& w : sessions_)
            if (auto s = w.lock()) s->force_close();
        sessions_.clear();
    }

private:
    void do_accept() {
        acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;  // closed by stop()
            std::make_shared<detail::HttpSession>(std::move(socket), shared_, [this](const std::shared_ptr<detail::WsSession>& s) {
                std::lock_guard lock(mu_);
                std::erase_if(sessions_, [](const auto& w) { return w.expired(); });
                sessions_.push_back(s);
            })->run();
            do_accept();
        });
    }

    ServerConfig cfg_;
    net::io_context ioc_;
    net::thread_pool workers_;
    tcp::acceptor acceptor_;
    tcp::endpoint endpoint_;
    detail::Shared shared_;
    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::vector<std::weak_ptr<detail::WsSession>> sessions_;
    std::atomic<bool> running_{false};
};

}  // namespace flatpose::server
