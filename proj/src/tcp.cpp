#include "msds/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "msds/errors.hpp"
#include "msds/wire.hpp"

namespace msds {

int tcp_connect(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(port);
    if (getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0 || res == nullptr)
        throw TransportError("cannot resolve " + host);

    int fd = -1;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd = socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        close(fd);
        fd = -1;
    }
    freeaddrinfo(res);
    if (fd < 0) throw TransportError("cannot connect to " + host + ":" + port_str);
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
}

void tcp_send_all(int fd, const std::uint8_t* data, std::size_t n) {
    std::size_t sent = 0;
    while (sent < n) {
        ssize_t r = send(fd, data + sent, n - sent, MSG_NOSIGNAL);
        if (r < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("send failed: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(r);
    }
}

std::size_t tcp_recv_some(int fd, std::uint8_t* out, std::size_t cap, bool block) {
    if (!block) {
        pollfd p{fd, POLLIN, 0};
        int ready = poll(&p, 1, 0);
        if (ready <= 0) return SIZE_MAX; // nothing pending
    }
    while (true) {
        ssize_t r = recv(fd, out, cap, 0);
        if (r >= 0) return static_cast<std::size_t>(r);
        if (errno == EINTR) continue;
        throw TransportError(std::string("recv failed: ") + std::strerror(errno));
    }
}

void tcp_close(int fd) {
    if (fd >= 0) close(fd);
}

std::pair<int, std::uint16_t> tcp_listen(const std::string& host, std::uint16_t port) {
    int fd = socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError("cannot create listening socket");
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (host.empty() || host == "0.0.0.0") {
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
    } else if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        tcp_close(fd);
        throw TransportError("cannot parse listen address " + host);
    }
    if (bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        tcp_close(fd);
        throw TransportError("cannot bind " + host + ":" + std::to_string(port) + ": " +
                             std::strerror(errno));
    }
    socklen_t len = sizeof addr;
    getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    std::uint16_t bound = ntohs(addr.sin_port);
    if (listen(fd, 16) != 0) {
        tcp_close(fd);
        throw TransportError("cannot listen");
    }
    return {fd, bound};
}

int tcp_accept(int listen_fd) {
    while (true) {
        int fd = accept(listen_fd, nullptr, nullptr);
        if (fd >= 0) {
            int one = 1;
            setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return fd;
        }
        if (errno == EINTR) continue;
        return -1;
    }
}

int tcp_accept_timeout(int listen_fd, int timeout_ms) {
    pollfd p{listen_fd, POLLIN, 0};
    int ready = poll(&p, 1, timeout_ms);
    if (ready == 0) return -2;
    if (ready < 0) return errno == EINTR ? -2 : -1;
    return tcp_accept(listen_fd);
}

TcpSourceServer::TcpSourceServer(SourceService& service, const std::string& host,
                                 std::uint16_t port)
    : service_(service) {
    auto [fd, bound] = tcp_listen(host, port);
    listen_fd_ = fd;
    port_ = bound;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

TcpSourceServer::~TcpSourceServer() { stop(); }

void TcpSourceServer::stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) return;
    shutdown(listen_fd_, SHUT_RDWR);
    tcp_close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    {
        std::lock_guard lock(conns_mu_);
        for (auto& [_, c] : conns_) shutdown(c.fd, SHUT_RDWR);
    }
    for (auto& t : workers_)
        if (t.joinable()) t.join();
    std::lock_guard lock(conns_mu_);
    for (auto& [_, c] : conns_) tcp_close(c.fd);
    conns_.clear();
}

void TcpSourceServer::accept_loop() {
    while (!stopping_.load()) {
        int fd = tcp_accept(listen_fd_);
        if (fd < 0) break;
        std::uint64_t id = next_conn_id_.fetch_add(1);
        {
            std::lock_guard lock(conns_mu_);
            conns_.emplace(id, Conn{fd, std::make_unique<std::mutex>()});
        }
        workers_.emplace_back([this, id, fd] { serve(id, fd); });
    }
}

void TcpSourceServer::serve(std::uint64_t conn_id, int fd) {
    try {
        auto banner = service_.banner_bytes(conn_id);
        {
            std::lock_guard lock(conns_mu_);
            auto& conn = conns_.at(conn_id);
            std::lock_guard wl(*conn.write_mu);
            tcp_send_all(fd, banner.data(), banner.size());
        }

        std::vector<std::uint8_t> buf;
        std::uint8_t chunk[4096];
        while (!stopping_.load()) {
            std::size_t got = tcp_recv_some(fd, chunk, sizeof chunk, true);
            if (got == 0) break; // peer closed
            buf.insert(buf.end(), chunk, chunk + got);

            std::size_t consumed = 0;
            while (auto frame = try_decode_frame(buf, consumed)) {
                std::vector<std::uint8_t> raw(buf.begin(),
                                              buf.begin() + static_cast<std::ptrdiff_t>(consumed));
                buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(consumed));
                auto response = service_.handle_frame(raw, conn_id);
                {
                    std::lock_guard lock(conns_mu_);
                    auto it = conns_.find(conn_id);
                    if (it == conns_.end()) return;
                    std::lock_guard wl(*it->second.write_mu);
                    tcp_send_all(fd, response.data(), response.size());
                }
                flush_deltas();
            }
        }
    } catch (const std::exception&) {
        // Connection torn down; drop it.
    }
    std::lock_guard lock(conns_mu_);
    auto it = conns_.find(conn_id);
    if (it != conns_.end()) {
        tcp_close(it->second.fd);
        conns_.erase(it);
    }
}

void TcpSourceServer::flush_deltas() {
    std::vector<std::pair<std::uint64_t, std::vector<std::vector<std::uint8_t>>>> work;
    {
        std::lock_guard lock(conns_mu_);
        for (auto& [id, _] : conns_) {
            auto frames = service_.take_deltas(id);
            if (!frames.empty()) work.emplace_back(id, std::move(frames));
        }
    }
    for (auto& [id, frames] : work) {
        std::lock_guard lock(conns_mu_);
        auto it = conns_.find(id);
        if (it == conns_.end()) continue;
        std::lock_guard wl(*it->second.write_mu);
        for (const auto& f : frames) tcp_send_all(it->second.fd, f.data(), f.size());
    }
}

} // namespace msds
