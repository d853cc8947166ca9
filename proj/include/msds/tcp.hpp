#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "msds/source_service.hpp"

namespace msds {

/// Blocking connect; throws TransportError.
int tcp_connect(const std::string& host, std::uint16_t port);

/// Returns (listen fd, bound port); port 0 picks a free one.
std::pair<int, std::uint16_t> tcp_listen(const std::string& host, std::uint16_t port);

/// Blocking accept; returns -1 when the listener is shut down.
int tcp_accept(int listen_fd);

/// Accept with a timeout; -1 on shutdown, -2 when nothing arrived in time.
int tcp_accept_timeout(int listen_fd, int timeout_ms);

void tcp_send_all(int fd, const std::uint8_t* data, std::size_t n);

/// Reads at most `cap` bytes; 0 means the peer closed. Throws on error.
std::size_t tcp_recv_some(int fd, std::uint8_t* out, std::size_t cap, bool block);

void tcp_close(int fd);

/// Serves one SourceService over the wire protocol. Every accepted
/// connection receives the REGISTER banner first; delta frames are pushed to
/// the connection that registered the live query.
class TcpSourceServer {
  public:
    TcpSourceServer(SourceService& service, const std::string& host, std::uint16_t port);
    ~TcpSourceServer();

    TcpSourceServer(const TcpSourceServer&) = delete;
    TcpSourceServer& operator=(const TcpSourceServer&) = delete;

    std::uint16_t port() const { return port_; }
    void stop();

  private:
    struct Conn {
        int fd;
        std::unique_ptr<std::mutex> write_mu;
    };

    SourceService& service_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    std::mutex conns_mu_;
    std::unordered_map<std::uint64_t, Conn> conns_;
    std::atomic<std::uint64_t> next_conn_id_{1};

    void accept_loop();
    void serve(std::uint64_t conn_id, int fd);
    void flush_deltas();
};

} // namespace msds
