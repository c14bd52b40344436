#include "veilblock/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace veilblock::wire {
namespace {

bool write_all(int fd, const std::uint8_t* p, std::size_t n) {
    while (n > 0) {
        auto w = ::send(fd, p, n, MSG_NOSIGNAL);
        if (w < 0 && errno == EINTR) continue;
        if (w <= 0) return false;
        p += w;
        n -= static_cast<std::size_t>(w);
    }
    return true;
}

// false on EOF or error before n bytes.
bool read_all(int fd, std::uint8_t* p, std::size_t n) {
    while (n > 0) {
        auto r = ::recv(fd, p, n, 0);
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) return false;
        p += r;
        n -= static_cast<std::size_t>(r);
    }
    return true;
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

std::string_view to_string(Kind k) {
    switch (k) {
        case Kind::PsiReq: return "psi-req";
        case Kind::PsiResp: return "psi-resp";
        case Kind::SnapshotReq: return "snapshot-req";
        case Kind::Snapshot: return "snapshot";
        case Kind::PirReq: return "pir-req";
        case Kind::PirResp: return "pir-resp";
        case Kind::CheckpointReq: return "checkpoint-req";
        case Kind::Checkpoints: return "checkpoints";
        case Kind::Error: return "error";
    }
    return "unknown";
}

bool is_known_kind(std::uint8_t k) { return k >= 1 && k <= 9; }

Bytes WireMessage::encode() const {
    if (body.size() > 0xffffffffu) throw Error("frame body too large");
    ByteWriter w;
    w.u8(kVersion);
    w.u8(static_cast<std::uint8_t>(kind));
    w.u32(static_cast<std::uint32_t>(body.size()));
    w.raw(body);
    return std::move(w).take();
}

WireMessage WireMessage::error(std::string_view text) { return {Kind::Error, Bytes(text.begin(), text.end())}; }

Header decode_header(ByteView six_bytes) {
    ByteReader r(six_bytes);
    Header h;
    h.version = r.u8();
    h.kind = r.u8();
    h.length = r.u32();
    r.expect_done();
    return h;
}

Bytes encode_checkpoint_list(const std::vector<log::Checkpoint>& cps) {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(cps.size()));
    for (const auto& c : cps) w.blob(c.encode());
    return std::move(w).take();
}

std::vector<log::Checkpoint> decode_checkpoint_list(ByteView body) {
    ByteReader r(body);
    std::vector<log::Checkpoint> out(r.u32());
    for (auto& c : out) c = log::Checkpoint::decode(r.blob());
    r.expect_done();
    return out;
}

Handler::Handler(const enforcer::Enforcer& enf, std::unique_ptr<pir::FheBackend> backend)
    : enf_(enf), backend_(std::move(backend)), state_(std::make_shared<ServedState>()) {}

void Handler::publish(ServedState state) {
    if (state.snapshot && state.snapshot_bytes.empty()) state.snapshot_bytes = state.snapshot->encode();
    auto next = std::make_shared<const ServedState>(std::move(state));
    std::lock_guard lock(mu_);
    state_.swap(next);
}

std::shared_ptr<const ServedState> Handler::current() const {
    std::lock_guard lock(mu_);
    return state_;
}

WireMessage Handler::handle(const Header& header, const Bytes& body, const std::string& peer) const {
    if (header.version != kVersion) return WireMessage::error("unsupported protocol version");
    if (!is_known_kind(header.kind)) return WireMessage::error("unknown message kind");
    try {
        switch (static_cast<Kind>(header.kind)) {
            case Kind::PsiReq: {
                if (body.size() != kPsiBodyBytes) return WireMessage::error("psi-req body must be 32 bytes");
                return {Kind::PsiResp, enf_.respond_psi(body, peer)};
            }
            case Kind::SnapshotReq: {
                auto state = current();
                if (!state->snapshot) return WireMessage::error("no snapshot published");
                return {Kind::Snapshot, state->snapshot_bytes};
            }
            case Kind::PirReq: {
                auto state = current();
                if (!state->bucketed) return WireMessage::error("no bucketed database published");
                auto q = pir::PirQuery::decode(body);
                return {Kind::PirResp, pir::server_pir_answer(q, *state->bucketed, *backend_).encode()};
            }
            case Kind::CheckpointReq: {
                if (body.empty()) return {Kind::Checkpoints, encode_checkpoint_list(current()->checkpoints)};
                ByteReader r(body);
                auto old_size = r.u64();
                auto new_size = r.u64();
                r.expect_done();
                return {Kind::Checkpoints, enf_.prove_consistency(old_size, new_size).encode()};
            }
            default: return WireMessage::error(std::string("unexpected ") + std::string(to_string(Kind(header.kind))));
        }
    } catch (const std::exception& e) {
        return WireMessage::error(e.what());
    }
}

Server::Server(Handler& handler, ServerOptions options) : handler_(handler), options_(std::move(options)) {
    if (options_.workers == 0) throw Error("server needs at least one worker");
}

Server::~Server() { stop(); }

std::uint16_t Server::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(errno_text("socket"));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(options_.port);
    if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        throw Error("invalid listen address: " + options_.host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 256) != 0) {
        auto msg = errno_text("bind");
        ::close(listen_fd_);
        throw Error(msg);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    running_ = true;
    for (std::size_t i = 0; i < options_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
    acceptor_ = std::thread([this] { accept_loop(); });
    return port_;
}

void Server::stop() {
    if (!running_.exchange(false)) return;
    cv_.notify_all();
    if (acceptor_.joinable()) acceptor_.join();
    for (auto& t : workers_) t.join();
    workers_.clear();
    ::close(listen_fd_);
    for (auto& [fd, peer] : pending_) ::close(fd);
    pending_.clear();
}

void Server::accept_loop() {
    while (running_) {
        pollfd p{listen_fd_, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        sockaddr_in peer{};
        socklen_t len = sizeof peer;
        int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
        if (fd < 0) continue;
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        char buf[INET_ADDRSTRLEN] = {};
        ::inet_ntop(AF_INET, &peer.sin_addr, buf, sizeof buf);
        std::unique_lock lock(mu_);
        if (pending_.size() >= options_.max_pending) {
            lock.unlock();
            ::close(fd);
            continue;
        }
        pending_.emplace_back(fd, std::string(buf) + ":" + std::to_string(ntohs(peer.sin_port)));
        lock.unlock();
        cv_.notify_one();
    }
}

void Server::worker_loop() {
    for (;;) {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return !running_ || !pending_.empty(); });
        if (!running_) return;
        auto [fd, peer] = std::move(pending_.front());
        pending_.pop_front();
        lock.unlock();
        serve_connection(fd, peer);
        ::close(fd);
    }
}

void Server::serve_connection(int fd, const std::string& peer) {
    while (running_) {
        pollfd p{fd, POLLIN, 0};
        int ready = ::poll(&p, 1, 100);
        if (ready == 0) continue;
        if (ready < 0) return;
        std::uint8_t raw[kHeaderBytes];
        if (!read_all(fd, raw, sizeof raw)) return;
        auto header = decode_header({raw, sizeof raw});
        if (header.length > options_.max_body) {
            // The body is never read, so the stream cannot be resynchronised.
            auto reply = WireMessage::error("frame exceeds size limit").encode();
            write_all(fd, reply.data(), reply.size());
            return;
        }
        Bytes body(header.length);
        if (!read_all(fd, body.data(), body.size())) return;
        auto reply = handler_.handle(header, body, peer).encode();
        if (!write_all(fd, reply.data(), reply.size())) return;
    }
}

Connection Connection::open(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    auto port_text = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &res); rc != 0) {
        throw enforcer::ProtocolError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
        auto msg = errno_text("connect");
        ::freeaddrinfo(res);
        if (fd >= 0) ::close(fd);
        throw enforcer::ProtocolError(msg + " (" + host + ":" + port_text + ")");
    }
    ::freeaddrinfo(res);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return Connection(fd);
}

Connection Connection::open(const std::string& address) {
    auto [host, port] = split_address(address);
    return open(host, port);
}

Connection::Connection(Connection&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

Connection& Connection::operator=(Connection&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
}

Connection::~Connection() {
    if (fd_ >= 0) ::close(fd_);
}

void Connection::send(const WireMessage& m) { send_raw(m.encode()); }

void Connection::send_raw(ByteView bytes) {
    if (!write_all(fd_, bytes.data(), bytes.size())) throw enforcer::ProtocolError(errno_text("send"));
}

WireMessage Connection::receive(std::size_t max_body) {
    std::uint8_t raw[kHeaderBytes];
    if (!read_all(fd_, raw, sizeof raw)) throw enforcer::ProtocolError("connection closed by peer");
    auto header = decode_header({raw, sizeof raw});
    if (header.version != kVersion || !is_known_kind(header.kind)) throw enforcer::ProtocolError("malformed frame");
    if (header.length > max_body) throw enforcer::ProtocolError("frame exceeds size limit");
    WireMessage m{static_cast<Kind>(header.kind), Bytes(header.length)};
    if (!read_all(fd_, m.body.data(), m.body.size())) throw enforcer::ProtocolError("truncated frame");
    return m;
}

WireMessage Connection::call(const WireMessage& m, Kind expected) {
    send(m);
    auto reply = receive();
    if (reply.kind == Kind::Error) throw RemoteError(reply.error_text());
    if (reply.kind != expected) {
        throw enforcer::ProtocolError("expected " + std::string(to_string(expected)) + ", got " +
                                      std::string(to_string(reply.kind)));
    }
    return reply;
}

crypto::GroupElement Connection::psi(const crypto::GroupElement& request) {
    auto reply = call({Kind::PsiReq, Bytes(request.bytes().begin(), request.bytes().end())}, Kind::PsiResp);
    if (reply.body.size() != kPsiBodyBytes) throw enforcer::ProtocolError("psi-resp body must be 32 bytes");
    try {
        return crypto::GroupElement::decode(reply.body);
    } catch (const crypto::InvalidEncoding& e) {
        throw enforcer::ProtocolError(std::string("invalid psi-resp: ") + e.what());
    }
}

enforcer::DatabaseSnapshot Connection::snapshot() {
    return enforcer::DatabaseSnapshot::decode(call({Kind::SnapshotReq, {}}, Kind::Snapshot).body);
}

std::vector<log::Checkpoint> Connection::checkpoints() {
    return decode_checkpoint_list(call({Kind::CheckpointReq, {}}, Kind::Checkpoints).body);
}

log::ConsistencyProof Connection::consistency(std::uint64_t old_size, std::uint64_t new_size) {
    ByteWriter w;
    w.u64(old_size);
    w.u64(new_size);
    auto reply = call({Kind::CheckpointReq, std::move(w).take()}, Kind::Checkpoints);
    ByteReader r(reply.body);
    auto proof = log::ConsistencyProof::decode(r);
    r.expect_done();
    return proof;
}

pir::PirAnswer Connection::pir(const pir::PirQuery& q) {
    return pir::PirAnswer::decode(call({Kind::PirReq, q.encode()}, Kind::PirResp).body);
}

namespace {

std::pair<std::string, std::uint16_t> split_host_port(const std::string& address, bool allow_zero) {
    auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == address.size()) {
        throw Error("address must be host:port, got '" + address + "'");
    }
    unsigned long port = 0;
    try {
        std::size_t used = 0;
        port = std::stoul(address.substr(colon + 1), &used);
        if (used != address.size() - colon - 1) throw Error("");
    } catch (const std::exception&) {
        throw Error("invalid port in '" + address + "'");
    }
    if ((port == 0 && !allow_zero) || port > 65535) throw Error("port out of range in '" + address + "'");
    return {address.substr(0, colon), static_cast<std::uint16_t>(port)};
}

}  // namespace

std::pair<std::string, std::uint16_t> split_address(const std::string& address) {
    return split_host_port(address, false);
}

std::pair<std::string, std::uint16_t> split_listen_address(const std::string& address) {
    return split_host_port(address, true);
}

}  // namespace veilblock::wire
