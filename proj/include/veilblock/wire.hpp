#ifndef VEILBLOCK_WIRE_HPP
#define VEILBLOCK_WIRE_HPP

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "veilblock/enforcer.hpp"
#include "veilblock/pir.hpp"
#include "veilblock/transparency.hpp"

// Length-prefixed binary framing over TCP: version (1) || kind (1) ||
// body length (4, BE) || body.
namespace veilblock::wire {

inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 6;
inline constexpr std::size_t kPsiBodyBytes = 32;
inline constexpr std::size_t kDefaultMaxBody = std::size_t{256} << 20;

enum class Kind : std::uint8_t {
    PsiReq = 1,
    PsiResp = 2,
    SnapshotReq = 3,
    Snapshot = 4,
    PirReq = 5,
    PirResp = 6,
    CheckpointReq = 7,
    Checkpoints = 8,
    Error = 9,
};

std::string_view to_string(Kind k);
bool is_known_kind(std::uint8_t k);

struct Header {
    std::uint8_t version = kVersion;
    std::uint8_t kind = 0;
    std::uint32_t length = 0;
};

struct WireMessage {
    Kind kind = Kind::Error;
    Bytes body;

    Bytes encode() const;
    static WireMessage error(std::string_view text);
    std::string error_text() const { return {body.begin(), body.end()}; }
};

Header decode_header(ByteView six_bytes);

// Error frame received from the peer.
class RemoteError : public enforcer::ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

// checkpoints body: u32 count || (u32-prefixed checkpoint)*. A
// checkpoint-req body of old_size || new_size (8 bytes BE each) is answered
// with a checkpoints frame carrying the consistency proof instead.
Bytes encode_checkpoint_list(const std::vector<log::Checkpoint>& cps);
std::vector<log::Checkpoint> decode_checkpoint_list(ByteView body);

// State served by one endpoint. Swapped atomically as a whole.
struct ServedState {
    std::shared_ptr<const enforcer::DatabaseSnapshot> snapshot;
    Bytes snapshot_bytes;
    std::shared_ptr<const pir::BucketedDB> bucketed;
    std::vector<log::Checkpoint> checkpoints;
};

class Handler {
public:
    // The enforcer must outlive the handler; only its const PSI and proof
    // operations are used.
    Handler(const enforcer::Enforcer& enf, std::unique_ptr<pir::FheBackend> backend);

    void publish(ServedState state);
    std::shared_ptr<const ServedState> current() const;

    // Pure request -> response mapping; never throws.
    WireMessage handle(const Header& header, const Bytes& body, const std::string& peer) const;

private:
    const enforcer::Enforcer& enf_;
    std::unique_ptr<pir::FheBackend> backend_;
    mutable std::mutex mu_;
    std::shared_ptr<const ServedState> state_;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    // 0 picks an ephemeral port.
    std::uint16_t port = 0;
    std::size_t workers = 8;
    std::size_t max_body = kDefaultMaxBody;
    // Connections waiting for a worker beyond this are closed.
    std::size_t max_pending = 1024;
};

class Server {
public:
    Server(Handler& handler, ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    // Binds, listens and starts the accept loop and workers. Returns the port.
    std::uint16_t start();
    void stop();
    std::uint16_t port() const { return port_; }

private:
    void accept_loop();
    void worker_loop();
    void serve_connection(int fd, const std::string& peer);

    Handler& handler_;
    ServerOptions options_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::pair<int, std::string>> pending_;
};

// Blocking client connection.
class Connection {
public:
    static Connection open(const std::string& host, std::uint16_t port);
    // host:port
    static Connection open(const std::string& address);
    Connection(Connection&& other) noexcept;
    Connection& operator=(Connection&& other) noexcept;
    ~Connection();

    void send(const WireMessage& m);
    void send_raw(ByteView bytes);
    WireMessage receive(std::size_t max_body = kDefaultMaxBody);
    // send + receive; throws RemoteError on an error frame and
    // ProtocolError on an unexpected kind.
    WireMessage call(const WireMessage& m, Kind expected);

    crypto::GroupElement psi(const crypto::GroupElement& request);
    enforcer::DatabaseSnapshot snapshot();
    std::vector<log::Checkpoint> checkpoints();
    log::ConsistencyProof consistency(std::uint64_t old_size, std::uint64_t new_size);
    pir::PirAnswer pir(const pir::PirQuery& q);

private:
    explicit Connection(int fd) : fd_(fd) {}
    int fd_ = -1;
};

std::pair<std::string, std::uint16_t> split_address(const std::string& address);
// As split_address, but port 0 (any free port) is allowed.
std::pair<std::string, std::uint16_t> split_listen_address(const std::string& address);

}  // namespace veilblock::wire

#endif  // VEILBLOCK_WIRE_HPP
