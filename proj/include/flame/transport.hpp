#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "flame/ring.hpp"

namespace flame {

// msg_type registry. OPEN carries batched share contributions; MACCHK_Y0 the
// y0 opening of the MAC check; COMMIT/DECOMMIT the z-share commitments;
// COIN_COMMIT/COIN_REVEAL the coin-flip batches; RESULT the (delta_eta,
// lambda-share) pair for the verifier; CONTROL session control and aborts.
enum MsgType : uint8_t {
  MSG_OPEN = 1,
  MSG_MACCHK_Y0 = 2,
  MSG_COMMIT = 3,
  MSG_DECOMMIT = 4,
  MSG_COIN_COMMIT = 5,
  MSG_COIN_REVEAL = 6,
  MSG_RESULT = 7,
  MSG_CONTROL = 8,
};

constexpr size_t kMaxPayload = size_t(1) << 24;
constexpr size_t kFrameHeader = 4 + 1 + 4;  // len u32, msg_type u8, session_id u32

struct Frame {
  uint8_t msg_type = 0;
  uint32_t session_id = 0;
  std::vector<uint8_t> payload;
};

// Wire encoding: [len u32][msg_type u8][session_id u32][payload], little-endian.
inline std::vector<uint8_t> encode_frame(const Frame& f) {
  if (f.payload.size() > kMaxPayload) throw TransportError("frame payload over limit");
  std::vector<uint8_t> out;
  out.reserve(kFrameHeader + f.payload.size());
  uint32_t len = uint32_t(f.payload.size());
  for (int i = 0; i < 4; i++) out.push_back(uint8_t((len >> (8 * i)) & 0xff));
  out.push_back(f.msg_type);
  for (int i = 0; i < 4; i++) out.push_back(uint8_t((f.session_id >> (8 * i)) & 0xff));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

struct ChannelMetrics {
  uint64_t bytes_sent = 0;
  uint64_t bytes_received = 0;
  uint64_t messages_sent = 0;
  uint64_t rounds = 0;
};

// Full-duplex frame channel between the two servers. exchange() is the only
// round-bearing operation; both parties must call it in lockstep with the
// same msg_type.
class Channel {
 public:
  virtual ~Channel() = default;

  Frame exchange(const Frame& out) {
    send(out);
    Frame in = recv();
    metrics_.rounds++;
    if (in.msg_type != out.msg_type)
      throw ProtocolError("protocol desync: msg_type mismatch (sent " +
                          std::to_string(int(out.msg_type)) + ", got " +
                          std::to_string(int(in.msg_type)) + ")");
    if (in.session_id != out.session_id)
      throw ProtocolError("protocol desync: session_id mismatch");
    return in;
  }

  void send(const Frame& f) {
    std::vector<uint8_t> bytes = encode_frame(f);
    send_bytes(bytes);
    metrics_.bytes_sent += bytes.size();
    metrics_.messages_sent++;
    digest_update(0x00, bytes);
  }

  Frame recv() {
    Frame f = recv_frame();
    metrics_.bytes_received += kFrameHeader + f.payload.size();
    digest_update(0x01, encode_frame(f));
    return f;
  }

  const ChannelMetrics& metrics() const { return metrics_; }
  void reset_metrics() { metrics_ = ChannelMetrics{}; }

  // Running transcript digest: chained SHA-256 over every frame in order with
  // a direction byte. Equal digests mean byte-identical protocol transcripts.
  Digest transcript_digest() const { return transcript_; }

 protected:
  virtual void send_bytes(const std::vector<uint8_t>& bytes) = 0;
  virtual Frame recv_frame() = 0;

 private:
  void digest_update(uint8_t dir, const std::vector<uint8_t>& bytes) {
    thread_local Sha256 h;
    h.reset();
    h.update(transcript_.data(), transcript_.size());
    h.update(&dir, 1);
    h.update(bytes.data(), bytes.size());
    transcript_ = h.final();
  }

  ChannelMetrics metrics_;
  Digest transcript_{};
};

namespace detail {

struct FrameQueue {
  std::mutex m;
  std::condition_variable cv;
  std::deque<std::vector<uint8_t>> q;
  bool closed = false;

  void push(std::vector<uint8_t> bytes) {
    {
      std::lock_guard<std::mutex> lk(m);
      q.push_back(std::move(bytes));
    }
    cv.notify_one();
  }
  std::vector<uint8_t> pop() {
    std::unique_lock<std::mutex> lk(m);
    cv.wait(lk, [&] { return !q.empty() || closed; });
    if (q.empty()) throw TransportError("peer disconnected");
    std::vector<uint8_t> out = std::move(q.front());
    q.pop_front();
    return out;
  }
  void close() {
    {
      std::lock_guard<std::mutex> lk(m);
      closed = true;
    }
    cv.notify_all();
  }
};

inline Frame decode_frame_bytes(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < kFrameHeader) throw TransportError("short frame");
  uint32_t len = 0;
  for (int i = 3; i >= 0; i--) len = (len << 8) | bytes[i];
  Frame f;
  f.msg_type = bytes[4];
  f.session_id = 0;
  for (int i = 8; i >= 5; i--) f.session_id = (f.session_id << 8) | bytes[i];
  if (bytes.size() != kFrameHeader + len) throw TransportError("frame length mismatch");
  f.payload.assign(bytes.begin() + kFrameHeader, bytes.end());
  return f;
}

}  // namespace detail

// In-process backend: two endpoints over a pair of frame queues.
class InProcChannel : public Channel {
 public:
  InProcChannel(std::shared_ptr<detail::FrameQueue> tx, std::shared_ptr<detail::FrameQueue> rx)
      : tx_(std::move(tx)), rx_(std::move(rx)) {}
  ~InProcChannel() override {
    if (tx_) tx_->close();
  }

 protected:
  void send_bytes(const std::vector<uint8_t>& bytes) override { tx_->push(bytes); }
  Frame recv_frame() override { return detail::decode_frame_bytes(rx_->pop()); }

 private:
  std::shared_ptr<detail::FrameQueue> tx_, rx_;
};

inline std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_inproc_pair() {
  auto a = std::make_shared<detail::FrameQueue>();
  auto b = std::make_shared<detail::FrameQueue>();
  return {std::make_unique<InProcChannel>(a, b), std::make_unique<InProcChannel>(b, a)};
}

// TCP backend: plain stream socket, same framing. Writes run on a helper
// thread inside exchange() (via the base class calling send then recv on this
// object from one thread, the socket being full-duplex) so large simultaneous
// sends cannot deadlock.
class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpChannel() override {
    join_writer();
    if (fd_ >= 0) ::close(fd_);
  }
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  static std::unique_ptr<TcpChannel> listen_accept(uint16_t port);

  static std::unique_ptr<TcpChannel> connect_to(const std::string& host, uint16_t port,
                                                int retries = 100) {
    for (int attempt = 0;; attempt++) {
      int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) throw TransportError("socket() failed");
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_port = htons(port);
      if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw TransportError("bad host address: " + host);
      }
      if (connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0)
        return std::make_unique<TcpChannel>(fd);
      ::close(fd);
      if (attempt >= retries) throw TransportError("connect() to " + host + " failed");
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }

 protected:
  // Sending from a detached writer while the caller blocks in recv keeps the
  // two directions independent; both sides pushing multi-megabyte frames at
  // once would otherwise deadlock on full kernel buffers.
  void send_bytes(const std::vector<uint8_t>& bytes) override {
    join_writer();
    writer_error_.clear();
    writer_ = std::thread([this, bytes] {
      try {
        write_all(bytes.data(), bytes.size());
      } catch (const std::exception& e) {
        writer_error_ = e.what();
      }
    });
  }

  Frame recv_frame() override {
    uint8_t head[kFrameHeader];
    read_all(head, sizeof(head));
    uint32_t len = 0;
    for (int i = 3; i >= 0; i--) len = (len << 8) | head[i];
    if (len > kMaxPayload) {
      join_writer();
      throw TransportError("incoming frame over payload limit");
    }
    std::vector<uint8_t> bytes(head, head + sizeof(head));
    bytes.resize(kFrameHeader + len);
    read_all(bytes.data() + kFrameHeader, len);
    join_writer();
    if (!writer_error_.empty()) throw TransportError("send failed: " + writer_error_);
    return detail::decode_frame_bytes(bytes);
  }

 private:
  void write_all(const uint8_t* data, size_t len) {
    while (len > 0) {
      ssize_t n = ::send(fd_, data, len, MSG_NOSIGNAL);
      if (n <= 0) throw TransportError("peer disconnected during send");
      data += n;
      len -= size_t(n);
    }
  }
  void read_all(uint8_t* data, size_t len) {
    while (len > 0) {
      ssize_t n = ::recv(fd_, data, len, 0);
      if (n <= 0) {
        join_writer();
        throw TransportError("peer disconnected during recv");
      }
      data += n;
      len -= size_t(n);
    }
  }
  void join_writer() {
    if (writer_.joinable()) writer_.join();
  }

  int fd_ = -1;
  std::thread writer_;
  std::string writer_error_;
};

// Bound socket that can hand out several peer connections; the verifier
// accepts both servers through one of these.
class TcpListener {
 public:
  explicit TcpListener(uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw TransportError("socket() failed");
    int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      ::close(fd_);
      throw TransportError("bind() failed on port " + std::to_string(port));
    }
    if (listen(fd_, 8) != 0) {
      ::close(fd_);
      throw TransportError("listen() failed");
    }
  }
  ~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
  }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::unique_ptr<TcpChannel> accept_one() {
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) throw TransportError("accept() failed");
    return std::make_unique<TcpChannel>(fd);
  }

 private:
  int fd_ = -1;
};

inline std::unique_ptr<TcpChannel> TcpChannel::listen_accept(uint16_t port) {
  TcpListener l(port);
  return l.accept_one();
}

// Batched opening: each party contributes one share per value; one exchange
// (one round) regardless of the batch size; everyone learns share + peer share.
// Opens a batch in one round. The sent shares may differ from the shares used
// for the local sum; the split exists so tests can model a cheating party that
// lies on the wire while keeping its own correct view.
inline std::vector<RingElement> open_values(Channel& ch, uint8_t msg_type, uint32_t session_id,
                                            const std::vector<RingElement>& send_shares,
                                            const std::vector<RingElement>& own_shares) {
  if (send_shares.size() != own_shares.size())
    throw ProtocolError("open batch: inconsistent share vectors");
  Frame out;
  out.msg_type = msg_type;
  out.session_id = session_id;
  out.payload.reserve(send_shares.size() * 16);
  for (const auto& s : send_shares) append_le(out.payload, s);
  Frame in = ch.exchange(out);
  if (in.payload.size() != own_shares.size() * 16)
    throw ProtocolError("protocol desync: open batch length mismatch");
  std::vector<RingElement> opened;
  opened.reserve(own_shares.size());
  for (size_t i = 0; i < own_shares.size(); i++) {
    RingElement peer = load_le(in.payload.data() + 16 * i, own_shares[i].params);
    opened.push_back(add(own_shares[i], peer));
  }
  return opened;
}

inline std::vector<RingElement> open_values(Channel& ch, uint8_t msg_type, uint32_t session_id,
                                            const std::vector<RingElement>& shares) {
  return open_values(ch, msg_type, session_id, shares, shares);
}

}  // namespace flame
