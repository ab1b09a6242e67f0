// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnkit/bridge.hpp"

#include <cerrno>
#include <cmath>
#include <cstring>

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <json.hpp>

#include "cnkit/error.hpp"

namespace cnkit::lm {

namespace {

std::string frame_dump(const std::string& line) {
  constexpr std::size_t kMax = 240;
  if (line.size() <= kMax) return "frame: " + line;
  return "frame (" + std::to_string(line.size()) + " bytes): " + line.substr(0, kMax) + "...";
}

class FdChannel final : public LineChannel {
 public:
  explicit FdChannel(int fd) : fd_(fd) {}
  ~FdChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void send_line(const std::string& line) override {
    std::string data = line;
    data += '\n';
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0 && errno == ENOTSOCK) {
        const ssize_t w = ::write(fd_, data.data() + off, data.size() - off);
        if (w < 0) throw TransportError(0, std::string("bridge write failed: ") + std::strerror(errno));
        off += static_cast<std::size_t>(w);
        continue;
      }
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(0, std::string("bridge send failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string recv_line() override {
    while (true) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(0, std::string("bridge read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw TransportError(0, "bridge connection closed by remote");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buffer_;
};

nlohmann::json parse_reply(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw ProtocolError("bridge sent invalid JSON; " + frame_dump(line));
  }
  if (!j.is_object()) throw ProtocolError("bridge reply is not an object; " + frame_dump(line));
  if (auto err = j.find("err"); err != j.end()) {
    throw TransportError(0, "bridge error: " + (err->is_string() ? err->get<std::string>() : err->dump()));
  }
  return j;
}

}  // namespace

std::unique_ptr<LineChannel> make_fd_channel(int fd) { return std::make_unique<FdChannel>(fd); }

std::unique_ptr<LineChannel> connect_tcp(const std::string& endpoint, std::chrono::milliseconds timeout) {
  std::string hostport = endpoint;
  if (hostport.rfind("tcp://", 0) == 0) hostport = hostport.substr(6);
  const auto colon = hostport.rfind(':');
  if (colon == std::string::npos) throw ConfigError("bridge endpoint must be host:port, got '" + endpoint + "'");
  const std::string host = hostport.substr(0, colon);
  const std::string port = hostport.substr(colon + 1);

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw TransportError(0, "cannot resolve " + endpoint + ": " + ::gai_strerror(rc));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      timeval tv{};
      tv.tv_sec = static_cast<long>(timeout.count() / 1000);
      tv.tv_usec = static_cast<long>((timeout.count() % 1000) * 1000);
      ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
      return make_fd_channel(fd);
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  throw TransportError(0, "cannot connect to bridge " + endpoint + ": " + last_error);
}

std::unique_ptr<BridgeProvider> BridgeProvider::connect(std::unique_ptr<LineChannel> channel) {
  std::unique_ptr<BridgeProvider> p(new BridgeProvider(std::move(channel)));
  p->channel_->send_line(nlohmann::json{{"proto", kBridgeProtocolVersion}}.dump());
  const std::string line = p->channel_->recv_line();
  const auto j = parse_reply(line);
  auto proto = j.find("proto");
  if (proto == j.end() || !proto->is_number_integer()) {
    throw ProtocolError("handshake reply lacks an integer 'proto'; " + frame_dump(line));
  }
  if (proto->get<int>() != kBridgeProtocolVersion) {
    throw ProtocolError("bridge protocol version " + std::to_string(proto->get<int>()) + " does not match " +
                        std::to_string(kBridgeProtocolVersion));
  }
  auto vocab = j.find("vocab");
  if (vocab == j.end() || !vocab->is_array()) throw ProtocolError("handshake reply lacks 'vocab'; " + frame_dump(line));
  std::vector<std::string> tokens;
  for (const auto& t : *vocab) {
    if (!t.is_string()) throw ProtocolError("vocabulary entries must be strings; " + frame_dump(line));
    tokens.push_back(t.get<std::string>());
  }
  try {
    p->vocab_ = Vocabulary::from_tokens(std::move(tokens));
  } catch (const ValidationError& e) {
    throw ProtocolError(std::string("bad handshake vocabulary: ") + e.what());
  }
  return p;
}

Distribution BridgeProvider::next_distribution(std::span<const TokenId> context) const {
  check_context(vocab_, context);
  std::string line;
  {
    std::lock_guard lock(mu_);
    channel_->send_line(nlohmann::json{{"ctx", std::vector<TokenId>(context.begin(), context.end())}}.dump());
    line = channel_->recv_line();
  }
  const auto j = parse_reply(line);
  auto probs = j.find("probs");
  if (probs == j.end() || !probs->is_array()) throw ProtocolError("step reply lacks 'probs'; " + frame_dump(line));
  if (probs->size() != vocab_.size()) {
    throw ProtocolError("step reply has " + std::to_string(probs->size()) + " probabilities for a vocabulary of " +
                        std::to_string(vocab_.size()) + "; " + frame_dump(line));
  }
  std::vector<double> p;
  p.reserve(probs->size());
  double sum = 0.0;
  for (const auto& x : *probs) {
    if (!x.is_number()) throw ProtocolError("non-numeric probability; " + frame_dump(line));
    const double v = x.get<double>();
    if (!(v >= 0.0) || std::isinf(v)) throw ProtocolError("negative or non-finite probability; " + frame_dump(line));
    p.push_back(v);
    sum += v;
  }
  if (!(sum > 0.0)) throw ProtocolError("step reply has zero probability mass; " + frame_dump(line));
  if (std::fabs(sum - 1.0) > Distribution::kTolerance) ++warnings_;
  return Distribution::normalized(std::move(p));
}

std::unique_ptr<BridgeProvider> bridge_connect(const std::string& endpoint) {
  return BridgeProvider::connect(connect_tcp(endpoint));
}

}  // namespace cnkit::lm
