// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include "cnkit/langmodel.hpp"

namespace cnkit::lm {

inline constexpr int kBridgeProtocolVersion = 1;

// Newline-delimited frames over a byte stream.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send_line(const std::string& line) = 0;
  // Throws TransportError when the peer has closed the stream.
  virtual std::string recv_line() = 0;
};

// Owns a connected socket or pipe descriptor.
std::unique_ptr<LineChannel> make_fd_channel(int fd);

// endpoint is "host:port" (optionally prefixed with "tcp://").
std::unique_ptr<LineChannel> connect_tcp(const std::string& endpoint,
                                         std::chrono::milliseconds timeout = std::chrono::seconds(30));

// Client side of the external LM wire protocol:
//   -> {"proto":1}            <- {"proto":1,"vocab":[...]}
//   -> {"ctx":[ids...]}       <- {"probs":[p...]}
// Any reply may be {"err":"..."}. One connection serves one generation
// stream; calls are serialised internally.
class BridgeProvider final : public LanguageModel {
 public:
  // Performs the handshake. Throws ProtocolError on version mismatch or a
  // malformed frame.
  static std::unique_ptr<BridgeProvider> connect(std::unique_ptr<LineChannel> channel);

  const Vocabulary& vocabulary() const override { return vocab_; }
  Distribution next_distribution(std::span<const TokenId> context) const override;

  // Replies whose mass was off by more than the tolerance and got rescaled.
  std::size_t renormalization_warnings() const noexcept { return warnings_.load(); }

 private:
  explicit BridgeProvider(std::unique_ptr<LineChannel> channel) : channel_(std::move(channel)) {}

  std::unique_ptr<LineChannel> channel_;
  Vocabulary vocab_;
  mutable std::mutex mu_;
  mutable std::atomic<std::size_t> warnings_{0};
};

std::unique_ptr<BridgeProvider> bridge_connect(const std::string& endpoint);

}  // namespace cnkit::lm
