// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "futurecall/driver.hpp"

namespace futurecall {

struct LiveConfig {
    std::string endpoint;  // full URL of a chat-completions route
    std::string api_key;
    std::string model;
    int timeout_seconds = 120;

    /// Reads FUTURECALL_ENDPOINT, FUTURECALL_API_KEY and FUTURECALL_MODEL;
    /// nullopt when no endpoint is set.
    static std::optional<LiveConfig> from_environment();
};

/// Chat message in wire form: structured content is serialized to text.
Value wire_message(const Message& m);

/// Decoder backed by an OpenAI-compatible chat-completions endpoint. Each turn
/// is one blocking request on a helper thread; the parsed response is posted
/// back onto the event loop. Requires a wall-clock loop.
class ChatCompletionsDecoder : public Decoder {
public:
    ChatCompletionsDecoder(LiveConfig config, std::vector<FunctionSchema> tools, RunMode mode);
    ~ChatCompletionsDecoder() override;

    bool ready(const ModelView&) const override { return true; }
    bool exhausted() const override { return false; }
    void start_turn(const ModelView& view, EventLoop& loop, std::function<void(DecodedTurn)> done) override;
    void begin_recovery() override {}

    /// Request body for the given context.
    Value request_body(const std::vector<Message>& context) const;
    /// Parses a response body into a turn; throws std::runtime_error.
    static DecodedTurn parse_response(const Value& body);

private:
    LiveConfig config_;
    std::vector<FunctionSchema> tools_;
    std::thread worker_;
};

}  // namespace futurecall
