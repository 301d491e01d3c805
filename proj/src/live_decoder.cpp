// SPDX-License-Identifier: Apache-2.0
#include "futurecall/live_decoder.hpp"

#include <cstdlib>
#include <regex>

#include <httplib.h>

namespace futurecall {

std::optional<LiveConfig> LiveConfig::from_environment() {
    const char* endpoint = std::getenv("FUTURECALL_ENDPOINT");
    if (!endpoint || !*endpoint)
        return std::nullopt;
    LiveConfig c;
    c.endpoint = endpoint;
    if (const char* key = std::getenv("FUTURECALL_API_KEY"))
        c.api_key = key;
    if (const char* model = std::getenv("FUTURECALL_MODEL"))
        c.model = model;
    return c;
}

Value wire_message(const Message& m) {
    Value j = to_json(m);
    j.erase("bound_futures");
    if (!j["content"].is_string() && !j["content"].is_null())
        j["content"] = j["content"].dump();
    return j;
}

ChatCompletionsDecoder::ChatCompletionsDecoder(LiveConfig config, std::vector<FunctionSchema> tools, RunMode mode)
    : config_(std::move(config)) {
    for (auto& t : tools)
        tools_.push_back(is_async(mode) ? transform_schema(t) : t);
    if (is_async(mode))
        tools_.push_back(await_future_schema());
}

ChatCompletionsDecoder::~ChatCompletionsDecoder() {
    if (worker_.joinable())
        worker_.join();
}

Value ChatCompletionsDecoder::request_body(const std::vector<Message>& context) const {
    Value messages = Value::array();
    for (const auto& m : context)
        messages.push_back(wire_message(m));
    Value tools = Value::array();
    for (const auto& t : tools_)
        tools.push_back(to_tool_definition(t));
    Value body{{"model", config_.model}, {"messages", messages}};
    if (!tools.empty())
        body["tools"] = tools;
    return body;
}

DecodedTurn ChatCompletionsDecoder::parse_response(const Value& body) {
    if (!body.contains("choices") || body["choices"].empty())
        throw std::runtime_error("response without choices");
    const auto& msg = body["choices"][0].at("message");
    DecodedTurn turn;
    if (msg.contains("tool_calls") && msg["tool_calls"].is_array() && !msg["tool_calls"].empty()) {
        for (const auto& tc : msg["tool_calls"]) {
            const auto& fn = tc.at("function");
            Value args;
            auto raw = fn.value("arguments", std::string("{}"));
            args = Value::parse(raw, nullptr, false);
            if (args.is_discarded())
                args = Value{{"_raw", raw}};
            turn.calls.push_back(ToolCall{tc.at("id").get<std::string>(), fn.at("name").get<std::string>(), args});
        }
        return turn;
    }
    turn.final_text = msg.value("content", Value("")).is_string() ? msg["content"].get<std::string>() : std::string();
    return turn;
}

void ChatCompletionsDecoder::start_turn(const ModelView& view, EventLoop& loop,
                                        std::function<void(DecodedTurn)> done) {
    if (worker_.joinable())
        worker_.join();
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.endpoint, m, url))
        throw std::invalid_argument("endpoint is not an http(s) URL");
    std::string host = m[1];
    std::string path = m[2].matched ? std::string(m[2]) : "/v1/chat/completions";
    std::string body = request_body(*view.context).dump();

    loop.expect_external(1);
    worker_ = std::thread([this, host, path, body, &loop, done = std::move(done)]() mutable {
        std::string error;
        DecodedTurn turn;
        try {
            httplib::Client client(host);
            client.set_read_timeout(config_.timeout_seconds, 0);
            httplib::Headers headers;
            if (!config_.api_key.empty())
                headers.emplace("Authorization", "Bearer " + config_.api_key);
            auto res = client.Post(path, headers, body, "application/json");
            if (!res)
                error = "request failed: " + httplib::to_string(res.error());
            else if (res->status != 200)
                error = "endpoint returned status " + std::to_string(res->status);
            else
                turn = parse_response(Value::parse(res->body));
        } catch (const std::exception& e) {
            error = e.what();
        }
        loop.post_external([error, turn = std::move(turn), done = std::move(done)]() mutable {
            if (!error.empty())
                throw std::runtime_error("live decoder: " + error);
            done(std::move(turn));
        });
    });
}

}  // namespace futurecall
