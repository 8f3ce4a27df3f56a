#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "voiplace/volume.hpp"

namespace voiplace {

// Transport- or protocol-level failure talking to the language-model
// endpoint: unreachable host, non-200 status, or a reply that is not a valid
// chat completion. Distinct from DataError so callers can apply a different
// policy (an unreachable endpoint is an operator problem; flaky model
// *content* is handled by retry/fallback instead and never raises this).
class EndpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct LlmConfig {
    std::string base_url;  // e.g. "http://127.0.0.1:8311"
    std::string model;
    std::string api_key;  // sent as a bearer token when non-empty
    double temperature = 0.0;
    int timeout_seconds = 60;
};

inline LlmConfig llm_config_from_env() {
    LlmConfig cfg;
    if (const char* u = std::getenv("VOIPLACE_LLM_URL")) cfg.base_url = u;
    if (const char* m = std::getenv("VOIPLACE_LLM_MODEL")) cfg.model = m;
    if (const char* k = std::getenv("VOIPLACE_LLM_KEY")) cfg.api_key = k;
    return cfg;
}

// One round trip: messages in, assistant text out. The HTTP implementation
// talks to any chat-completions endpoint; the scripted one replays canned
// replies so the agent is testable with no network at all.
class LlmClient {
  public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

class HttpLlmClient : public LlmClient {
  public:
    explicit HttpLlmClient(LlmConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.base_url.empty())
            throw EndpointError("no LLM endpoint configured (set VOIPLACE_LLM_URL or --llm-url)");
    }

    std::string complete(const std::vector<ChatMessage>& messages) override {
        nlohmann::json body{{"model", cfg_.model}, {"temperature", cfg_.temperature}};
        auto& msgs = body["messages"] = nlohmann::json::array();
        for (const auto& m : messages)
            msgs.push_back({{"role", m.role}, {"content", m.content}});

        httplib::Client cli(cfg_.base_url);
        cli.set_connection_timeout(cfg_.timeout_seconds, 0);
        cli.set_read_timeout(cfg_.timeout_seconds, 0);
        cli.set_write_timeout(cfg_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

        auto res = cli.Post("/v1/chat/completions", headers, body.dump(), "application/json");
        if (!res)
            throw EndpointError("cannot reach LLM endpoint " + cfg_.base_url + ": " +
                                httplib::to_string(res.error()));
        if (res->status != 200)
            throw EndpointError("LLM endpoint returned HTTP " + std::to_string(res->status) +
                                " from " + cfg_.base_url);
        try {
            nlohmann::json reply = nlohmann::json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw EndpointError(std::string("malformed chat-completion reply: ") + e.what());
        }
    }

    const LlmConfig& config() const { return cfg_; }

  private:
    LlmConfig cfg_;
};

// In-process endpoint stand-in: replays a fixed list of assistant replies in
// order. Keeps the full agent loop runnable in hermetic tests.
class ScriptedLlmClient : public LlmClient {
  public:
    explicit ScriptedLlmClient(std::vector<std::string> replies, bool repeat_last = false)
        : replies_(std::move(replies)), repeat_last_(repeat_last) {}

    std::string complete(const std::vector<ChatMessage>& messages) override {
        requests_.push_back(messages);
        if (next_ < replies_.size()) return replies_[next_++];
        if (repeat_last_ && !replies_.empty()) return replies_.back();
        throw EndpointError("scripted LLM client has no reply left (call " +
                            std::to_string(next_ + 1) + ")");
    }

    // Everything the "endpoint" was asked, for asserting on prompt content.
    const std::vector<std::vector<ChatMessage>>& requests() const { return requests_; }
    size_t calls() const { return requests_.size(); }

  private:
    std::vector<std::string> replies_;
    bool repeat_last_ = false;
    size_t next_ = 0;
    std::vector<std::vector<ChatMessage>> requests_;
};

}  // namespace voiplace
