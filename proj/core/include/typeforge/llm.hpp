// SPDX-License-Identifier: Apache-2.0
//
// Chat gateway over interchangeable backends. The replay backend answers from a
// cassette keyed by request fingerprint and never touches the network; the HTTP
// backend speaks the chat-completions wire format through an injectable transport.
#pragma once

#include "typeforge/error.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace typeforge::llm {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role) noexcept;

struct Message {
    Role role;
    std::string content;
};

struct ChatRequest {
    std::vector<Message> messages;
    std::string model;
    double temperature = 0.0;
    int max_output_tokens = 2048;

    /// Throws PreconditionFailed for an empty conversation, a system message
    /// anywhere but first, or a temperature outside [0, 2].
    void validate() const;
};

/// Lowercase hex SHA-256 of the compact JSON {"messages":[{"content","role"}...],"model","temperature"}.
std::string fingerprint(const ChatRequest& request);

/// Thrown by backends; `code` is one of RateLimited, Timeout, CassetteMiss, MalformedResponse, LlmFailure.
class LlmError : public Error {
public:
    LlmError(ErrorCode code, const std::string& message, int attempts = 1)
        : Error(code, message), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }
    bool transient() const noexcept { return code() == ErrorCode::RateLimited || code() == ErrorCode::Timeout; }

private:
    int attempts_;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
    virtual std::string name() const = 0;
};

class Cassette {
public:
    struct Meta {
        std::string model;
        std::string created_at;
    };

    Cassette() = default;
    Cassette(const Cassette& other);
    Cassette& operator=(const Cassette& other);

    static Cassette load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::optional<std::string> find(const std::string& fingerprint) const;
    void insert(const std::string& fingerprint, std::string response);
    std::size_t size() const;

    Meta meta;
    nlohmann::json to_json() const;
    static Cassette from_json(const nlohmann::json& doc);

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> entries_;
};

class ReplayBackend final : public ChatBackend {
public:
    explicit ReplayBackend(Cassette cassette) : cassette_(std::move(cassette)) {}
    std::string complete(const ChatRequest& request) override;
    std::string name() const override { return "replay"; }

private:
    Cassette cassette_;
};

/// Forwards to `inner` and stores every exchange; `flush` persists the cassette.
class RecordingBackend final : public ChatBackend {
public:
    RecordingBackend(std::shared_ptr<ChatBackend> inner, std::filesystem::path path, std::string model);
    std::string complete(const ChatRequest& request) override;
    std::string name() const override { return "record(" + inner_->name() + ")"; }
    void flush() const;
    const Cassette& cassette() const noexcept { return cassette_; }

private:
    std::shared_ptr<ChatBackend> inner_;
    std::filesystem::path path_;
    Cassette cassette_;
};

/// Deterministic responder driven by substring rules; used to author cassettes
/// for fixture projects without a hosted model.
class ScriptedBackend final : public ChatBackend {
public:
    struct Rule {
        std::vector<std::string> match_all; ///< substrings that must all occur in the conversation
        std::vector<std::string> match_none;
        std::string response;
    };

    explicit ScriptedBackend(std::vector<Rule> rules) : rules_(std::move(rules)) {}
    static ScriptedBackend load(const std::filesystem::path& path);
    static ScriptedBackend from_json(const nlohmann::json& doc);

    std::string complete(const ChatRequest& request) override;
    std::string name() const override { return "scripted"; }

private:
    std::vector<Rule> rules_;
};

struct HttpResponse {
    int status = 0;
    std::string body;
    enum class Failure { None, Timeout, Connection } failure = Failure::None;
    std::string error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& url, const std::string& body,
                              const std::vector<std::pair<std::string, std::string>>& headers,
                              std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport (http:// and https://).
std::shared_ptr<HttpTransport> make_default_transport();

struct HttpEndpoint {
    std::string url; ///< full URL of the chat-completions endpoint
    std::string api_key;
    std::chrono::milliseconds timeout{120000};
};

class HttpChatBackend final : public ChatBackend {
public:
    HttpChatBackend(HttpEndpoint endpoint, std::shared_ptr<HttpTransport> transport);
    std::string complete(const ChatRequest& request) override;
    std::string name() const override { return "http"; }

    static nlohmann::json encode(const ChatRequest& request);
    static std::string decode(const std::string& body);

private:
    HttpEndpoint endpoint_;
    std::shared_ptr<HttpTransport> transport_;
};

struct GatewayOptions {
    std::string model = "gpt-4o";
    double temperature = 0.0;
    int max_output_tokens = 2048;
    int max_retries = 3;
    std::chrono::milliseconds backoff{500};
    std::size_t max_in_flight = 4;
    std::size_t requests_per_minute = 0; ///< 0 = unlimited
};

struct GatewayStats {
    std::size_t calls = 0;
    std::size_t retries = 0;
    std::size_t failures = 0;
};

/// Retry, concurrency cap and per-minute budget in front of a backend.
class LlmClient {
public:
    LlmClient(std::shared_ptr<ChatBackend> backend, GatewayOptions options = {});

    std::string chat(const ChatRequest& request);
    std::string chat(std::string system, std::string user);
    ChatRequest make_request(std::string system, std::string user) const;

    GatewayStats stats() const;
    const GatewayOptions& options() const noexcept { return options_; }
    ChatBackend& backend() noexcept { return *backend_; }

    /// Observer invoked with every request before it is sent (prompt capture in tests).
    void set_observer(std::function<void(const ChatRequest&)> observer);

private:
    void acquire_slot();
    void release_slot();

    std::shared_ptr<ChatBackend> backend_;
    GatewayOptions options_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t in_flight_ = 0;
    std::deque<std::chrono::steady_clock::time_point> recent_;
    GatewayStats stats_;
    std::function<void(const ChatRequest&)> observer_;
};

/// Whitespace-and-punctuation segmentation: each punctuation character is one
/// token, each run of word characters of length n counts ceil(n / 6), and the
/// sum is scaled by `calibration` and rounded up.
class TokenCounter {
public:
    explicit TokenCounter(double calibration = 1.0) : calibration_(calibration) {}
    std::size_t count(std::string_view text) const noexcept;

private:
    double calibration_;
};

std::size_t count_tokens(std::string_view text) noexcept;

} // namespace typeforge::llm
