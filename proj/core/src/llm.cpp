// SPDX-License-Identifier: Apache-2.0
#include <httplib.h>

#include "typeforge/llm.hpp"

#include "typeforge/util.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <thread>

namespace typeforge::llm {

using nlohmann::json;

std::string_view to_string(Role role) noexcept
{
    switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    }
    return "user";
}

void ChatRequest::validate() const
{
    if (messages.empty()) {
        throw Error(ErrorCode::PreconditionFailed, "chat request has no messages");
    }
    for (std::size_t i = 1; i < messages.size(); ++i) {
        if (messages[i].role == Role::System) {
            throw Error(ErrorCode::PreconditionFailed, "system message must come first");
        }
    }
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        throw Error(ErrorCode::PreconditionFailed, "temperature must lie in [0, 2]");
    }
}

namespace {

json messages_json(const std::vector<Message>& messages)
{
    json out = json::array();
    for (const auto& m : messages) {
        out.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
    }
    return out;
}

} // namespace

std::string fingerprint(const ChatRequest& request)
{
    const json doc = {{"messages", messages_json(request.messages)},
                      {"model", request.model},
                      {"temperature", request.temperature}};
    return sha256_hex(doc.dump());
}

// ---------------------------------------------------------------- Cassette

Cassette::Cassette(const Cassette& other)
{
    std::lock_guard lock(other.mutex_);
    meta = other.meta;
    entries_ = other.entries_;
}

Cassette& Cassette::operator=(const Cassette& other)
{
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        meta = other.meta;
        entries_ = other.entries_;
    }
    return *this;
}

std::optional<std::string> Cassette::find(const std::string& fp) const
{
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(fp);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void Cassette::insert(const std::string& fp, std::string response)
{
    std::lock_guard lock(mutex_);
    entries_[fp] = std::move(response);
}

std::size_t Cassette::size() const
{
    std::lock_guard lock(mutex_);
    return entries_.size();
}

json Cassette::to_json() const
{
    std::lock_guard lock(mutex_);
    return {{"meta", {{"model", meta.model}, {"created_at", meta.created_at}}}, {"entries", entries_}};
}

Cassette Cassette::from_json(const json& doc)
{
    Cassette c;
    if (!doc.is_object() || !doc.contains("entries") || !doc.at("entries").is_object()) {
        throw Error(ErrorCode::MalformedResponse, "cassette lacks an 'entries' object");
    }
    if (doc.contains("meta")) {
        c.meta.model = doc.at("meta").value("model", "");
        c.meta.created_at = doc.at("meta").value("created_at", "");
    }
    for (const auto& [k, v] : doc.at("entries").items()) {
        c.entries_[k] = v.get<std::string>();
    }
    return c;
}

Cassette Cassette::load(const std::filesystem::path& path)
{
    try {
        return from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, "cassette " + path.string() + ": " + e.what());
    }
}

void Cassette::save(const std::filesystem::path& path) const
{
    write_file_atomic(path, to_json().dump(2) + "\n");
}

std::string ReplayBackend::complete(const ChatRequest& request)
{
    const auto fp = fingerprint(request);
    if (auto hit = cassette_.find(fp)) {
        return *hit;
    }
    throw LlmError(ErrorCode::CassetteMiss, "no recorded response for fingerprint " + fp);
}

RecordingBackend::RecordingBackend(std::shared_ptr<ChatBackend> inner, std::filesystem::path path, std::string model)
    : inner_(std::move(inner)), path_(std::move(path))
{
    if (std::filesystem::exists(path_)) {
        cassette_ = Cassette::load(path_);
    }
    cassette_.meta.model = std::move(model);
    if (cassette_.meta.created_at.empty()) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        cassette_.meta.created_at = buf;
    }
}

std::string RecordingBackend::complete(const ChatRequest& request)
{
    auto response = inner_->complete(request);
    cassette_.insert(fingerprint(request), response);
    return response;
}

void RecordingBackend::flush() const
{
    cassette_.save(path_);
}

// ---------------------------------------------------------------- Scripted

ScriptedBackend ScriptedBackend::from_json(const json& doc)
{
    std::vector<Rule> rules;
    const auto& list = doc.is_array() ? doc : doc.at("rules");
    for (const auto& r : list) {
        Rule rule;
        rule.match_all = r.value("match_all", std::vector<std::string>{});
        rule.match_none = r.value("match_none", std::vector<std::string>{});
        const auto& resp = r.at("response");
        if (resp.is_array()) {
            rule.response = join(resp.get<std::vector<std::string>>(), "\n");
        } else {
            rule.response = resp.get<std::string>();
        }
        rules.push_back(std::move(rule));
    }
    return ScriptedBackend(std::move(rules));
}

ScriptedBackend ScriptedBackend::load(const std::filesystem::path& path)
{
    try {
        return from_json(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, "responder rules " + path.string() + ": " + e.what());
    }
}

std::string ScriptedBackend::complete(const ChatRequest& request)
{
    std::string conversation;
    for (const auto& m : request.messages) {
        conversation += m.content;
        conversation += '\n';
    }
    for (const auto& rule : rules_) {
        bool ok = true;
        for (const auto& needle : rule.match_all) {
            if (!contains(conversation, needle)) {
                ok = false;
                break;
            }
        }
        for (const auto& needle : rule.match_none) {
            if (ok && contains(conversation, needle)) {
                ok = false;
            }
        }
        if (ok) {
            return rule.response;
        }
    }
    throw LlmError(ErrorCode::LlmFailure, "no scripted rule matches the request");
}

// ---------------------------------------------------------------- HTTP

namespace {

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const std::string& url, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>& headers,
                      std::chrono::milliseconds timeout) override
    {
        HttpResponse out;
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) {
            out.failure = HttpResponse::Failure::Connection;
            out.error = "invalid URL " + url;
            return out;
        }
        const auto path_start = url.find('/', scheme_end + 3);
        const auto origin = path_start == std::string::npos ? url : url.substr(0, path_start);
        const auto path = path_start == std::string::npos ? std::string("/") : url.substr(path_start);
        httplib::Client client(origin);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout).count();
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout).count() % 1000000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        httplib::Headers h;
        for (const auto& [k, v] : headers) {
            h.emplace(k, v);
        }
        auto res = client.Post(path, h, body, "application/json");
        if (!res) {
            const auto err = res.error();
            out.failure = (err == httplib::Error::Read || err == httplib::Error::Write ||
                           err == httplib::Error::ConnectionTimeout)
                              ? HttpResponse::Failure::Timeout
                              : HttpResponse::Failure::Connection;
            out.error = httplib::to_string(err);
            return out;
        }
        out.status = res->status;
        out.body = res->body;
        return out;
    }
};

} // namespace

std::shared_ptr<HttpTransport> make_default_transport()
{
    return std::make_shared<HttplibTransport>();
}

HttpChatBackend::HttpChatBackend(HttpEndpoint endpoint, std::shared_ptr<HttpTransport> transport)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport))
{
}

json HttpChatBackend::encode(const ChatRequest& request)
{
    return {{"model", request.model},
            {"messages", messages_json(request.messages)},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens}};
}

std::string HttpChatBackend::decode(const std::string& body)
{
    try {
        const auto doc = json::parse(body);
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) {
            throw LlmError(ErrorCode::MalformedResponse, "message content is not a string");
        }
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw LlmError(ErrorCode::MalformedResponse, std::string("unexpected response body: ") + e.what());
    }
}

std::string HttpChatBackend::complete(const ChatRequest& request)
{
    std::vector<std::pair<std::string, std::string>> headers;
    if (!endpoint_.api_key.empty()) {
        headers.emplace_back("Authorization", "Bearer " + endpoint_.api_key);
    }
    const auto res = transport_->post(endpoint_.url, encode(request).dump(), headers, endpoint_.timeout);
    switch (res.failure) {
    case HttpResponse::Failure::Timeout:
        throw LlmError(ErrorCode::Timeout, "request to " + endpoint_.url + " timed out: " + res.error);
    case HttpResponse::Failure::Connection:
        throw LlmError(ErrorCode::LlmFailure, "cannot reach " + endpoint_.url + ": " + res.error);
    case HttpResponse::Failure::None:
        break;
    }
    if (res.status == 429) {
        throw LlmError(ErrorCode::RateLimited, "rate limited by " + endpoint_.url);
    }
    if (res.status == 408 || res.status == 504) {
        throw LlmError(ErrorCode::Timeout, "upstream timeout (" + std::to_string(res.status) + ")");
    }
    if (res.status >= 500) {
        // treated like a rate limit: transient and retried
        throw LlmError(ErrorCode::RateLimited, "server error " + std::to_string(res.status));
    }
    if (res.status != 200) {
        throw LlmError(ErrorCode::LlmFailure, "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 200));
    }
    return decode(res.body);
}

// ---------------------------------------------------------------- Gateway

LlmClient::LlmClient(std::shared_ptr<ChatBackend> backend, GatewayOptions options)
    : backend_(std::move(backend)), options_(std::move(options))
{
    if (options_.max_in_flight == 0) {
        options_.max_in_flight = 1;
    }
}

ChatRequest LlmClient::make_request(std::string system, std::string user) const
{
    ChatRequest req;
    if (!system.empty()) {
        req.messages.push_back({Role::System, std::move(system)});
    }
    req.messages.push_back({Role::User, std::move(user)});
    req.model = options_.model;
    req.temperature = options_.temperature;
    req.max_output_tokens = options_.max_output_tokens;
    return req;
}

std::string LlmClient::chat(std::string system, std::string user)
{
    return chat(make_request(std::move(system), std::move(user)));
}

void LlmClient::set_observer(std::function<void(const ChatRequest&)> observer)
{
    std::lock_guard lock(mutex_);
    observer_ = std::move(observer);
}

GatewayStats LlmClient::stats() const
{
    std::lock_guard lock(mutex_);
    return stats_;
}

void LlmClient::acquire_slot()
{
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
    ++in_flight_;
    if (options_.requests_per_minute == 0) {
        return;
    }
    using clock = std::chrono::steady_clock;
    while (true) {
        const auto now = clock::now();
        while (!recent_.empty() && now - recent_.front() >= std::chrono::minutes(1)) {
            recent_.pop_front();
        }
        if (recent_.size() < options_.requests_per_minute) {
            recent_.push_back(now);
            return;
        }
        const auto wake = recent_.front() + std::chrono::minutes(1);
        cv_.wait_until(lock, wake);
    }
}

void LlmClient::release_slot()
{
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_all();
}

std::string LlmClient::chat(const ChatRequest& request)
{
    request.validate();
    {
        std::function<void(const ChatRequest&)> observer;
        {
            std::lock_guard lock(mutex_);
            observer = observer_;
            ++stats_.calls;
        }
        if (observer) {
            observer(request);
        }
    }
    for (int attempt = 0;; ++attempt) {
        acquire_slot();
        try {
            auto response = backend_->complete(request);
            release_slot();
            return response;
        } catch (const LlmError& e) {
            release_slot();
            if (!e.transient() || attempt >= options_.max_retries) {
                std::lock_guard lock(mutex_);
                ++stats_.failures;
                throw LlmError(e.code(),
                               std::string(e.message()) + " (after " + std::to_string(attempt + 1) + " attempt(s))",
                               attempt + 1);
            }
            {
                std::lock_guard lock(mutex_);
                ++stats_.retries;
            }
            std::this_thread::sleep_for(options_.backoff * (1 << attempt));
        } catch (...) {
            release_slot();
            throw;
        }
    }
}

// ---------------------------------------------------------------- Tokens

std::size_t TokenCounter::count(std::string_view text) const noexcept
{
    std::size_t raw = 0;
    std::size_t run = 0;
    auto flush = [&] {
        if (run > 0) {
            raw += (run + 5) / 6;
            run = 0;
        }
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '_' || c >= 0x80) {
            ++run;
            continue;
        }
        flush();
        if (!std::isspace(c)) {
            ++raw;
        }
    }
    flush();
    return static_cast<std::size_t>(std::ceil(static_cast<double>(raw) * calibration_ - 1e-9));
}

std::size_t count_tokens(std::string_view text) noexcept
{
    static const TokenCounter counter;
    return counter.count(text);
}

} // namespace typeforge::llm
