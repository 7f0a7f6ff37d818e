// SPDX-License-Identifier: Apache-2.0
#include "typeforge/embedding.hpp"

#include "typeforge/util.hpp"

#include <cctype>
#include <cmath>

namespace typeforge {

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

void split_identifier(const std::string& ident, std::vector<std::string>& out)
{
    std::vector<std::string> parts;
    std::string current;
    for (std::size_t i = 0; i < ident.size(); ++i) {
        const auto c = static_cast<unsigned char>(ident[i]);
        if (c == '_') {
            if (!current.empty()) {
                parts.push_back(current);
                current.clear();
            }
            continue;
        }
        const bool boundary = std::isupper(c) && !current.empty() &&
                              (std::islower(static_cast<unsigned char>(current.back())) ||
                               (i + 1 < ident.size() && std::islower(static_cast<unsigned char>(ident[i + 1]))));
        if (boundary) {
            parts.push_back(current);
            current.clear();
        }
        current.push_back(static_cast<char>(c));
    }
    if (!current.empty()) {
        parts.push_back(current);
    }
    if (parts.size() > 1) {
        for (const auto& p : parts) {
            out.push_back(lower(p));
        }
    }
}

} // namespace

std::vector<std::string> HashedEmbedder::terms(std::string_view text)
{
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (word.empty()) {
            return;
        }
        out.push_back(lower(word));
        split_identifier(word, out);
        word.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '_' || c >= 0x80) {
            word.push_back(static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

Vector HashedEmbedder::embed(std::string_view text) const
{
    const auto t = terms(text);
    if (t.empty()) {
        throw Error(ErrorCode::EmptyText, "cannot embed empty text");
    }
    Vector v(dimension_, 0.0);
    for (const auto& term : t) {
        v[fnv1a64(term) % dimension_] += 1.0;
    }
    const double n = norm(v);
    for (auto& x : v) {
        x /= n;
    }
    return v;
}

HttpEmbedder::HttpEmbedder(llm::HttpEndpoint endpoint, std::shared_ptr<llm::HttpTransport> transport,
                           std::size_t dimension)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)), dimension_(dimension)
{
}

Vector HttpEmbedder::embed(std::string_view text) const
{
    if (trim(text).empty()) {
        throw Error(ErrorCode::EmptyText, "cannot embed empty text");
    }
    const nlohmann::json body = {{"texts", {std::string(text)}}};
    std::vector<std::pair<std::string, std::string>> headers;
    if (!endpoint_.api_key.empty()) {
        headers.emplace_back("Authorization", "Bearer " + endpoint_.api_key);
    }
    const auto res = transport_->post(endpoint_.url, body.dump(), headers, endpoint_.timeout);
    if (res.failure != llm::HttpResponse::Failure::None || res.status != 200) {
        throw Error(ErrorCode::LlmFailure, "embedding service failed: " + res.error + " status " +
                                               std::to_string(res.status));
    }
    Vector v;
    try {
        v = nlohmann::json::parse(res.body).at("vectors").at(0).get<Vector>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("embedding response: ") + e.what());
    }
    if (v.size() != dimension_) {
        throw Error(ErrorCode::MalformedResponse, "embedding dimension " + std::to_string(v.size()) +
                                                      " != " + std::to_string(dimension_));
    }
    const double n = norm(v);
    if (n == 0.0) {
        throw Error(ErrorCode::MalformedResponse, "embedding service returned a zero vector");
    }
    for (auto& x : v) {
        x /= n;
    }
    return v;
}

double norm(std::span<const double> v) noexcept
{
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b) noexcept
{
    const auto n = std::min(a.size(), b.size());
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
    }
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot / (na * nb);
}

} // namespace typeforge
