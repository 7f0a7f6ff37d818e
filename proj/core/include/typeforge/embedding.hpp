// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "typeforge/llm.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace typeforge {

using Vector = std::vector<double>;

class Embedder {
public:
    virtual ~Embedder() = default;
    /// Unit-normalized vector of `dimension()` entries. Throws EmptyText.
    virtual Vector embed(std::string_view text) const = 0;
    virtual std::size_t dimension() const noexcept = 0;
    virtual std::string id() const = 0;
};

/// Bag of identifiers and words hashed into buckets with term-frequency weights.
/// Identifiers contribute both whole and split on '_' / camelCase boundaries.
class HashedEmbedder final : public Embedder {
public:
    explicit HashedEmbedder(std::size_t dimension = 256) : dimension_(dimension) {}
    Vector embed(std::string_view text) const override;
    std::size_t dimension() const noexcept override { return dimension_; }
    std::string id() const override { return "hashed-bag-v1/" + std::to_string(dimension_); }

    static std::vector<std::string> terms(std::string_view text);

private:
    std::size_t dimension_;
};

/// External embedding service: POST {"texts": [...]} -> {"vectors": [[...]]}.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(llm::HttpEndpoint endpoint, std::shared_ptr<llm::HttpTransport> transport, std::size_t dimension);
    Vector embed(std::string_view text) const override;
    std::size_t dimension() const noexcept override { return dimension_; }
    std::string id() const override { return "http/" + endpoint_.url; }

private:
    llm::HttpEndpoint endpoint_;
    std::shared_ptr<llm::HttpTransport> transport_;
    std::size_t dimension_;
};

double cosine(std::span<const double> a, std::span<const double> b) noexcept;
double norm(std::span<const double> v) noexcept;

} // namespace typeforge
