#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "decitool/http.hpp"

namespace decitool {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

double l2_norm(const EmbeddingVector& v);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// Cosine similarity. Throws DimMismatch or ZeroVector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Maps text to fixed-dimension vectors. Implementations must tolerate
/// concurrent embed calls.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    /// Stable identifier; part of the cache key.
    virtual std::string id() const = 0;
    virtual std::size_t dim() const = 0;
    virtual bool deterministic() const = 0;

    virtual EmbeddingVector embed_one(std::string_view text) const = 0;
    virtual std::vector<EmbeddingVector> embed_many(std::span<const std::string> texts) const;
};

/// Checks the precondition and the output shape. Throws EmptyInput.
EmbeddingVector embed(const EmbeddingProvider& provider, std::string_view text);

/// Lowercased maximal runs of ASCII letters and digits.
std::vector<std::string> tokenize_alnum(std::string_view text);

/// Feature-hashed bag of words, L2-normalized.
class HashEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(std::size_t dim = 256);

    std::string id() const override;
    std::size_t dim() const override { return dim_; }
    bool deterministic() const override { return true; }
    /// Throws EmptyInput when the text has no tokens.
    EmbeddingVector embed_one(std::string_view text) const override;

private:
    std::size_t dim_;
};

struct RemoteEmbeddingConfig {
    std::string endpoint;
    std::string api_key;  // sent as a Bearer token when non-empty
    std::size_t dim = 0;  // 0: accept whatever the service returns, then pin it
    std::size_t batch_size = 64;
    HttpOptions http;
};

/// POST {"input": [...]} -> {"embeddings": [[...], ...]}.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit RemoteEmbeddingProvider(RemoteEmbeddingConfig config);

    std::string id() const override;
    std::size_t dim() const override;
    bool deterministic() const override { return true; }
    EmbeddingVector embed_one(std::string_view text) const override;
    std::vector<EmbeddingVector> embed_many(std::span<const std::string> texts) const override;

    const HttpTelemetry& telemetry() const { return telemetry_; }

private:
    std::vector<EmbeddingVector> request(std::span<const std::string> texts) const;

    RemoteEmbeddingConfig config_;
    mutable std::mutex dim_mutex_;
    mutable std::size_t dim_;
    mutable HttpTelemetry telemetry_;
};

/// Memoizes a provider by (provider id, text). Thread-safe.
class CachedEmbedder {
public:
    explicit CachedEmbedder(const EmbeddingProvider& provider) : provider_(provider) {}

    const EmbeddingProvider& provider() const { return provider_; }
    EmbeddingVector get(std::string_view text);
    std::vector<EmbeddingVector> get_many(std::span<const std::string> texts);

    std::size_t size() const;
    std::size_t hits() const;

private:
    std::string key(std::string_view text) const;

    const EmbeddingProvider& provider_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> cache_;
    std::size_t hits_ = 0;
};

}  // namespace decitool
