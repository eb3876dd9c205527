#include "decitool/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "decitool/error.hpp"
#include "decitool/io.hpp"
#include "decitool/json.hpp"

namespace decitool {

double l2_norm(const EmbeddingVector& v) {
    double s = 0.0;
    for (double x : v.values) s += x * x;
    return std::sqrt(s);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw DimMismatch("cosine: dimensions " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) dot += a.values[i] * b.values[i];
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine: zero vector");
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

std::vector<EmbeddingVector> EmbeddingProvider::embed_many(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

EmbeddingVector embed(const EmbeddingProvider& provider, std::string_view text) {
    if (text.empty()) throw EmptyInput("embed: empty input text");
    EmbeddingVector v = provider.embed_one(text);
    if (v.dim() != provider.dim()) {
        throw DimMismatch("embed: provider returned dim " + std::to_string(v.dim()) + ", expected " +
                          std::to_string(provider.dim()));
    }
    return v;
}

std::vector<std::string> tokenize_alnum(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw InvalidArgument("hash embedding dimension must be positive");
}

std::string HashEmbeddingProvider::id() const { return "hash-bow-" + std::to_string(dim_); }

EmbeddingVector HashEmbeddingProvider::embed_one(std::string_view text) const {
    if (text.empty()) throw EmptyInput("embed: empty input text");
    const auto tokens = tokenize_alnum(text);
    if (tokens.empty()) throw EmptyInput("embed: text has no alphanumeric tokens");
    EmbeddingVector v;
    v.values.assign(dim_, 0.0);
    for (const auto& tok : tokens) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : tok) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        v.values[h % dim_] += 1.0;
    }
    const double n = l2_norm(v);
    for (double& x : v.values) x /= n;
    return v;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingConfig config)
    : config_(std::move(config)), dim_(config_.dim) {
    parse_url(config_.endpoint);
    if (config_.batch_size == 0) config_.batch_size = 1;
}

std::string RemoteEmbeddingProvider::id() const { return "remote:" + config_.endpoint; }

std::size_t RemoteEmbeddingProvider::dim() const {
    std::lock_guard lock(dim_mutex_);
    return dim_;
}

EmbeddingVector RemoteEmbeddingProvider::embed_one(std::string_view text) const {
    if (text.empty()) throw EmptyInput("embed: empty input text");
    std::string s(text);
    return request(std::span<const std::string>(&s, 1)).front();
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_many(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); i += config_.batch_size) {
        auto batch = texts.subspan(i, std::min(config_.batch_size, texts.size() - i));
        auto got = request(batch);
        for (auto& v : got) out.push_back(std::move(v));
    }
    return out;
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::request(std::span<const std::string> texts) const {
    HttpRequest req;
    req.method = "POST";
    req.url = config_.endpoint;
    req.body = Json{{"input", std::vector<std::string>(texts.begin(), texts.end())}}.dump();
    if (!config_.api_key.empty()) req.headers["Authorization"] = "Bearer " + config_.api_key;

    HttpResponse resp;
    try {
        resp = send_with_retries(req, config_.http, &telemetry_);
    } catch (const HttpError& e) {
        throw ProviderError(std::string("embedding request failed: ") + e.what(),
                            config_.http.retry.max_retries + 1, e.status());
    } catch (const BackendError& e) {
        throw ProviderError(std::string("embedding request failed: ") + e.what(),
                            config_.http.retry.max_retries + 1, 0);
    }

    Json body;
    try {
        body = parse_json(resp.body, "embedding response");
    } catch (const ParseError& e) {
        throw ProviderError(e.what(), resp.attempts, resp.status);
    }
    if (!body.is_object() || !body.contains("embeddings") || !body["embeddings"].is_array() ||
        body["embeddings"].size() != texts.size()) {
        throw ProviderError("embedding response missing 'embeddings' of the expected length", resp.attempts,
                            resp.status);
    }
    std::vector<EmbeddingVector> out;
    for (const auto& row : body["embeddings"]) {
        EmbeddingVector v;
        try {
            v.values = row.get<std::vector<double>>();
        } catch (const Json::exception&) {
            throw ProviderError("embedding row is not a numeric array", resp.attempts, resp.status);
        }
        for (double x : v.values) {
            if (!std::isfinite(x)) throw ProviderError("embedding contains a non-finite value", resp.attempts, resp.status);
        }
        {
            std::lock_guard lock(dim_mutex_);
            if (dim_ == 0) dim_ = v.dim();
            if (v.dim() != dim_ || dim_ == 0) {
                throw ProviderError("embedding has dim " + std::to_string(v.dim()) + ", expected " +
                                        std::to_string(dim_),
                                    resp.attempts, resp.status);
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::string CachedEmbedder::key(std::string_view text) const {
    std::string k = provider_.id();
    k.push_back('\0');
    k.append(text);
    return k;
}

EmbeddingVector CachedEmbedder::get(std::string_view text) {
    const std::string k = key(text);
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(k); it != cache_.end()) {
            ++hits_;
            return it->second;
        }
    }
    EmbeddingVector v = embed(provider_, text);
    std::lock_guard lock(mutex_);
    return cache_.emplace(k, std::move(v)).first->second;
}

std::vector<EmbeddingVector> CachedEmbedder::get_many(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> missing;
    std::vector<std::size_t> missing_idx;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (auto it = cache_.find(key(texts[i])); it != cache_.end()) {
                out[i] = it->second;
                ++hits_;
            } else {
                if (texts[i].empty()) throw EmptyInput("embed: empty input text");
                missing.push_back(texts[i]);
                missing_idx.push_back(i);
            }
        }
    }
    if (!missing.empty()) {
        auto fresh = provider_.embed_many(missing);
        std::lock_guard lock(mutex_);
        for (std::size_t j = 0; j < fresh.size(); ++j) {
            out[missing_idx[j]] = fresh[j];
            cache_.emplace(key(missing[j]), std::move(fresh[j]));
        }
    }
    return out;
}

std::size_t CachedEmbedder::size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

std::size_t CachedEmbedder::hits() const {
    std::lock_guard lock(mutex_);
    return hits_;
}

}  // namespace decitool
