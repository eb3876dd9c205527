#include "decitool/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>

#include "decitool/error.hpp"
#include "decitool/io.hpp"
#include "decitool/rng.hpp"

namespace decitool {

ClusterModel::ClusterModel(std::uint64_t seed, std::vector<EmbeddingVector> centroids,
                           std::vector<std::pair<std::string, std::size_t>> assignment)
    : seed_(seed), centroids_(std::move(centroids)), sizes_(centroids_.size(), 0), members_(centroids_.size()) {
    for (std::size_t c = 1; c < centroids_.size(); ++c) {
        if (centroids_[c].dim() != centroids_[0].dim()) throw DimMismatch("cluster model: centroid dims differ");
    }
    for (auto& [name, idx] : assignment) {
        if (idx >= centroids_.size()) {
            throw ValidationError("cluster model: tool '" + name + "' assigned to cluster " + std::to_string(idx) +
                                  " but m = " + std::to_string(centroids_.size()));
        }
        if (!index_.emplace(name, idx).second) {
            throw ValidationError("cluster model: tool '" + name + "' assigned twice");
        }
        ++sizes_[idx];
        members_[idx].push_back(name);
        assignment_.emplace_back(std::move(name), idx);
    }
}

bool ClusterModel::contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

std::size_t ClusterModel::cluster_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw UnknownTool("tool '" + std::string(name) + "' is not in the cluster model");
    return it->second;
}

std::vector<std::size_t> ClusterModel::neighbours(std::size_t cluster) const {
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t c = 0; c < m(); ++c) {
        if (c == cluster) continue;
        order.emplace_back(squared_distance(centroids_[cluster].values, centroids_[c].values), c);
    }
    std::sort(order.begin(), order.end());
    std::vector<std::size_t> out;
    out.reserve(order.size());
    for (const auto& [d, c] : order) out.push_back(c);
    return out;
}

std::size_t ClusterModel::assign_new(const std::string& name, const EmbeddingVector& vector) {
    if (contains(name)) return cluster_of(name);
    if (centroids_.empty()) throw ValidationError("cluster model has no centroids");
    if (vector.dim() != centroids_[0].dim()) throw DimMismatch("assign_new: vector dim differs from centroids");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m(); ++c) {
        const double d = squared_distance(vector.values, centroids_[c].values);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    index_.emplace(name, best);
    assignment_.emplace_back(name, best);
    ++sizes_[best];
    members_[best].push_back(name);
    return best;
}

namespace {

using Centroids = std::vector<std::vector<double>>;

std::size_t nearest(std::span<const double> x, const Centroids& centroids, double* dist_out) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(x, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (dist_out) *dist_out = best_d;
    return best;
}

void assign_all(std::span<const LabeledVector> points, const Centroids& centroids, std::vector<std::size_t>& assign,
                std::vector<double>& dist, std::size_t parallel) {
    const std::size_t n = points.size();
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) assign[i] = nearest(points[i].vector.values, centroids, &dist[i]);
    };
    const std::size_t threads = std::clamp<std::size_t>(parallel, 1, std::max<std::size_t>(1, n / 64));
    if (threads <= 1) {
        work(0, n);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t b = t * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
}

Centroids seed_plus_plus(std::span<const LabeledVector> points, std::size_t m, Rng& rng) {
    const std::size_t n = points.size();
    Centroids centroids;
    std::vector<bool> chosen(n, false);
    std::size_t first = rng.uniform_index(n);
    chosen[first] = true;
    centroids.push_back(points[first].vector.values);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i].vector.values, centroids[0]);

    while (centroids.size() < m) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!chosen[i]) total += d2[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = rng.uniform_real() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (chosen[i] || d2[i] <= 0.0) continue;
                acc += d2[i];
                pick = i;
                if (r < acc) break;
            }
        }
        if (pick == n) {
            // Every remaining point coincides with a chosen centre.
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < n; ++i) {
                if (!chosen[i]) rest.push_back(i);
            }
            pick = rest[rng.uniform_index(rest.size())];
        }
        chosen[pick] = true;
        centroids.push_back(points[pick].vector.values);
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(points[i].vector.values, centroids.back()));
        }
    }
    return centroids;
}

// Gives every empty cluster the point farthest from its own centroid, taken
// from a cluster that keeps at least one member.
void repair_empty(std::span<const LabeledVector> points, Centroids& centroids, std::vector<std::size_t>& assign,
                  std::vector<double>& dist) {
    const std::size_t m = centroids.size();
    std::vector<std::size_t> counts(m, 0);
    for (std::size_t a : assign) ++counts[a];
    for (std::size_t c = 0; c < m; ++c) {
        if (counts[c] > 0) continue;
        std::size_t far = points.size();
        double far_d = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (counts[assign[i]] > 1 && dist[i] > far_d) {
                far_d = dist[i];
                far = i;
            }
        }
        if (far == points.size()) break;
        --counts[assign[far]];
        assign[far] = c;
        ++counts[c];
        dist[far] = 0.0;
        centroids[c] = points[far].vector.values;
    }
}

ClusterModel lloyd(std::span<const LabeledVector> points, const KMeansOptions& options, std::uint64_t run_seed) {
    const std::size_t n = points.size();
    const std::size_t m = options.m;
    const std::size_t dim = points[0].vector.dim();
    Rng rng(run_seed);
    Centroids centroids = seed_plus_plus(points, m, rng);
    std::vector<std::size_t> assign(n, 0);
    std::vector<double> dist(n, 0.0);
    std::vector<double> history;
    std::size_t iterations = 0;
    double sse = 0.0;

    for (std::size_t iter = 0; iter < std::max<std::size_t>(1, options.max_iter); ++iter) {
        ++iterations;
        assign_all(points, centroids, assign, dist, options.parallel);
        repair_empty(points, centroids, assign, dist);

        Centroids next(m, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(m, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& acc = next[assign[i]];
            const auto& x = points[i].vector.values;
            for (std::size_t d = 0; d < dim; ++d) acc[d] += x[d];
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < m; ++c) {
            if (counts[c] == 0) {
                next[c] = centroids[c];
                continue;
            }
            for (double& v : next[c]) v /= static_cast<double>(counts[c]);
        }

        sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) sse += squared_distance(points[i].vector.values, next[assign[i]]);
        history.push_back(sse);

        double shift = 0.0;
        for (std::size_t c = 0; c < m; ++c) shift = std::max(shift, std::sqrt(squared_distance(centroids[c], next[c])));
        centroids = std::move(next);
        if (shift < options.tol) break;
    }

    std::vector<EmbeddingVector> cents;
    cents.reserve(m);
    for (auto& c : centroids) cents.push_back(EmbeddingVector{std::move(c)});
    std::vector<std::pair<std::string, std::size_t>> assignment;
    assignment.reserve(n);
    for (std::size_t i = 0; i < n; ++i) assignment.emplace_back(points[i].id, assign[i]);

    ClusterModel model(options.seed, std::move(cents), std::move(assignment));
    model.sse = sse;
    model.sse_history = std::move(history);
    model.iterations = iterations;
    return model;
}

}  // namespace

ClusterModel fit_kmeans(std::span<const LabeledVector> points, const KMeansOptions& options) {
    const std::size_t n = points.size();
    const std::size_t m = options.m;
    if (m == 0) throw TooFewPoints("k-means: m must be at least 1");
    if (m > n) {
        throw TooFewPoints("k-means: m = " + std::to_string(m) + " exceeds number of points " + std::to_string(n));
    }
    const std::size_t dim = points[0].vector.dim();
    if (dim == 0) throw DimMismatch("k-means: zero-dimensional vectors");
    for (const auto& p : points) {
        if (p.vector.dim() != dim) throw DimMismatch("k-means: vector '" + p.id + "' has a different dimension");
    }

    std::optional<ClusterModel> best;
    for (std::size_t run = 0; run < std::max<std::size_t>(1, options.n_init); ++run) {
        ClusterModel model = lloyd(points, options, derive_seed(options.seed, static_cast<std::uint64_t>(run)));
        if (!best || model.sse < best->sse) best = std::move(model);
    }
    return std::move(*best);
}

double within_cluster_sse(std::span<const LabeledVector> points, const ClusterModel& model) {
    double sse = 0.0;
    for (const auto& p : points) {
        sse += squared_distance(p.vector.values, model.centroids()[model.cluster_of(p.id)].values);
    }
    return sse;
}

Json to_json(const ClusterModel& model) {
    Json centroids = Json::array();
    for (const auto& c : model.centroids()) centroids.push_back(c.values);
    Json assignment = Json::object();
    for (const auto& [name, idx] : model.assignment()) assignment[name] = idx;
    return Json{{"m", model.m()}, {"seed", model.seed()}, {"centroids", centroids}, {"assignment", assignment}};
}

ClusterModel cluster_model_from_json(const Json& j) {
    try {
        const auto m = j.at("m").get<std::size_t>();
        const auto seed = j.at("seed").get<std::uint64_t>();
        std::vector<EmbeddingVector> centroids;
        for (const auto& row : j.at("centroids")) centroids.push_back(EmbeddingVector{row.get<std::vector<double>>()});
        if (centroids.size() != m) {
            throw ValidationError("cluster model: m = " + std::to_string(m) + " but " +
                                  std::to_string(centroids.size()) + " centroids");
        }
        std::vector<std::pair<std::string, std::size_t>> assignment;
        for (const auto& [name, idx] : j.at("assignment").items()) assignment.emplace_back(name, idx.get<std::size_t>());
        return ClusterModel(seed, std::move(centroids), std::move(assignment));
    } catch (const Json::exception& e) {
        throw ParseError(std::string("cluster model: ") + e.what());
    }
}

void save_clusters(const ClusterModel& model, const std::filesystem::path& path) {
    write_text_file(path, to_json(model).dump() + "\n");
}

ClusterModel load_clusters(const std::filesystem::path& path) {
    return cluster_model_from_json(parse_json(read_text_file(path), path.string()));
}

}  // namespace decitool
