#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "decitool/embedding.hpp"
#include "decitool/json.hpp"

namespace decitool {

struct LabeledVector {
    std::string id;
    EmbeddingVector vector;
};

struct KMeansOptions {
    std::size_t m = 30;
    std::uint64_t seed = 0;
    std::size_t max_iter = 200;
    double tol = 1e-6;
    /// Independent k-means++ restarts; the lowest-SSE fit is kept.
    std::size_t n_init = 10;
    /// Worker threads for the assignment step; results do not depend on it.
    std::size_t parallel = 1;
};

/// K-means partition of tool embeddings. Immutable once fitted, apart from
/// assign_new for tools that arrive after the fit.
class ClusterModel {
public:
    ClusterModel() = default;
    ClusterModel(std::uint64_t seed, std::vector<EmbeddingVector> centroids,
                 std::vector<std::pair<std::string, std::size_t>> assignment);

    std::size_t m() const { return centroids_.size(); }
    std::uint64_t seed() const { return seed_; }
    const std::vector<EmbeddingVector>& centroids() const { return centroids_; }
    /// Tool names in fit order with their cluster index.
    const std::vector<std::pair<std::string, std::size_t>>& assignment() const { return assignment_; }
    const std::vector<std::size_t>& sizes() const { return sizes_; }
    const std::vector<std::string>& members(std::size_t cluster) const { return members_.at(cluster); }

    bool contains(std::string_view name) const;
    /// Throws UnknownTool.
    std::size_t cluster_of(std::string_view name) const;

    /// Other clusters ordered by centroid distance from `cluster` (ties by index).
    std::vector<std::size_t> neighbours(std::size_t cluster) const;

    /// Attaches a tool that was not in the fitted set to its nearest centroid.
    std::size_t assign_new(const std::string& name, const EmbeddingVector& vector);

    /// Within-cluster sum of squared distances for the final fit, and its
    /// value after every Lloyd iteration. Not persisted.
    double sse = 0.0;
    std::vector<double> sse_history;
    std::size_t iterations = 0;

private:
    std::uint64_t seed_ = 0;
    std::vector<EmbeddingVector> centroids_;
    std::vector<std::pair<std::string, std::size_t>> assignment_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::size_t> sizes_;
    std::vector<std::vector<std::string>> members_;
};

/// Lloyd's algorithm with k-means++ seeding on the vectors as given.
/// Throws TooFewPoints (m > n or m == 0) and DimMismatch.
ClusterModel fit_kmeans(std::span<const LabeledVector> points, const KMeansOptions& options);

double within_cluster_sse(std::span<const LabeledVector> points, const ClusterModel& model);

Json to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const Json& j);
void save_clusters(const ClusterModel& model, const std::filesystem::path& path);
ClusterModel load_clusters(const std::filesystem::path& path);

}  // namespace decitool
