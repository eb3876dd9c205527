#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "decitool/clustering.hpp"
#include "decitool/config.hpp"
#include "decitool/embedding.hpp"
#include "decitool/registry.hpp"

namespace decitool {

/// Unit-length description embeddings for each tool, in pool order.
std::vector<LabeledVector> embed_tools(const EmbeddingProvider& provider, std::span<const Tool> tools);

/// Attaches every tool that the model does not yet know to its nearest centroid.
void extend_clusters(ClusterModel& model, const EmbeddingProvider& provider, std::span<const Tool> tools);

int cmd_cluster(const Config& cfg, std::ostream& out);
int cmd_split_pool(const Config& cfg, std::ostream& out);
int cmd_build(const Config& cfg, std::ostream& out, std::ostream& err);
int cmd_export_sft(const Config& cfg, std::ostream& out);
int cmd_eval(const Config& cfg, std::ostream& out);
int cmd_demo(const Config& cfg, std::istream& in, std::ostream& out, std::ostream& err);

/// Parses arguments, runs the subcommand and maps errors to exit codes:
/// 0 success, 1 runtime failure, 2 configuration or IO error.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace decitool
