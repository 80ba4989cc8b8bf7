#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "egocl/common.hpp"

namespace egocl {

using NodeIndex = int32_t;

enum class Split : uint8_t { Train = 0, Val = 1, Test = 2 };

const char* split_name(Split s);
std::optional<Split> split_from_name(std::string_view name);

struct GraphStats {
    int64_t num_nodes = 0;
    int64_t num_links = 0;  // undirected edges counted once
    double avg_degree = 0.0;
    double pos_label_pct = 0.0;
};

/// Count of noisy input rows that were dropped rather than rejected.
struct IngestReport {
    int64_t dropped_self_loops = 0;
    int64_t dropped_duplicate_edges = 0;
};

/// One task's social graph: undirected adjacency, per-node raw count
/// features, binary labels, and a seeded train/val/test assignment.
/// Immutable after construction; safe to share across threads.
class TaskGraph {
public:
    struct Edge {
        NodeIndex a;
        NodeIndex b;
    };

    /// Builds a validated graph from in-memory parts. `externals` fixes the
    /// node universe; edges refer to positions in `externals`. Duplicate
    /// edges and self-loops are dropped (counted in the ingest report).
    static TaskGraph build(int task_id, std::vector<std::string> externals,
                           const std::vector<Edge>& edges, Eigen::MatrixXd raw_features,
                           std::vector<uint8_t> labels, uint64_t split_seed);

    int task_id() const { return task_id_; }
    NodeIndex num_nodes() const { return static_cast<NodeIndex>(externals_.size()); }
    int64_t num_edges() const { return num_edges_; }

    std::span<const NodeIndex> neighbors(NodeIndex v) const;
    const std::string& external_id(NodeIndex v) const { return externals_[static_cast<size_t>(v)]; }
    std::optional<NodeIndex> find(std::string_view external) const;

    bool has_edge(NodeIndex a, NodeIndex b) const;

    const Eigen::MatrixXd& raw_features() const { return raw_features_; }
    int raw_columns() const { return static_cast<int>(raw_features_.cols()); }
    uint8_t label(NodeIndex v) const { return labels_[static_cast<size_t>(v)]; }
    const std::vector<uint8_t>& labels() const { return labels_; }
    Split split(NodeIndex v) const { return splits_[static_cast<size_t>(v)]; }
    std::vector<NodeIndex> split_nodes(Split s) const;

    uint64_t split_seed() const { return split_seed_; }
    const IngestReport& ingest_report() const { return report_; }

    void write_files(const std::filesystem::path& edge_file,
                     const std::filesystem::path& feature_file,
                     const std::filesystem::path& label_file) const;

private:
    TaskGraph() = default;
    void assign_splits(uint64_t seed);

    int task_id_ = 0;
    std::vector<std::string> externals_;
    std::unordered_map<std::string, NodeIndex> index_;
    std::vector<int64_t> adj_offsets_;
    std::vector<NodeIndex> adj_;
    int64_t num_edges_ = 0;
    Eigen::MatrixXd raw_features_;
    std::vector<uint8_t> labels_;
    std::vector<Split> splits_;
    uint64_t split_seed_ = 0;
    IngestReport report_;
};

/// Loads and validates one task graph from the three-file contract:
/// edge file (`src<TAB>dst`, `#` comments), feature CSV (header then
/// `node_id,f1,..`), label CSV (`node_id,label`). Splits are assigned by a
/// seeded shuffle at 75/12.5/12.5.
TaskGraph load_task_graph(int task_id, const std::filesystem::path& edge_file,
                          const std::filesystem::path& feature_file,
                          const std::filesystem::path& label_file, uint64_t seed);

GraphStats compute_stats(const TaskGraph& g);

}  // namespace egocl
