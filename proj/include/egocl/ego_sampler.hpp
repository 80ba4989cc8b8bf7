#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "egocl/graph_store.hpp"

namespace egocl {

inline constexpr NodeIndex kDummy = -1;

enum class SampleStrategy : uint8_t { Bfs, Rwr };

struct SamplerConfig {
    SampleStrategy strategy = SampleStrategy::Bfs;
    int ego_size = 50;
    double restart_prob = 0.5;  // RWR only
    int step_cap = 0;           // RWR only; 0 means 10 * ego_size
    uint64_t seed = 0;

    int effective_step_cap() const { return step_cap > 0 ? step_cap : 10 * ego_size; }
    void validate() const;
};

/// Fixed-size ego sample. Position 0 is always the ego; remaining slots hold
/// real node indices in extraction order, padded with kDummy. The adjacency
/// is the induced subgraph over real members plus self-loops on real members;
/// dummy rows and columns are all zero.
class EgoGraph {
public:
    EgoGraph(int task_id, NodeIndex ego, std::vector<NodeIndex> members, int real_count,
             std::vector<uint8_t> adjacency, uint8_t ego_label,
             std::shared_ptr<const Eigen::MatrixXd> features);

    int task_id() const { return task_id_; }
    NodeIndex ego_node() const { return members_[0]; }
    int size() const { return static_cast<int>(members_.size()); }
    int real_count() const { return real_count_; }
    const std::vector<NodeIndex>& members() const { return members_; }
    bool is_dummy(int slot) const { return members_[static_cast<size_t>(slot)] == kDummy; }
    uint8_t adj(int i, int j) const {
        return adjacency_[static_cast<size_t>(i) * static_cast<size_t>(members_.size()) +
                          static_cast<size_t>(j)];
    }
    const std::vector<uint8_t>& adjacency() const { return adjacency_; }
    /// Sparse view of the adjacency: slot indices adjacent to slot i
    /// (self-loop included for real members), precomputed at construction.
    std::span<const int32_t> adjacent_slots(int i) const {
        return {nbr_slots_.data() + nbr_offsets_[static_cast<size_t>(i)],
                static_cast<size_t>(nbr_offsets_[static_cast<size_t>(i) + 1] -
                                    nbr_offsets_[static_cast<size_t>(i)])};
    }
    int64_t adjacency_nnz() const { return static_cast<int64_t>(nbr_slots_.size()); }
    uint8_t ego_label() const { return ego_label_; }

    const std::shared_ptr<const Eigen::MatrixXd>& features() const { return features_; }
    bool has_features() const { return features_ != nullptr; }
    int feature_dim() const {
        return features_ ? static_cast<int>(features_->cols()) : 0;
    }
    /// Feature row for a slot; all-zero for dummies.
    Eigen::RowVectorXd member_features(int slot) const;

    int64_t memory_bytes() const;

private:
    int task_id_;
    int real_count_;
    std::vector<NodeIndex> members_;
    std::vector<uint8_t> adjacency_;
    uint8_t ego_label_;
    std::shared_ptr<const Eigen::MatrixXd> features_;
};

/// Nearest n-1 nodes by BFS distance; the partially included final ring is
/// resolved by ascending node index.
EgoGraph bfs_extract(const TaskGraph& g, NodeIndex v, const SamplerConfig& cfg,
                     std::shared_ptr<const Eigen::MatrixXd> features = nullptr);

/// Random walk with restart: each step returns to the ego with probability
/// restart_prob, else moves to a uniform random neighbor; distinct visited
/// nodes are collected until n-1 are found or the step cap elapses.
EgoGraph rwr_extract(const TaskGraph& g, NodeIndex v, const SamplerConfig& cfg,
                     std::shared_ptr<const Eigen::MatrixXd> features = nullptr);

EgoGraph extract_ego(const TaskGraph& g, NodeIndex v, const SamplerConfig& cfg,
                     std::shared_ptr<const Eigen::MatrixXd> features = nullptr);

/// One ego-graph per node carrying the given split tag, in ascending node
/// order.
std::vector<EgoGraph> extract_all(const TaskGraph& g, Split split, const SamplerConfig& cfg,
                                  std::shared_ptr<const Eigen::MatrixXd> features = nullptr);

// Dump format: CSV `task_id,ego_node,members...` (external ids, DUMMY for
// padding) plus a bitmap file of row-major n*n adjacency bits per record.
void write_ego_dump(const std::vector<EgoGraph>& egos, const TaskGraph& g,
                    const std::filesystem::path& csv_path,
                    const std::filesystem::path& bitmap_path);

struct EgoDumpRecord {
    int task_id;
    std::string ego_external;
    std::vector<std::string> member_externals;  // "DUMMY" marks padding
    std::vector<uint8_t> adjacency;
};

std::vector<EgoDumpRecord> read_ego_dump(const std::filesystem::path& csv_path,
                                         const std::filesystem::path& bitmap_path);

/// Rebuilds an EgoGraph from a dump record against its source graph.
EgoGraph ego_from_record(const EgoDumpRecord& rec, const TaskGraph& g,
                         std::shared_ptr<const Eigen::MatrixXd> features);

}  // namespace egocl
