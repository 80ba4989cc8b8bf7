#pragma once

#include <Eigen/Dense>
#include <filesystem>

#include "egocl/graph_store.hpp"

namespace egocl {

struct DeepWalkConfig {
    int dims = 64;
    int walks_per_node = 10;
    int walk_length = 40;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    double learning_rate = 0.025;
    uint64_t seed = 1;

    void validate() const;
};

/// Skip-gram-with-negative-sampling embeddings over truncated random walks.
/// Deterministic for a fixed (graph, config); isolated nodes keep their
/// initialization. Returns |V| x dims.
Eigen::MatrixXd deepwalk_train(const TaskGraph& g, const DeepWalkConfig& cfg);

struct FeatureMatrix {
    Eigen::MatrixXd x;  // |V| x (dims + raw columns)
    int embedding_dims = 0;
    int raw_columns = 0;

    int dim() const { return static_cast<int>(x.cols()); }
};

/// X = [embeddings | z-scored log1p(raw counts)]. Standardization statistics
/// come from the train split only and are applied to every split.
FeatureMatrix build_features(const Eigen::MatrixXd& embeddings, const TaskGraph& g);

/// Reads `node_id,e1..eD` CSV (optional header) covering every node of g.
Eigen::MatrixXd load_embeddings_csv(const std::filesystem::path& path, const TaskGraph& g);

void write_embeddings_csv(const std::filesystem::path& path, const TaskGraph& g,
                          const Eigen::MatrixXd& embeddings);

}  // namespace egocl
