#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "egocl/ego_sampler.hpp"
#include "egocl/graph_store.hpp"

namespace egocl::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Scalar-independent structure of a forward batch: a block-diagonal stack of
/// ego-graphs, or one full task graph, with CSR neighbor lists that already
/// include self-loops. Dummy rows have empty neighbor lists and are excluded
/// from attention and loss.
struct BatchTopology {
    int32_t rows = 0;
    std::vector<int64_t> nbr_offsets;  // rows + 1
    std::vector<int32_t> nbr;
    std::vector<uint8_t> real;
    std::vector<int32_t> loss_rows;
    std::vector<int8_t> loss_group;  // parallel to loss_rows
    int num_groups = 1;

    int64_t nnz() const { return static_cast<int64_t>(nbr.size()); }
};

template <class S>
struct Batch {
    BatchTopology topo;
    Mat<S> x;                     // rows x input_dim
    std::vector<uint8_t> labels;  // parallel to topo.loss_rows
};

namespace detail {

inline void validate_support(const BatchTopology& topo) {
    for (int32_t r = 0; r < topo.rows; ++r) {
        if (topo.real[static_cast<size_t>(r)] &&
            topo.nbr_offsets[static_cast<size_t>(r) + 1] ==
                topo.nbr_offsets[static_cast<size_t>(r)])
            throw NumericError(
                "real node with empty attention support (missing self-loop) at batch row " +
                std::to_string(r));
    }
}

}  // namespace detail

/// Stacks ego-graphs into one disconnected batch graph. Loss rows are the ego
/// positions; features are gathered from each ego's attached matrix.
template <class S>
Batch<S> make_ego_batch(std::span<const EgoGraph* const> egos) {
    Batch<S> b;
    int32_t rows = 0;
    for (const EgoGraph* e : egos) rows += e->size();
    const int d = egos.empty() ? 0 : egos.front()->feature_dim();
    b.topo.rows = rows;
    b.topo.real.assign(static_cast<size_t>(rows), 0);
    b.topo.nbr_offsets.assign(static_cast<size_t>(rows) + 1, 0);
    b.x = Mat<S>::Zero(rows, d);

    int64_t nnz = 0;
    for (const EgoGraph* e : egos) {
        const int n = e->size();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) nnz += e->adj(i, j) != 0;
    }
    b.topo.nbr.reserve(static_cast<size_t>(nnz));

    int32_t base = 0;
    for (const EgoGraph* e : egos) {
        if (!e->has_features() || e->feature_dim() != d)
            throw ConfigError("batched ego-graphs must share a feature dimension");
        const int n = e->size();
        const Eigen::MatrixXd& feats = *e->features();
        for (int i = 0; i < n; ++i) {
            const int32_t r = base + i;
            NodeIndex v = e->members()[static_cast<size_t>(i)];
            if (v != kDummy) {
                b.topo.real[static_cast<size_t>(r)] = 1;
                b.x.row(r) = feats.row(v).template cast<S>();
            }
            for (int j = 0; j < n; ++j)
                if (e->adj(i, j)) b.topo.nbr.push_back(base + j);
            b.topo.nbr_offsets[static_cast<size_t>(r) + 1] =
                static_cast<int64_t>(b.topo.nbr.size());
        }
        b.topo.loss_rows.push_back(base);
        b.topo.loss_group.push_back(0);
        b.labels.push_back(e->ego_label());
        base += n;
    }
    detail::validate_support(b.topo);
    return b;
}

/// Whole task graph as one batch (self-loops added on every node); the loss
/// rows are the given node list.
template <class S>
Batch<S> make_full_batch(const TaskGraph& g, const Eigen::MatrixXd& features,
                         std::span<const NodeIndex> loss_nodes) {
    Batch<S> b;
    const int32_t n = g.num_nodes();
    b.topo.rows = n;
    b.topo.real.assign(static_cast<size_t>(n), 1);
    b.topo.nbr_offsets.assign(static_cast<size_t>(n) + 1, 0);
    b.x = features.cast<S>();
    b.topo.nbr.reserve(static_cast<size_t>(2 * g.num_edges() + n));
    for (NodeIndex v = 0; v < n; ++v) {
        bool self_inserted = false;
        for (NodeIndex u : g.neighbors(v)) {
            if (!self_inserted && u > v) {
                b.topo.nbr.push_back(v);
                self_inserted = true;
            }
            b.topo.nbr.push_back(u);
        }
        if (!self_inserted) b.topo.nbr.push_back(v);
        b.topo.nbr_offsets[static_cast<size_t>(v) + 1] = static_cast<int64_t>(b.topo.nbr.size());
    }
    for (NodeIndex v : loss_nodes) {
        b.topo.loss_rows.push_back(v);
        b.topo.loss_group.push_back(0);
        b.labels.push_back(g.label(v));
    }
    return b;
}

/// Appends stored feature/label rows as isolated self-loop-only nodes in a
/// separate loss group (the auxiliary replay term).
template <class S>
void append_singleton_rows(Batch<S>& b, const Eigen::MatrixXd& rows,
                           std::span<const uint8_t> labels, int8_t group) {
    const auto extra = static_cast<int32_t>(rows.rows());
    if (extra == 0) return;
    if (b.topo.nbr_offsets.empty()) b.topo.nbr_offsets.push_back(0);
    const int32_t old_rows = b.topo.rows;
    Mat<S> x(old_rows + extra, b.x.cols());
    x.topRows(old_rows) = b.x;
    x.bottomRows(extra) = rows.cast<S>();
    b.x = std::move(x);
    for (int32_t i = 0; i < extra; ++i) {
        const int32_t r = old_rows + i;
        b.topo.real.push_back(1);
        b.topo.nbr.push_back(r);
        b.topo.nbr_offsets.push_back(static_cast<int64_t>(b.topo.nbr.size()));
        b.topo.loss_rows.push_back(r);
        b.topo.loss_group.push_back(group);
        b.labels.push_back(labels[static_cast<size_t>(i)]);
    }
    b.topo.rows += extra;
    if (group + 1 > b.topo.num_groups) b.topo.num_groups = group + 1;
}

/// Symmetric normalization weights for GCN aggregation over the self-looped
/// support: w_ij = 1/sqrt(d_i * d_j) with d the self-inclusive degree of
/// real nodes.
template <class S>
std::vector<S> gcn_weights(const BatchTopology& topo) {
    std::vector<double> inv_sqrt(static_cast<size_t>(topo.rows), 0.0);
    for (int32_t r = 0; r < topo.rows; ++r) {
        const auto deg = topo.nbr_offsets[static_cast<size_t>(r) + 1] -
                         topo.nbr_offsets[static_cast<size_t>(r)];
        if (deg > 0) inv_sqrt[static_cast<size_t>(r)] = 1.0 / std::sqrt(static_cast<double>(deg));
    }
    std::vector<S> w(topo.nbr.size());
    for (int32_t r = 0; r < topo.rows; ++r)
        for (int64_t e = topo.nbr_offsets[static_cast<size_t>(r)];
             e < topo.nbr_offsets[static_cast<size_t>(r) + 1]; ++e)
            w[static_cast<size_t>(e)] = static_cast<S>(
                inv_sqrt[static_cast<size_t>(r)] *
                inv_sqrt[static_cast<size_t>(topo.nbr[static_cast<size_t>(e)])]);
    return w;
}

}  // namespace egocl::nn
