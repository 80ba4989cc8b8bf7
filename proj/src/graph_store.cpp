#include "egocl/graph_store.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "egocl/io.hpp"
#include "egocl/rng.hpp"

namespace egocl {

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

std::optional<Split> split_from_name(std::string_view name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    return std::nullopt;
}

namespace {

bool all_numeric(const std::vector<std::string>& ids, std::vector<uint64_t>& values) {
    values.resize(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        const std::string& s = ids[i];
        if (s.empty()) return false;
        uint64_t v = 0;
        const char* b = s.data();
        const char* e = s.data() + s.size();
        auto [p, ec] = std::from_chars(b, e, v);
        if (ec != std::errc() || p != e) return false;
        values[i] = v;
    }
    return true;
}

// Canonical node order: numeric when every id is a decimal integer,
// lexicographic otherwise. Internal indices are assigned in this order, so
// they do not depend on file line order.
std::vector<size_t> canonical_order(const std::vector<std::string>& ids) {
    std::vector<size_t> order(ids.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<uint64_t> values;
    if (all_numeric(ids, values)) {
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (values[a] != values[b]) return values[a] < values[b];
            return ids[a] < ids[b];
        });
    } else {
        std::sort(order.begin(), order.end(),
                  [&](size_t a, size_t b) { return ids[a] < ids[b]; });
    }
    return order;
}

}  // namespace

TaskGraph TaskGraph::build(int task_id, std::vector<std::string> externals,
                           const std::vector<Edge>& edges, Eigen::MatrixXd raw_features,
                           std::vector<uint8_t> labels, uint64_t split_seed) {
    const auto n = static_cast<NodeIndex>(externals.size());
    if (n == 0) throw IngestError("empty graph: no nodes");
    if (raw_features.rows() != n || labels.size() != externals.size())
        throw IngestError("node count mismatch between features/labels and node set");
    if (raw_features.cols() != 3 && raw_features.cols() != 4)
        throw IngestError("feature matrix must have 3 or 4 raw columns, got " +
                          std::to_string(raw_features.cols()));
    for (NodeIndex v = 0; v < n; ++v) {
        if (labels[static_cast<size_t>(v)] > 1)
            throw IngestError("label for node '" + externals[static_cast<size_t>(v)] +
                              "' must be 0 or 1");
        for (int c = 0; c < raw_features.cols(); ++c) {
            double x = raw_features(v, c);
            if (!std::isfinite(x) || x < 0.0)
                throw IngestError("negative or non-finite raw count for node '" +
                                  externals[static_cast<size_t>(v)] + "'");
        }
    }

    TaskGraph g;
    g.task_id_ = task_id;
    g.externals_ = std::move(externals);
    g.raw_features_ = std::move(raw_features);
    g.labels_ = std::move(labels);
    g.index_.reserve(g.externals_.size());
    for (NodeIndex v = 0; v < n; ++v) {
        auto [it, inserted] = g.index_.emplace(g.externals_[static_cast<size_t>(v)], v);
        if (!inserted)
            throw IngestError("duplicate node id '" + g.externals_[static_cast<size_t>(v)] + "'");
    }

    // Dedup prior to CSR assembly. Self-loops and duplicates are dropped,
    // not rejected: raw mention dumps contain both.
    std::vector<std::pair<NodeIndex, NodeIndex>> canon;
    canon.reserve(edges.size());
    for (const Edge& e : edges) {
        if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n)
            throw IngestError("edge endpoint index out of range");
        if (e.a == e.b) {
            ++g.report_.dropped_self_loops;
            continue;
        }
        canon.emplace_back(std::min(e.a, e.b), std::max(e.a, e.b));
    }
    std::sort(canon.begin(), canon.end());
    auto last = std::unique(canon.begin(), canon.end());
    g.report_.dropped_duplicate_edges =
        static_cast<int64_t>(std::distance(last, canon.end()));
    canon.erase(last, canon.end());
    g.num_edges_ = static_cast<int64_t>(canon.size());

    std::vector<int32_t> degree(static_cast<size_t>(n), 0);
    for (auto [a, b] : canon) {
        ++degree[static_cast<size_t>(a)];
        ++degree[static_cast<size_t>(b)];
    }
    g.adj_offsets_.assign(static_cast<size_t>(n) + 1, 0);
    for (NodeIndex v = 0; v < n; ++v)
        g.adj_offsets_[static_cast<size_t>(v) + 1] =
            g.adj_offsets_[static_cast<size_t>(v)] + degree[static_cast<size_t>(v)];
    g.adj_.resize(static_cast<size_t>(g.adj_offsets_.back()));
    std::vector<int64_t> cursor(g.adj_offsets_.begin(), g.adj_offsets_.end() - 1);
    for (auto [a, b] : canon) {
        g.adj_[static_cast<size_t>(cursor[static_cast<size_t>(a)]++)] = b;
        g.adj_[static_cast<size_t>(cursor[static_cast<size_t>(b)]++)] = a;
    }
    for (NodeIndex v = 0; v < n; ++v) {
        auto begin = g.adj_.begin() + g.adj_offsets_[static_cast<size_t>(v)];
        auto end = g.adj_.begin() + g.adj_offsets_[static_cast<size_t>(v) + 1];
        std::sort(begin, end);
    }

    g.assign_splits(split_seed);
    return g;
}

void TaskGraph::assign_splits(uint64_t seed) {
    split_seed_ = seed;
    const auto n = num_nodes();
    const auto n_train = static_cast<NodeIndex>(std::llround(0.75 * n));
    const auto n_val = static_cast<NodeIndex>(std::llround(0.125 * n));
    std::vector<NodeIndex> order(static_cast<size_t>(n));
    for (NodeIndex v = 0; v < n; ++v) order[static_cast<size_t>(v)] = v;
    Rng rng(derive_seed(seed, "splits"));
    rng.shuffle(order);
    splits_.assign(static_cast<size_t>(n), Split::Test);
    for (NodeIndex i = 0; i < n; ++i) {
        Split s = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
        splits_[static_cast<size_t>(order[static_cast<size_t>(i)])] = s;
    }
}

std::span<const NodeIndex> TaskGraph::neighbors(NodeIndex v) const {
    if (v < 0 || v >= num_nodes())
        throw IngestError("unknown node index " + std::to_string(v));
    auto b = static_cast<size_t>(adj_offsets_[static_cast<size_t>(v)]);
    auto e = static_cast<size_t>(adj_offsets_[static_cast<size_t>(v) + 1]);
    return {adj_.data() + b, e - b};
}

std::optional<NodeIndex> TaskGraph::find(std::string_view external) const {
    auto it = index_.find(std::string(external));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool TaskGraph::has_edge(NodeIndex a, NodeIndex b) const {
    auto nb = neighbors(a);
    return std::binary_search(nb.begin(), nb.end(), b);
}

std::vector<NodeIndex> TaskGraph::split_nodes(Split s) const {
    std::vector<NodeIndex> out;
    for (NodeIndex v = 0; v < num_nodes(); ++v)
        if (splits_[static_cast<size_t>(v)] == s) out.push_back(v);
    return out;
}

void TaskGraph::write_files(const std::filesystem::path& edge_file,
                            const std::filesystem::path& feature_file,
                            const std::filesystem::path& label_file) const {
    std::string edges;
    edges.reserve(static_cast<size_t>(num_edges_) * 16);
    for (NodeIndex v = 0; v < num_nodes(); ++v) {
        for (NodeIndex u : neighbors(v)) {
            if (u <= v) continue;
            edges += externals_[static_cast<size_t>(v)];
            edges += '\t';
            edges += externals_[static_cast<size_t>(u)];
            edges += '\n';
        }
    }
    atomic_write_file(edge_file, edges);

    std::string feats = "node_id";
    for (int c = 0; c < raw_columns(); ++c) feats += ",f" + std::to_string(c + 1);
    feats += '\n';
    for (NodeIndex v = 0; v < num_nodes(); ++v) {
        feats += externals_[static_cast<size_t>(v)];
        for (int c = 0; c < raw_columns(); ++c) {
            feats += ',';
            feats += format_double(raw_features_(v, c));
        }
        feats += '\n';
    }
    atomic_write_file(feature_file, feats);

    std::string labels = "node_id,label\n";
    for (NodeIndex v = 0; v < num_nodes(); ++v) {
        labels += externals_[static_cast<size_t>(v)];
        labels += ',';
        labels += static_cast<char>('0' + labels_[static_cast<size_t>(v)]);
        labels += '\n';
    }
    atomic_write_file(label_file, labels);
}

namespace {

struct LabelFile {
    std::vector<std::string> ids;
    std::vector<uint8_t> labels;
};

LabelFile parse_label_file(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    LabelFile out;
    long line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (nl == std::string::npos ? text.size() : nl) - pos);
        pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
        ++line_no;
        line = trim_view(line);
        if (line.empty()) continue;
        if (line_no == 1 && line.starts_with("node_id")) continue;
        auto cols = split_view(line, ',');
        if (cols.size() != 2)
            throw ParseError(path.string(), line_no, "expected 'node_id,label'");
        int64_t lab = -1;
        if (!parse_int64(trim_view(cols[1]), lab) || (lab != 0 && lab != 1))
            throw ParseError(path.string(), line_no, "label must be 0 or 1");
        out.ids.emplace_back(trim_view(cols[0]));
        out.labels.push_back(static_cast<uint8_t>(lab));
    }
    return out;
}

struct FeatureFile {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    int cols = 0;
};

FeatureFile parse_feature_file(const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    FeatureFile out;
    long line_no = 0;
    bool saw_header = false;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (nl == std::string::npos ? text.size() : nl) - pos);
        pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
        ++line_no;
        line = trim_view(line);
        if (line.empty()) continue;
        auto cols = split_view(line, ',');
        if (!saw_header) {
            // header row is required by the contract
            saw_header = true;
            if (cols.size() < 4 || cols.size() > 5)
                throw ParseError(path.string(), line_no,
                                 "feature header must be node_id,f1,f2,f3[,f4]");
            out.cols = static_cast<int>(cols.size()) - 1;
            continue;
        }
        if (static_cast<int>(cols.size()) != out.cols + 1)
            throw ParseError(path.string(), line_no, "wrong number of feature columns");
        std::vector<double> row(static_cast<size_t>(out.cols));
        for (int c = 0; c < out.cols; ++c) {
            double v = 0;
            if (!parse_double(trim_view(cols[static_cast<size_t>(c) + 1]), v))
                throw ParseError(path.string(), line_no, "malformed feature value");
            row[static_cast<size_t>(c)] = v;
        }
        out.ids.emplace_back(trim_view(cols[0]));
        out.rows.push_back(std::move(row));
    }
    if (!saw_header) throw ParseError(path.string(), 1, "missing feature header row");
    return out;
}

std::vector<std::pair<std::string, std::string>> parse_edge_file(
    const std::filesystem::path& path) {
    std::string text = read_text_file(path);
    std::vector<std::pair<std::string, std::string>> out;
    long line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (nl == std::string::npos ? text.size() : nl) - pos);
        pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
        ++line_no;
        line = trim_view(line);
        if (line.empty() || line[0] == '#') continue;
        auto cols = split_view(line, '\t');
        if (cols.size() != 2 || trim_view(cols[0]).empty() || trim_view(cols[1]).empty())
            throw ParseError(path.string(), line_no, "expected 'src<TAB>dst'");
        out.emplace_back(trim_view(cols[0]), trim_view(cols[1]));
    }
    return out;
}

}  // namespace

TaskGraph load_task_graph(int task_id, const std::filesystem::path& edge_file,
                          const std::filesystem::path& feature_file,
                          const std::filesystem::path& label_file, uint64_t seed) {
    LabelFile labels = parse_label_file(label_file);
    if (labels.ids.empty()) throw IngestError("empty graph: label file has no nodes");
    FeatureFile feats = parse_feature_file(feature_file);
    auto edges = parse_edge_file(edge_file);

    std::unordered_map<std::string, size_t> label_pos;
    label_pos.reserve(labels.ids.size());
    for (size_t i = 0; i < labels.ids.size(); ++i) {
        if (!label_pos.emplace(labels.ids[i], i).second)
            throw IngestError("duplicate label row for node '" + labels.ids[i] + "'");
    }
    std::unordered_map<std::string, size_t> feat_pos;
    feat_pos.reserve(feats.ids.size());
    for (size_t i = 0; i < feats.ids.size(); ++i) {
        if (!feat_pos.emplace(feats.ids[i], i).second)
            throw IngestError("duplicate feature row for node '" + feats.ids[i] + "'");
        if (!label_pos.count(feats.ids[i]))
            throw IngestError("feature row for node '" + feats.ids[i] +
                              "' missing from label file");
    }
    for (const auto& id : labels.ids)
        if (!feat_pos.count(id))
            throw IngestError("node '" + id + "' missing from feature file");

    auto order = canonical_order(labels.ids);
    std::vector<std::string> externals(labels.ids.size());
    std::vector<uint8_t> node_labels(labels.ids.size());
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(labels.ids.size()), feats.cols);
    std::unordered_map<std::string, NodeIndex> index;
    index.reserve(labels.ids.size());
    for (size_t i = 0; i < order.size(); ++i) {
        const std::string& id = labels.ids[order[i]];
        externals[i] = id;
        node_labels[i] = labels.labels[order[i]];
        const auto& row = feats.rows[feat_pos[id]];
        for (int c = 0; c < feats.cols; ++c)
            raw(static_cast<Eigen::Index>(i), c) = row[static_cast<size_t>(c)];
        index.emplace(id, static_cast<NodeIndex>(i));
    }

    std::vector<TaskGraph::Edge> internal_edges;
    internal_edges.reserve(edges.size());
    for (const auto& [a, b] : edges) {
        auto ia = index.find(a);
        if (ia == index.end())
            throw IngestError("edge endpoint '" + a + "' missing from label/feature files");
        auto ib = index.find(b);
        if (ib == index.end())
            throw IngestError("edge endpoint '" + b + "' missing from label/feature files");
        internal_edges.push_back({ia->second, ib->second});
    }

    return TaskGraph::build(task_id, std::move(externals), internal_edges, std::move(raw),
                            std::move(node_labels), seed);
}

GraphStats compute_stats(const TaskGraph& g) {
    GraphStats s;
    s.num_nodes = g.num_nodes();
    s.num_links = g.num_edges();
    s.avg_degree = s.num_nodes ? 2.0 * static_cast<double>(s.num_links) /
                                     static_cast<double>(s.num_nodes)
                               : 0.0;
    int64_t pos = 0;
    for (uint8_t l : g.labels()) pos += l;
    s.pos_label_pct = s.num_nodes ? 100.0 * static_cast<double>(pos) /
                                        static_cast<double>(s.num_nodes)
                                  : 0.0;
    return s;
}

}  // namespace egocl
