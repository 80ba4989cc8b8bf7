#include "egocl/feature_pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "egocl/io.hpp"
#include "egocl/rng.hpp"

namespace egocl {

void DeepWalkConfig::validate() const {
    if (dims < 1 || walks_per_node < 1 || walk_length < 1 || window < 1 || negatives < 0 ||
        epochs < 1)
        throw ConfigError("deepwalk: all counts must be positive");
    if (learning_rate <= 0) throw ConfigError("deepwalk: learning rate must be positive");
}

namespace {

using RowMajorXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::vector<NodeIndex> sample_walk(const TaskGraph& g, NodeIndex start, int length, Rng& rng) {
    std::vector<NodeIndex> walk{start};
    NodeIndex cur = start;
    for (int i = 1; i < length; ++i) {
        auto nbrs = g.neighbors(cur);
        if (nbrs.empty()) break;
        cur = nbrs[static_cast<size_t>(rng.below(nbrs.size()))];
        walk.push_back(cur);
    }
    return walk;
}

double sigmoid(double x) {
    if (x > 8.0) return 1.0;
    if (x < -8.0) return 0.0;
    return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

Eigen::MatrixXd deepwalk_train(const TaskGraph& g, const DeepWalkConfig& cfg) {
    cfg.validate();
    const NodeIndex n = g.num_nodes();

    // Initialization is a pure function of (node id, seed) so that the same
    // node gets the same starting vector regardless of graph edits.
    RowMajorXd syn0(n, cfg.dims);
    for (NodeIndex v = 0; v < n; ++v) {
        Rng init(derive_seed(cfg.seed, "dw-init", hash_tag(g.external_id(v))));
        for (int c = 0; c < cfg.dims; ++c)
            syn0(v, c) = (init.uniform01() - 0.5) / cfg.dims;
    }
    RowMajorXd syn1 = RowMajorXd::Zero(n, cfg.dims);

    // Walk corpus: walks_per_node rounds over a shuffled node order.
    std::vector<std::vector<NodeIndex>> corpus;
    corpus.reserve(static_cast<size_t>(n) * static_cast<size_t>(cfg.walks_per_node));
    std::vector<NodeIndex> order(static_cast<size_t>(n));
    for (NodeIndex v = 0; v < n; ++v) order[static_cast<size_t>(v)] = v;
    int64_t total_positions = 0;
    for (int round = 0; round < cfg.walks_per_node; ++round) {
        Rng shuf(derive_seed(cfg.seed, "dw-order", static_cast<uint64_t>(round)));
        shuf.shuffle(order);
        for (NodeIndex v : order) {
            Rng walk_rng(derive_seed(cfg.seed, "dw-walk",
                                     (static_cast<uint64_t>(round) << 32) ^
                                         static_cast<uint64_t>(static_cast<uint32_t>(v))));
            corpus.push_back(sample_walk(g, v, cfg.walk_length, walk_rng));
            total_positions += static_cast<int64_t>(corpus.back().size());
        }
    }

    // Unigram^0.75 negative table from corpus frequencies.
    std::vector<double> cum(static_cast<size_t>(n), 0.0);
    {
        std::vector<int64_t> freq(static_cast<size_t>(n), 0);
        for (const auto& w : corpus)
            for (NodeIndex v : w) ++freq[static_cast<size_t>(v)];
        double acc = 0.0;
        for (NodeIndex v = 0; v < n; ++v) {
            acc += std::pow(static_cast<double>(freq[static_cast<size_t>(v)]), 0.75);
            cum[static_cast<size_t>(v)] = acc;
        }
        if (acc <= 0.0) cum.assign(static_cast<size_t>(n), 1.0);
        else
            for (auto& c : cum) c /= acc;
    }
    auto draw_negative = [&](Rng& rng) {
        const double u = rng.uniform01();
        auto it = std::lower_bound(cum.begin(), cum.end(), u);
        return static_cast<NodeIndex>(std::distance(cum.begin(), it));
    };

    std::vector<size_t> walk_order(corpus.size());
    for (size_t i = 0; i < walk_order.size(); ++i) walk_order[i] = i;

    Eigen::VectorXd neu1e(cfg.dims);
    const double lr0 = cfg.learning_rate;
    const int64_t total_work = total_positions * cfg.epochs;
    int64_t done = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng(derive_seed(cfg.seed, "dw-epoch", static_cast<uint64_t>(epoch)));
        epoch_rng.shuffle(walk_order);
        for (size_t wi : walk_order) {
            const auto& walk = corpus[wi];
            const int len = static_cast<int>(walk.size());
            for (int pos = 0; pos < len; ++pos, ++done) {
                const double progress =
                    static_cast<double>(done) / static_cast<double>(total_work);
                const double lr = std::max(lr0 * (1.0 - progress), lr0 * 1e-4);
                const int b = 1 + static_cast<int>(epoch_rng.below(
                                      static_cast<uint64_t>(cfg.window)));
                const NodeIndex center = walk[static_cast<size_t>(pos)];
                for (int off = -b; off <= b; ++off) {
                    if (off == 0) continue;
                    const int ctx_pos = pos + off;
                    if (ctx_pos < 0 || ctx_pos >= len) continue;
                    const NodeIndex ctx = walk[static_cast<size_t>(ctx_pos)];
                    neu1e.setZero();
                    for (int s = 0; s <= cfg.negatives; ++s) {
                        NodeIndex target;
                        double label;
                        if (s == 0) {
                            target = ctx;
                            label = 1.0;
                        } else {
                            target = draw_negative(epoch_rng);
                            if (target == ctx) continue;
                            label = 0.0;
                        }
                        const double f = syn0.row(center).dot(syn1.row(target));
                        const double gcoef = (label - sigmoid(f)) * lr;
                        neu1e += gcoef * syn1.row(target).transpose();
                        syn1.row(target) += gcoef * syn0.row(center);
                    }
                    syn0.row(center) += neu1e.transpose();
                }
            }
        }
    }

    Eigen::MatrixXd out = syn0;
    if (!out.allFinite()) throw NumericError("deepwalk produced non-finite embeddings");
    return out;
}

FeatureMatrix build_features(const Eigen::MatrixXd& embeddings, const TaskGraph& g) {
    const NodeIndex n = g.num_nodes();
    if (embeddings.rows() != n)
        throw IngestError("embedding rows do not match graph node count");
    const auto& raw = g.raw_features();
    for (NodeIndex v = 0; v < n; ++v)
        for (int c = 0; c < raw.cols(); ++c)
            if (raw(v, c) < 0.0)
                throw IngestError("negative raw count for node '" + g.external_id(v) + "'");

    Eigen::MatrixXd logged = raw.unaryExpr([](double x) { return std::log1p(x); });

    auto train = g.split_nodes(Split::Train);
    if (train.empty()) throw IngestError("train split is empty");
    FeatureMatrix fm;
    fm.embedding_dims = static_cast<int>(embeddings.cols());
    fm.raw_columns = static_cast<int>(raw.cols());
    fm.x.resize(n, embeddings.cols() + raw.cols());
    fm.x.leftCols(embeddings.cols()) = embeddings;

    for (int c = 0; c < logged.cols(); ++c) {
        // two-pass mean/variance over the train split only (no test leakage)
        double mean = 0.0;
        for (NodeIndex v : train) mean += logged(v, c);
        mean /= static_cast<double>(train.size());
        double var = 0.0;
        for (NodeIndex v : train) {
            const double d = logged(v, c) - mean;
            var += d * d;
        }
        var /= static_cast<double>(train.size());
        const double sd = std::sqrt(var);
        const Eigen::Index col = embeddings.cols() + c;
        if (sd < 1e-12) {
            fm.x.col(col).setZero();
        } else {
            fm.x.col(col) = (logged.col(c).array() - mean) / sd;
        }
    }
    if (!fm.x.allFinite()) throw NumericError("non-finite entries in feature matrix");
    return fm;
}

Eigen::MatrixXd load_embeddings_csv(const std::filesystem::path& path, const TaskGraph& g) {
    std::string text = read_text_file(path);
    Eigen::MatrixXd emb;
    std::vector<uint8_t> seen(static_cast<size_t>(g.num_nodes()), 0);
    long line_no = 0;
    int dims = -1;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (nl == std::string::npos ? text.size() : nl) - pos);
        pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
        ++line_no;
        line = trim_view(line);
        if (line.empty()) continue;
        if (line.starts_with("node_id")) continue;
        auto cols = split_view(line, ',');
        if (dims < 0) {
            dims = static_cast<int>(cols.size()) - 1;
            if (dims < 1) throw ParseError(path.string(), line_no, "no embedding columns");
            emb.resize(g.num_nodes(), dims);
        }
        if (static_cast<int>(cols.size()) != dims + 1)
            throw ParseError(path.string(), line_no, "inconsistent embedding width");
        auto idx = g.find(trim_view(cols[0]));
        if (!idx)
            throw IngestError("embedding row for unknown node '" +
                              std::string(trim_view(cols[0])) + "'");
        for (int c = 0; c < dims; ++c) {
            double v = 0;
            if (!parse_double(trim_view(cols[static_cast<size_t>(c) + 1]), v))
                throw ParseError(path.string(), line_no, "malformed embedding value");
            emb(*idx, c) = v;
        }
        seen[static_cast<size_t>(*idx)] = 1;
    }
    for (NodeIndex v = 0; v < g.num_nodes(); ++v)
        if (!seen[static_cast<size_t>(v)])
            throw IngestError("no embedding row for node '" + g.external_id(v) + "'");
    return emb;
}

void write_embeddings_csv(const std::filesystem::path& path, const TaskGraph& g,
                          const Eigen::MatrixXd& embeddings) {
    std::string out = "node_id";
    for (int c = 0; c < embeddings.cols(); ++c) out += ",e" + std::to_string(c + 1);
    out += '\n';
    for (NodeIndex v = 0; v < g.num_nodes(); ++v) {
        out += g.external_id(v);
        for (int c = 0; c < embeddings.cols(); ++c) {
            out += ',';
            out += format_double(embeddings(v, c));
        }
        out += '\n';
    }
    atomic_write_file(path, out);
}

}  // namespace egocl
