#include "egocl/ego_sampler.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "egocl/io.hpp"
#include "egocl/rng.hpp"

namespace egocl {

void SamplerConfig::validate() const {
    if (ego_size < 1) throw ConfigError("sampler: ego_size must be >= 1");
    if (strategy == SampleStrategy::Rwr) {
        if (!(restart_prob > 0.0 && restart_prob <= 1.0))
            throw ConfigError("sampler: restart_prob must be in (0, 1]");
        if (step_cap != 0 && step_cap < ego_size)
            throw ConfigError("sampler: step_cap must be >= ego_size");
    }
}

EgoGraph::EgoGraph(int task_id, NodeIndex ego, std::vector<NodeIndex> members, int real_count,
                   std::vector<uint8_t> adjacency, uint8_t ego_label,
                   std::shared_ptr<const Eigen::MatrixXd> features)
    : task_id_(task_id),
      real_count_(real_count),
      members_(std::move(members)),
      adjacency_(std::move(adjacency)),
      ego_label_(ego_label),
      features_(std::move(features)) {
    (void)ego;
}

Eigen::RowVectorXd EgoGraph::member_features(int slot) const {
    if (!features_) throw ConfigError("ego-graph has no attached feature matrix");
    NodeIndex v = members_[static_cast<size_t>(slot)];
    if (v == kDummy) return Eigen::RowVectorXd::Zero(features_->cols());
    return features_->row(v);
}

int64_t EgoGraph::memory_bytes() const {
    return static_cast<int64_t>(sizeof(EgoGraph)) +
           static_cast<int64_t>(members_.capacity() * sizeof(NodeIndex)) +
           static_cast<int64_t>(adjacency_.capacity());
}

namespace {

// Shared tail: fill members to size n, build induced adjacency + self-loops.
EgoGraph finalize_ego(const TaskGraph& g, NodeIndex ego, std::vector<NodeIndex> real_members,
                      int n, std::shared_ptr<const Eigen::MatrixXd> features) {
    const int real = static_cast<int>(real_members.size());
    std::vector<NodeIndex> members = std::move(real_members);
    members.resize(static_cast<size_t>(n), kDummy);

    std::unordered_map<NodeIndex, int> slot_of;
    slot_of.reserve(static_cast<size_t>(real));
    for (int i = 0; i < real; ++i) slot_of.emplace(members[static_cast<size_t>(i)], i);

    std::vector<uint8_t> adj(static_cast<size_t>(n) * static_cast<size_t>(n), 0);
    for (int i = 0; i < real; ++i) {
        adj[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(i)] = 1;
        for (NodeIndex u : g.neighbors(members[static_cast<size_t>(i)])) {
            auto it = slot_of.find(u);
            if (it == slot_of.end()) continue;
            adj[static_cast<size_t>(i) * static_cast<size_t>(n) +
                static_cast<size_t>(it->second)] = 1;
        }
    }
    return EgoGraph(g.task_id(), ego, std::move(members), real, std::move(adj), g.label(ego),
                    std::move(features));
}

}  // namespace

EgoGraph bfs_extract(const TaskGraph& g, NodeIndex v, const SamplerConfig& cfg,
                     std::shared_ptr<const Eigen::MatrixXd> features) {
    cfg.validate();
    if (v < 0 || v >= g.num_nodes())
        throw IngestError("bfs_extract: unknown node index " + std::to_string(v));
    const int n = cfg.ego_size;
    std::vector<NodeIndex> members{v};
    members.reserve(static_cast<size_t>(n));

    std::vector<uint8_t> seen(static_cast<size_t>(g.num_nodes()), 0);
    seen[static_cast<size_t>(v)] = 1;
    std::vector<NodeIndex> ring{v};
    while (static_cast<int>(members.size()) < n && !ring.empty()) {
        // Next ring: all unseen neighbors of the current ring, ascending.
        std::vector<NodeIndex> next;
        for (NodeIndex u : ring)
            for (NodeIndex w : g.neighbors(u))
                if (!seen[static_cast<size_t>(w)]) {
                    seen[static_cast<size_t>(w)] = 1;
                    next.push_back(w);
                }
        std::sort(next.begin(), next.end());
        const int room = n - static_cast<int>(members.size());
        if (static_cast<int>(next.size()) > room) next.resize(static_cast<size_t>(room));
        members.insert(members.end(), next.begin(), next.end());
        ring = std::move(next);
    }
    return finalize_ego(g, v, std::move(members), n, std::move(features));
}

EgoGraph rwr_extract(const TaskGraph& g, NodeIndex v, const SamplerConfig& cfg,
                     std::shared_ptr<const Eigen::MatrixXd> features) {
    cfg.validate();
    if (v < 0 || v >= g.num_nodes())
        throw IngestError("rwr_extract: unknown node index " + std::to_string(v));
    const int n = cfg.ego_size;
    const int cap = cfg.effective_step_cap();

    uint64_t salt = (static_cast<uint64_t>(static_cast<uint32_t>(g.task_id())) << 32) |
                    static_cast<uint32_t>(v);
    Rng rng(derive_seed(cfg.seed, "rwr", salt));

    std::vector<NodeIndex> members{v};
    members.reserve(static_cast<size_t>(n));
    std::unordered_set<NodeIndex> visited{v};
    NodeIndex cur = v;
    for (int step = 0; step < cap && static_cast<int>(members.size()) < n; ++step) {
        auto nbrs = g.neighbors(cur);
        if (nbrs.empty() || rng.bernoulli(cfg.restart_prob)) {
            cur = v;
            continue;
        }
        cur = nbrs[static_cast<size_t>(rng.below(nbrs.size()))];
        if (visited.insert(cur).second) members.push_back(cur);
    }
    return finalize_ego(g, v, std::move(members), n, std::move(features));
}

EgoGraph extract_ego(const TaskGraph& g, NodeIndex v, const SamplerConfig& cfg,
                     std::shared_ptr<const Eigen::MatrixXd> features) {
    return cfg.strategy == SampleStrategy::Bfs ? bfs_extract(g, v, cfg, std::move(features))
                                               : rwr_extract(g, v, cfg, std::move(features));
}

std::vector<EgoGraph> extract_all(const TaskGraph& g, Split split, const SamplerConfig& cfg,
                                  std::shared_ptr<const Eigen::MatrixXd> features) {
    cfg.validate();
    std::vector<EgoGraph> out;
    for (NodeIndex v : g.split_nodes(split)) out.push_back(extract_ego(g, v, cfg, features));
    return out;
}

namespace {
constexpr char kBitmapMagic[8] = {'E', 'G', 'O', 'B', 'M', 'P', '1', '\0'};
}

void write_ego_dump(const std::vector<EgoGraph>& egos, const TaskGraph& g,
                    const std::filesystem::path& csv_path,
                    const std::filesystem::path& bitmap_path) {
    std::string csv;
    std::string bits;
    bits.append(kBitmapMagic, sizeof(kBitmapMagic));
    uint32_t n = egos.empty() ? 0 : static_cast<uint32_t>(egos.front().size());
    uint32_t count = static_cast<uint32_t>(egos.size());
    bits.append(reinterpret_cast<const char*>(&n), 4);
    bits.append(reinterpret_cast<const char*>(&count), 4);

    const size_t bytes_per = (static_cast<size_t>(n) * n + 7) / 8;
    for (const EgoGraph& e : egos) {
        if (static_cast<uint32_t>(e.size()) != n)
            throw ConfigError("ego dump requires uniform ego size");
        csv += std::to_string(e.task_id());
        csv += ',';
        csv += g.external_id(e.ego_node());
        for (int i = 0; i < e.size(); ++i) {
            csv += ',';
            csv += e.is_dummy(i) ? "DUMMY" : g.external_id(e.members()[static_cast<size_t>(i)]);
        }
        csv += '\n';

        std::string record(bytes_per, '\0');
        const auto& adj = e.adjacency();
        for (size_t k = 0; k < adj.size(); ++k)
            if (adj[k]) record[k / 8] = static_cast<char>(record[k / 8] | (1u << (k % 8)));
        bits += record;
    }
    atomic_write_file(csv_path, csv);
    atomic_write_file(bitmap_path, bits);
}

std::vector<EgoDumpRecord> read_ego_dump(const std::filesystem::path& csv_path,
                                         const std::filesystem::path& bitmap_path) {
    std::string bits = read_text_file(bitmap_path);
    if (bits.size() < 16 || std::memcmp(bits.data(), kBitmapMagic, 8) != 0)
        throw ParseError(bitmap_path.string(), 1, "bad ego bitmap header");
    uint32_t n = 0;
    uint32_t count = 0;
    std::memcpy(&n, bits.data() + 8, 4);
    std::memcpy(&count, bits.data() + 12, 4);
    const size_t bytes_per = (static_cast<size_t>(n) * n + 7) / 8;
    if (bits.size() != 16 + bytes_per * count)
        throw ParseError(bitmap_path.string(), 1, "truncated ego bitmap");

    std::string csv = read_text_file(csv_path);
    std::vector<EgoDumpRecord> out;
    long line_no = 0;
    size_t pos = 0;
    while (pos <= csv.size()) {
        size_t nl = csv.find('\n', pos);
        std::string_view line(csv.data() + pos,
                              (nl == std::string::npos ? csv.size() : nl) - pos);
        pos = (nl == std::string::npos) ? csv.size() + 1 : nl + 1;
        ++line_no;
        line = trim_view(line);
        if (line.empty()) continue;
        auto cols = split_view(line, ',');
        if (cols.size() != 2 + static_cast<size_t>(n))
            throw ParseError(csv_path.string(), line_no, "wrong ego record width");
        EgoDumpRecord rec;
        int64_t tid = 0;
        if (!parse_int64(cols[0], tid))
            throw ParseError(csv_path.string(), line_no, "bad task id");
        rec.task_id = static_cast<int>(tid);
        rec.ego_external = std::string(cols[1]);
        for (size_t i = 0; i < n; ++i) rec.member_externals.emplace_back(cols[2 + i]);

        const size_t r = out.size();
        if (r >= count) throw ParseError(csv_path.string(), line_no, "more records than bitmap");
        rec.adjacency.assign(static_cast<size_t>(n) * n, 0);
        const char* base = bits.data() + 16 + r * bytes_per;
        for (size_t k = 0; k < rec.adjacency.size(); ++k)
            rec.adjacency[k] =
                (static_cast<unsigned char>(base[k / 8]) >> (k % 8)) & 1u;
        out.push_back(std::move(rec));
    }
    if (out.size() != count)
        throw ParseError(csv_path.string(), line_no, "fewer records than bitmap");
    return out;
}

EgoGraph ego_from_record(const EgoDumpRecord& rec, const TaskGraph& g,
                         std::shared_ptr<const Eigen::MatrixXd> features) {
    std::vector<NodeIndex> members;
    int real = 0;
    for (const std::string& m : rec.member_externals) {
        if (m == "DUMMY") {
            members.push_back(kDummy);
            continue;
        }
        auto idx = g.find(m);
        if (!idx) throw IngestError("ego dump member '" + m + "' not in graph");
        members.push_back(*idx);
        ++real;
    }
    if (members.empty() || members[0] == kDummy)
        throw IngestError("ego dump record has no ego node");
    NodeIndex ego = members[0];
    return EgoGraph(rec.task_id, ego, std::move(members), real, rec.adjacency, g.label(ego),
                    std::move(features));
}

}  // namespace egocl
