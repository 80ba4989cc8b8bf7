#include <doctest.h>

#include <algorithm>
#include <deque>
#include <filesystem>
#include <map>
#include <set>

#include "egocl/ego_sampler.hpp"
#include "egocl/rng.hpp"

using namespace egocl;

namespace {

TaskGraph make_graph(int n, const std::vector<std::pair<int, int>>& edges, uint64_t seed = 1) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    std::vector<TaskGraph::Edge> e;
    for (auto [a, b] : edges)
        e.push_back({static_cast<NodeIndex>(a), static_cast<NodeIndex>(b)});
    std::vector<uint8_t> labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<size_t>(i)] = i % 2;
    return TaskGraph::build(0, ids, e, Eigen::MatrixXd::Zero(n, 3), labels, seed);
}

TaskGraph random_connected_graph(int n, double extra_p, Rng& rng) {
    std::vector<std::pair<int, int>> edges;
    for (int v = 1; v < n; ++v)
        edges.emplace_back(static_cast<int>(rng.below(static_cast<uint64_t>(v))), v);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (rng.bernoulli(extra_p)) edges.emplace_back(a, b);
    return make_graph(n, edges);
}

// Independent distance oracle: plain queue BFS.
std::vector<int> bfs_distances(const TaskGraph& g, NodeIndex src) {
    std::vector<int> dist(static_cast<size_t>(g.num_nodes()), -1);
    std::deque<NodeIndex> q{src};
    dist[static_cast<size_t>(src)] = 0;
    while (!q.empty()) {
        NodeIndex v = q.front();
        q.pop_front();
        for (NodeIndex u : g.neighbors(v))
            if (dist[static_cast<size_t>(u)] < 0) {
                dist[static_cast<size_t>(u)] = dist[static_cast<size_t>(v)] + 1;
                q.push_back(u);
            }
    }
    return dist;
}

void check_ego_invariants(const EgoGraph& e, const TaskGraph& g, int n) {
    REQUIRE(e.size() == n);
    int real = 0, dummy = 0;
    for (int i = 0; i < n; ++i) e.is_dummy(i) ? ++dummy : ++real;
    CHECK(real == e.real_count());
    CHECK(real + dummy == n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            CHECK(e.adj(i, j) == e.adj(j, i));
            if (e.is_dummy(i) || e.is_dummy(j)) {
                CHECK(e.adj(i, j) == 0);
            } else if (i == j) {
                CHECK(e.adj(i, i) == 1);
            } else {
                const bool in_graph = g.has_edge(e.members()[static_cast<size_t>(i)],
                                                 e.members()[static_cast<size_t>(j)]);
                CHECK(static_cast<bool>(e.adj(i, j)) == in_graph);
            }
        }
    }
}

}  // namespace

TEST_CASE("bfs: star center keeps the 49 lowest-id leaves") {
    std::vector<std::pair<int, int>> edges;
    for (int leaf = 1; leaf <= 60; ++leaf) edges.emplace_back(0, leaf);
    TaskGraph g = make_graph(61, edges);
    SamplerConfig cfg;
    cfg.ego_size = 50;
    EgoGraph e = bfs_extract(g, 0, cfg);
    CHECK(e.real_count() == 50);
    CHECK(e.members()[0] == 0);
    std::set<NodeIndex> rest(e.members().begin() + 1, e.members().end());
    for (NodeIndex leaf = 1; leaf <= 49; ++leaf) CHECK(rest.count(leaf));
    CHECK(!rest.count(50));
    check_ego_invariants(e, g, 50);
}

TEST_CASE("bfs: exhausted component pads with dummies") {
    TaskGraph g = make_graph(3, {{0, 1}, {1, 2}});
    SamplerConfig cfg;
    cfg.ego_size = 5;
    EgoGraph e = bfs_extract(g, 0, cfg);
    CHECK(e.real_count() == 3);
    CHECK(e.members()[3] == kDummy);
    CHECK(e.members()[4] == kDummy);
    check_ego_invariants(e, g, 5);
}

TEST_CASE("bfs ego members are the (distance, id)-minimal prefix") {
    Rng rng(404);
    SamplerConfig cfg;
    cfg.ego_size = 20;
    TaskGraph g = random_connected_graph(200, 0.008, rng);
    for (int t = 0; t < 100; ++t) {
        NodeIndex v = static_cast<NodeIndex>(rng.below(200));
        EgoGraph e = bfs_extract(g, v, cfg);
        auto dist = bfs_distances(g, v);
        std::vector<std::pair<int, NodeIndex>> reachable;
        for (NodeIndex u = 0; u < g.num_nodes(); ++u)
            if (u != v && dist[static_cast<size_t>(u)] >= 0)
                reachable.emplace_back(dist[static_cast<size_t>(u)], u);
        std::sort(reachable.begin(), reachable.end());
        std::vector<std::pair<int, NodeIndex>> got;
        for (int i = 1; i < e.size(); ++i) {
            if (e.is_dummy(i)) break;
            NodeIndex u = e.members()[static_cast<size_t>(i)];
            got.emplace_back(dist[static_cast<size_t>(u)], u);
        }
        std::sort(got.begin(), got.end());
        const size_t expect = std::min<size_t>(reachable.size(), 19);
        REQUIRE(got.size() == expect);
        for (size_t i = 0; i < expect; ++i) CHECK(got[i] == reachable[i]);
        check_ego_invariants(e, g, 20);
    }
}

TEST_CASE("rwr: isolated node is ego plus dummies") {
    TaskGraph g = make_graph(1, {});
    SamplerConfig cfg;
    cfg.strategy = SampleStrategy::Rwr;
    cfg.ego_size = 5;
    EgoGraph e = rwr_extract(g, 0, cfg);
    CHECK(e.real_count() == 1);
    for (int i = 1; i < 5; ++i) CHECK(e.is_dummy(i));
}

TEST_CASE("rwr: complete graph K10 yields a clique ego") {
    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < 10; ++a)
        for (int b = a + 1; b < 10; ++b) edges.emplace_back(a, b);
    TaskGraph g = make_graph(10, edges);
    SamplerConfig cfg;
    cfg.strategy = SampleStrategy::Rwr;
    cfg.ego_size = 5;
    cfg.step_cap = 500;
    cfg.seed = 3;
    EgoGraph e = rwr_extract(g, 2, cfg);
    CHECK(e.real_count() == 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) CHECK(e.adj(i, j) == 1);
    check_ego_invariants(e, g, 5);
}

TEST_CASE("rwr: members are reachable and runs are reproducible") {
    Rng rng(11);
    TaskGraph g = random_connected_graph(80, 0.02, rng);
    SamplerConfig cfg;
    cfg.strategy = SampleStrategy::Rwr;
    cfg.ego_size = 12;
    cfg.seed = 99;
    for (int t = 0; t < 40; ++t) {
        NodeIndex v = static_cast<NodeIndex>(rng.below(80));
        EgoGraph a = rwr_extract(g, v, cfg);
        EgoGraph b = rwr_extract(g, v, cfg);
        CHECK(a.members() == b.members());
        auto dist = bfs_distances(g, v);
        for (int i = 0; i < a.size(); ++i)
            if (!a.is_dummy(i))
                CHECK(dist[static_cast<size_t>(a.members()[static_cast<size_t>(i)])] >= 0);
        check_ego_invariants(a, g, 12);
    }
}

TEST_CASE("rwr: barbell walkers stay mostly in the home clique") {
    // two K10s joined by a single edge (9 <-> 10); ego 0 sits deep in clique A
    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < 10; ++a)
        for (int b = a + 1; b < 10; ++b) {
            edges.emplace_back(a, b);
            edges.emplace_back(10 + a, 10 + b);
        }
    edges.emplace_back(9, 10);
    TaskGraph g = make_graph(20, edges);
    SamplerConfig cfg;
    cfg.strategy = SampleStrategy::Rwr;
    cfg.ego_size = 8;
    cfg.restart_prob = 0.5;
    int64_t near = 0, far = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        cfg.seed = static_cast<uint64_t>(trial);
        EgoGraph e = rwr_extract(g, 0, cfg);
        for (int i = 1; i < e.size(); ++i) {
            if (e.is_dummy(i)) continue;
            (e.members()[static_cast<size_t>(i)] < 10 ? near : far) += 1;
        }
    }
    CHECK(near > far);
}

TEST_CASE("extract_all covers exactly one split") {
    TaskGraph g = make_graph(8, {{0, 1}, {1, 2}, {2, 3}, {4, 5}, {6, 7}, {3, 4}});
    SamplerConfig cfg;
    cfg.ego_size = 4;
    auto train_nodes = g.split_nodes(Split::Train);
    auto egos = extract_all(g, Split::Train, cfg);
    CHECK(egos.size() == train_nodes.size());
    for (size_t i = 0; i < egos.size(); ++i) CHECK(egos[i].ego_node() == train_nodes[i]);

    auto a = extract_all(g, Split::Val, cfg);
    auto b = extract_all(g, Split::Val, cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].members() == b[i].members());
}

TEST_CASE("ego dump round-trips") {
    Rng rng(5);
    TaskGraph g = random_connected_graph(30, 0.05, rng);
    SamplerConfig cfg;
    cfg.ego_size = 7;
    auto egos = extract_all(g, Split::Train, cfg);
    REQUIRE(!egos.empty());

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "egocl_test_dump";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_ego_dump(egos, g, dir / "egos.csv", dir / "egos.bmp");
    auto records = read_ego_dump(dir / "egos.csv", dir / "egos.bmp");
    REQUIRE(records.size() == egos.size());
    for (size_t i = 0; i < egos.size(); ++i) {
        EgoGraph back = ego_from_record(records[i], g, nullptr);
        CHECK(back.members() == egos[i].members());
        CHECK(back.adjacency() == egos[i].adjacency());
        CHECK(back.ego_label() == egos[i].ego_label());
        CHECK(back.task_id() == egos[i].task_id());
    }
}

TEST_CASE("sampler config validation") {
    SamplerConfig cfg;
    cfg.ego_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.ego_size = 10;
    cfg.strategy = SampleStrategy::Rwr;
    cfg.restart_prob = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.restart_prob = 0.5;
    cfg.step_cap = 5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.step_cap = 0;
    CHECK(cfg.effective_step_cap() == 100);
    TaskGraph g = make_graph(2, {{0, 1}});
    CHECK_THROWS_AS(bfs_extract(g, 5, cfg), IngestError);
}
