#include "egocl/synth_gen.hpp"

#include <algorithm>
#include <cmath>

#include "egocl/io.hpp"
#include "egocl/rng.hpp"

namespace egocl {

void SynthConfig::validate() const {
    if (num_tasks < 1) throw ConfigError("synth: num_tasks must be >= 1");
    if (nodes_per_task < 2) throw ConfigError("synth: nodes_per_task must be >= 2");
    if (blocks < 1 || blocks > nodes_per_task)
        throw ConfigError("synth: blocks must be in [1, nodes_per_task]");
    if (!(p_in > p_out && p_out > 0.0) || p_in > 1.0)
        throw ConfigError("synth: need p_in > p_out > 0");
    if (drift < 0.0 || drift > 1.0) throw ConfigError("synth: drift must be in [0, 1]");
    if (label_noise < 0.0 || label_noise >= 0.5)
        throw ConfigError("synth: label_noise must be in [0, 0.5)");
    if (target_pos_rate <= 0.0 || target_pos_rate >= 1.0)
        throw ConfigError("synth: target_pos_rate must be in (0, 1)");
    if (raw_columns != 3 && raw_columns != 4)
        throw ConfigError("synth: raw_columns must be 3 or 4");
    if (expected_degree() < 1.0)
        throw ConfigError("synth: degenerate config, expected degree below 1");
}

double SynthConfig::expected_degree() const {
    const double per_block = static_cast<double>(nodes_per_task) / blocks;
    return p_in * (per_block - 1.0) +
           p_out * (static_cast<double>(nodes_per_task) - per_block);
}

namespace {

// Lognormal-ish count parameters per raw column (follower, following, tweet,
// listed): location, propensity loading, noise scale.
constexpr double kMu[4] = {4.6, 4.2, 5.2, 1.4};
constexpr double kBeta[4] = {0.9, 0.6, 0.8, 1.0};
constexpr double kSigma[4] = {1.2, 1.0, 1.1, 0.8};

// Geometric skipping over a Bernoulli(p) row of length `len`.
template <class F>
void skip_sample(Rng& rng, double p, int64_t len, F&& emit) {
    if (len <= 0) return;
    const double log1mp = std::log1p(-p);
    int64_t pos = -1;
    for (;;) {
        double u = rng.uniform01();
        while (u <= 0.0) u = rng.uniform01();
        pos += 1 + static_cast<int64_t>(std::floor(std::log(u) / log1mp));
        if (pos >= len) return;
        emit(pos);
    }
}

}  // namespace

TaskStream generate_task_stream(const SynthConfig& cfg) {
    cfg.validate();
    const int n = cfg.nodes_per_task;

    // Node propensity latents are tied to node identity and persist across
    // the whole stream.
    std::vector<double> z(static_cast<size_t>(n));
    {
        Rng rng(derive_seed(cfg.seed, "synth-z"));
        for (auto& v : z) v = rng.normal();
    }

    std::vector<int> block(static_cast<size_t>(n));
    std::vector<double> polarity(static_cast<size_t>(cfg.blocks));
    TaskStream stream;

    for (int task = 1; task <= cfg.num_tasks; ++task) {
        const auto tsalt = static_cast<uint64_t>(task);
        // community membership: fresh on task 1, partially re-drawn after
        {
            Rng rng(derive_seed(cfg.seed, "synth-membership", tsalt));
            for (int v = 0; v < n; ++v) {
                if (task == 1 || rng.bernoulli(0.5 * cfg.drift))
                    block[static_cast<size_t>(v)] =
                        static_cast<int>(rng.below(static_cast<uint64_t>(cfg.blocks)));
            }
        }
        // label rule: block polarities, partially resampled per task
        {
            Rng rng(derive_seed(cfg.seed, "synth-polarity", tsalt));
            for (int b = 0; b < cfg.blocks; ++b) {
                if (task == 1 || rng.bernoulli(cfg.drift))
                    polarity[static_cast<size_t>(b)] = rng.normal();
            }
        }

        // SBM edges via geometric skipping per block pair
        std::vector<std::vector<NodeIndex>> members(static_cast<size_t>(cfg.blocks));
        for (int v = 0; v < n; ++v)
            members[static_cast<size_t>(block[static_cast<size_t>(v)])].push_back(
                static_cast<NodeIndex>(v));
        std::vector<TaskGraph::Edge> edges;
        edges.reserve(static_cast<size_t>(cfg.expected_degree() * n / 2 * 1.2));
        Rng edge_rng(derive_seed(cfg.seed, "synth-edges", tsalt));
        for (int bx = 0; bx < cfg.blocks; ++bx) {
            const auto& xs = members[static_cast<size_t>(bx)];
            for (size_t i = 0; i < xs.size(); ++i) {
                const auto remaining = static_cast<int64_t>(xs.size() - i - 1);
                skip_sample(edge_rng, cfg.p_in, remaining, [&](int64_t k) {
                    edges.push_back({xs[i], xs[i + 1 + static_cast<size_t>(k)]});
                });
            }
            for (int by = bx + 1; by < cfg.blocks; ++by) {
                const auto& ys = members[static_cast<size_t>(by)];
                for (NodeIndex a : xs)
                    skip_sample(edge_rng, cfg.p_out, static_cast<int64_t>(ys.size()),
                                [&](int64_t k) {
                                    edges.push_back({a, ys[static_cast<size_t>(k)]});
                                });
            }
        }

        // adjacency lists for the homophily mixing
        std::vector<std::vector<NodeIndex>> nbrs(static_cast<size_t>(n));
        for (const auto& e : edges) {
            nbrs[static_cast<size_t>(e.a)].push_back(e.b);
            nbrs[static_cast<size_t>(e.b)].push_back(e.a);
        }

        // scores: linear rule over homophily-mixed latents
        std::vector<double> score(static_cast<size_t>(n));
        for (int v = 0; v < n; ++v) {
            const double own_u = polarity[static_cast<size_t>(block[static_cast<size_t>(v)])];
            const double own_z = z[static_cast<size_t>(v)];
            double mix_u = own_u, mix_z = own_z;
            const auto& nb = nbrs[static_cast<size_t>(v)];
            if (!nb.empty() && cfg.homophily_mix > 0.0) {
                double su = 0, sz = 0;
                for (NodeIndex u : nb) {
                    su += polarity[static_cast<size_t>(block[static_cast<size_t>(u)])];
                    sz += z[static_cast<size_t>(u)];
                }
                const double h = cfg.homophily_mix;
                mix_u = (1 - h) * own_u + h * su / static_cast<double>(nb.size());
                mix_z = (1 - h) * own_z + h * sz / static_cast<double>(nb.size());
            }
            score[static_cast<size_t>(v)] =
                cfg.struct_weight * mix_u + cfg.prop_weight * mix_z;
        }

        // threshold at the empirical quantile, then flip with label noise
        std::vector<double> sorted = score;
        auto kth = sorted.begin() +
                   static_cast<int64_t>(std::floor((1.0 - cfg.target_pos_rate) *
                                                   static_cast<double>(n)));
        if (kth >= sorted.end()) kth = sorted.end() - 1;
        std::nth_element(sorted.begin(), kth, sorted.end());
        const double tau = *kth;
        std::vector<uint8_t> labels(static_cast<size_t>(n));
        Rng noise_rng(derive_seed(cfg.seed, "synth-noise", tsalt));
        for (int v = 0; v < n; ++v) {
            bool pos = score[static_cast<size_t>(v)] > tau;
            if (noise_rng.bernoulli(cfg.label_noise)) pos = !pos;
            labels[static_cast<size_t>(v)] = pos ? 1 : 0;
        }

        // raw counts: lognormal in the propensity latent, re-noised per task
        Eigen::MatrixXd raw(n, cfg.raw_columns);
        Rng count_rng(derive_seed(cfg.seed, "synth-counts", tsalt));
        for (int v = 0; v < n; ++v)
            for (int c = 0; c < cfg.raw_columns; ++c)
                raw(v, c) = std::floor(std::exp(kMu[c] + kBeta[c] * z[static_cast<size_t>(v)] +
                                                kSigma[c] * count_rng.normal()));

        std::vector<std::string> ids;
        ids.reserve(static_cast<size_t>(n));
        for (int v = 0; v < n; ++v) ids.push_back(std::to_string(v));
        stream.tasks.push_back(std::make_shared<TaskGraph>(TaskGraph::build(
            task, std::move(ids), edges, std::move(raw), std::move(labels),
            derive_seed(cfg.seed, "synth-splits", tsalt))));
    }
    stream.validate();
    return stream;
}

void write_stream(const TaskStream& stream, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::string manifest =
        "# generated dataset manifest stub\n"
        "[dataset]\n"
        "mode = files\n"
        "tasks = " + std::to_string(stream.num_tasks()) + "\n";
    for (int i = 0; i < stream.num_tasks(); ++i) {
        const std::string base = "task" + std::to_string(i + 1);
        const TaskGraph& g = *stream.tasks[static_cast<size_t>(i)];
        g.write_files(dir / (base + "_edges.tsv"), dir / (base + "_features.csv"),
                      dir / (base + "_labels.csv"));
        manifest += base + ".edges = " + base + "_edges.tsv\n";
        manifest += base + ".features = " + base + "_features.csv\n";
        manifest += base + ".labels = " + base + "_labels.csv\n";
        manifest += base + ".seed = " + std::to_string(g.split_seed()) + "\n";
    }
    manifest +=
        "\n[sampler]\nstrategy = bfs\nego_size = 50\nseed = 1\n"
        "\n[model]\narch = gat\nhidden = 128\nheads = 8\n"
        "\n[train]\nlearning_rate = 0.01\nweight_decay = 1e-3\nepochs = 100\nbatch_size = "
        "64\n"
        "\n[strategy]\nname = egocl\nreplay_rate = 0.1\n"
        "\n[evaluation]\nruns = 5\nseed = 1\n";
    atomic_write_file(dir / "manifest.ini", manifest);
}

std::vector<GraphStats> summarize(const TaskStream& stream) {
    std::vector<GraphStats> out;
    out.reserve(stream.tasks.size());
    for (const auto& g : stream.tasks) out.push_back(compute_stats(*g));
    return out;
}

}  // namespace egocl
