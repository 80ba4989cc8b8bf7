#include <doctest.h>

#include <filesystem>

#include "egocl/experiments.hpp"
#include "egocl/io.hpp"

using namespace egocl;
namespace fs = std::filesystem;

namespace {

const char* kMiniManifest = R"(# mini experiment
[dataset]
mode = synth
num_tasks = 2
nodes_per_task = 120
blocks = 4
p_in = 0.15
p_out = 0.01
seed = 9

[features]
dims = 8
walks_per_node = 2
walk_length = 8
window = 3
epochs = 1
seed = 4

[sampler]
strategy = bfs
ego_size = 8
seed = 1

[model]
arch = gat
hidden = 8
heads = 2

[train]
learning_rate = 0.01
weight_decay = 1e-3
epochs = 2
batch_size = 32

[strategy]
name = egocl-bfs, incremental
replay_rate = 0.1

[evaluation]
runs = 2
seed = 3
)";

}  // namespace

TEST_CASE("manifest parses defaults and overrides") {
    ExperimentManifest m = ExperimentManifest::parse(kMiniManifest, ".", "<mini>");
    CHECK(m.mode == ExperimentManifest::DatasetMode::Synth);
    CHECK(m.synth.num_tasks == 2);
    CHECK(m.synth.nodes_per_task == 120);
    CHECK(m.deepwalk.dims == 8);
    CHECK(m.sampler.ego_size == 8);
    CHECK(m.model.hidden_total == 8);
    CHECK(m.train.epochs == 2);
    REQUIRE(m.strategies.size() == 2);
    CHECK(m.strategies[0].name == "egocl-bfs");
    CHECK(m.strategies[0].config.kind == StrategyKind::EgoCl);
    CHECK(m.strategies[0].config.effective_replay_rate() == 0.1);
    REQUIRE(m.strategies[0].sampler_override.has_value());
    CHECK(*m.strategies[0].sampler_override == SampleStrategy::Bfs);
    CHECK(m.strategies[1].config.kind == StrategyKind::Incremental);
    CHECK(!m.strategies[1].config.replay_rate.has_value());  // not replay-based
    CHECK(m.runs == 2);

    SUBCASE("defaults mirror the reference setup") {
        ExperimentManifest d = ExperimentManifest::parse(
            "[dataset]\nmode = synth\n", ".", "<defaults>");
        CHECK(d.model.hidden_total == 128);
        CHECK(d.model.heads == 8);
        CHECK(d.model.layers == 2);
        CHECK(d.train.learning_rate == 0.01);
        CHECK(d.train.weight_decay == 1e-3);
        CHECK(d.train.epochs == 100);
        CHECK(d.sampler.ego_size == 50);
        CHECK(d.deepwalk.dims == 64);
        CHECK(d.synth.num_tasks == 5);
        CHECK(d.synth.nodes_per_task == 2000);
        REQUIRE(d.strategies.size() == 1);
        CHECK(d.strategies[0].config.kind == StrategyKind::EgoCl);
        CHECK(d.strategies[0].config.effective_replay_rate() == 0.1);
    }
}

TEST_CASE("manifest rejects malformed input") {
    CHECK_THROWS_AS(ExperimentManifest::parse("[dataset]\nmode = nope\n", ".", "<x>"),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentManifest::parse("[dataset]\nmystery = 1\n", ".", "<x>"),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentManifest::parse("[bogus]\nx = 1\n", ".", "<x>"), ConfigError);
    CHECK_THROWS_AS(ExperimentManifest::parse("key = 1\n", ".", "<x>"), ParseError);
    CHECK_THROWS_AS(ExperimentManifest::parse("[dataset]\nbroken line\n", ".", "<x>"),
                    ParseError);
    CHECK_THROWS_AS(
        ExperimentManifest::parse("[strategy]\nname = ewc-bfs\n", ".", "<x>"),
        ConfigError);
    CHECK_THROWS_AS(
        ExperimentManifest::parse("[dataset]\nmode = files\ntasks = 1\n", ".", "<x>"),
        ConfigError);
}

TEST_CASE("experiment runner: static and continual on a mini stream") {
    ExperimentManifest m = ExperimentManifest::parse(kMiniManifest, ".", "<mini>");
    m.static_methods = {"gat", "ego-bfs"};
    ExperimentRunner runner(m, 1);

    SUBCASE("static: tasks x methods x runs, csv flags the best per row") {
        StaticResult r = runner.run_static();
        REQUIRE(r.auc.size() == 2);
        REQUIRE(r.auc[0].size() == 2);
        REQUIRE(r.auc[0][0].size() == 2);
        const std::string csv = r.to_csv();
        CHECK(csv.find("task,gat,ego-bfs") == 0);
        CHECK(csv.find('*') != std::string::npos);
    }

    SUBCASE("continual: rows per strategy, outputs on disk") {
        ContinualResult r = runner.run_continual();
        REQUIRE(r.runs.size() == 4);  // 2 strategies x 2 runs
        auto summaries = r.summarize();
        REQUIRE(summaries.size() == 2);
        CHECK(summaries[0].strategy == "egocl-bfs");
        CHECK(summaries[1].strategy == "incremental");

        fs::path out = fs::temp_directory_path() / "egocl_test_outputs";
        fs::remove_all(out);
        write_continual_outputs(r, out);
        CHECK(fs::exists(out / "results.csv"));
        CHECK(fs::exists(out / "auc_matrix_egocl-bfs_0.csv"));
        CHECK(fs::exists(out / "auc_matrix_egocl-bfs_1.csv"));
        CHECK(fs::exists(out / "auc_matrix_incremental_1.csv"));
        CHECK(fs::exists(out / "metrics_egocl-bfs.json"));
        CHECK(fs::exists(out / "metrics_incremental.json"));

        // rerunning regenerates the tables byte-identically
        const std::string before = read_text_file(out / "results.csv");
        ExperimentRunner again(m, 1);
        ContinualResult r2 = again.run_continual();
        write_continual_outputs(r2, out);
        CHECK(read_text_file(out / "results.csv") == before);
        CHECK(read_text_file(out / "auc_matrix_egocl-bfs_0.csv") ==
              read_text_file(out / "auc_matrix_egocl-bfs_0.csv"));
    }

    SUBCASE("sweep degenerates to continual on a single value") {
        SweepResult s = runner.run_sweep("replay_rate", {0.1});
        REQUIRE(s.points.size() == 2);  // one value x two runs
        ContinualResult c = runner.run_continual();
        for (const auto& p : s.points) {
            const auto& match = c.runs[static_cast<size_t>(p.run_index)];
            CHECK(match.strategy == "egocl-bfs");
            CHECK(p.avg == match.avg);
            CHECK(p.forgetting == match.forgetting);
        }
        CHECK_THROWS_AS(runner.run_sweep("nope", {1.0}), ConfigError);
        CHECK_THROWS_AS(runner.run_sweep("replay_rate", {2.0}), ConfigError);
    }

    SUBCASE("bench emits normalized columns with minimum 1.00") {
        BenchResult b = runner.run_bench();
        REQUIRE(b.rows.size() == 2);
        const std::string csv = b.to_csv();
        CHECK(csv.find("strategy,train_seconds") == 0);
        // single-strategy normalization check
        BenchResult one;
        one.rows.push_back({"egocl", 2.5, 1.5, 1000});
        const std::string single = one.to_csv();
        CHECK(single.find(",1.00,1.00,1.00") != std::string::npos);
    }
}

TEST_CASE("runner honors parallel jobs deterministically") {
    ExperimentManifest m = ExperimentManifest::parse(kMiniManifest, ".", "<mini>");
    ExperimentRunner serial(m, 1);
    ExperimentRunner threaded(m, 4);
    ContinualResult a = serial.run_continual();
    ContinualResult b = threaded.run_continual();
    REQUIRE(a.runs.size() == b.runs.size());
    for (size_t i = 0; i < a.runs.size(); ++i) {
        CHECK(a.runs[i].strategy == b.runs[i].strategy);
        CHECK(a.runs[i].avg == b.runs[i].avg);
    }
}

TEST_CASE("files-mode manifest loads a written stream") {
    SynthConfig cfg;
    cfg.num_tasks = 2;
    cfg.nodes_per_task = 100;
    cfg.blocks = 4;
    cfg.p_in = 0.15;
    cfg.p_out = 0.01;
    cfg.seed = 12;
    TaskStream stream = generate_task_stream(cfg);
    fs::path dir = fs::temp_directory_path() / "egocl_test_files_mode";
    fs::remove_all(dir);
    write_stream(stream, dir);

    ExperimentManifest m = ExperimentManifest::load(dir / "manifest.ini");
    CHECK(m.mode == ExperimentManifest::DatasetMode::Files);
    TaskStream loaded = m.open_dataset();
    REQUIRE(loaded.num_tasks() == 2);
    for (int t = 0; t < 2; ++t) {
        CHECK(loaded.tasks[static_cast<size_t>(t)]->num_nodes() ==
              stream.tasks[static_cast<size_t>(t)]->num_nodes());
        CHECK(loaded.tasks[static_cast<size_t>(t)]->num_edges() ==
              stream.tasks[static_cast<size_t>(t)]->num_edges());
        for (NodeIndex v = 0; v < loaded.tasks[static_cast<size_t>(t)]->num_nodes(); ++v)
            CHECK(loaded.tasks[static_cast<size_t>(t)]->split(v) ==
                  stream.tasks[static_cast<size_t>(t)]->split(v));
    }
}
