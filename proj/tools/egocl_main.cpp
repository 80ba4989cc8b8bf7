// Command-line front end: ingest or synthesize task streams, run static and
// continual experiments, sweep hyper-parameters, and emit plot-ready tables.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <thread>

#include "egocl/experiments.hpp"
#include "egocl/io.hpp"

namespace {

using namespace egocl;

struct CommonArgs {
    std::string manifest_path;
    std::string out_dir;
    int seeds = 0;  // 0: keep manifest value
    int threads = static_cast<int>(std::thread::hardware_concurrency());
};

ExperimentManifest load_manifest(const CommonArgs& args) {
    ExperimentManifest m = ExperimentManifest::load(args.manifest_path);
    if (!args.out_dir.empty()) m.out_dir = args.out_dir;
    if (args.seeds > 0) m.runs = args.seeds;
    return m;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--manifest", args.manifest_path, "experiment manifest path")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "output directory (overrides manifest)");
    cmd->add_option("--seeds", args.seeds, "number of runs (overrides manifest)");
    cmd->add_option("--threads", args.threads, "worker threads for independent runs");
}

void cmd_stats(const CommonArgs& args) {
    ExperimentRunner runner(load_manifest(args), args.threads);
    auto stats = runner.stats();
    std::string csv = "task,nodes,links,avg_degree,pos_label_pct\n";
    std::printf("%-6s %10s %10s %12s %10s\n", "task", "nodes", "links", "avg_degree",
                "pos(%)");
    for (size_t t = 0; t < stats.size(); ++t) {
        const GraphStats& s = stats[t];
        std::printf("%-6zu %10lld %10lld %12.3f %10.2f\n", t + 1,
                    static_cast<long long>(s.num_nodes),
                    static_cast<long long>(s.num_links), s.avg_degree, s.pos_label_pct);
        char row[160];
        std::snprintf(row, sizeof(row), "%zu,%lld,%lld,%.6f,%.6f\n", t + 1,
                      static_cast<long long>(s.num_nodes),
                      static_cast<long long>(s.num_links), s.avg_degree, s.pos_label_pct);
        csv += row;
    }
    atomic_write_file(runner.manifest().out_dir / "results.csv", csv);
}

void cmd_synth(const CommonArgs& args) {
    ExperimentManifest m = load_manifest(args);
    if (m.mode != ExperimentManifest::DatasetMode::Synth)
        throw ConfigError("synth command requires dataset mode 'synth'");
    TaskStream stream = generate_task_stream(m.synth);
    write_stream(stream, m.out_dir);
    std::printf("wrote %d task(s) to %s\n", stream.num_tasks(), m.out_dir.string().c_str());
}

void cmd_sample(const CommonArgs& args) {
    ExperimentRunner runner(load_manifest(args), args.threads);
    const ExperimentManifest& m = runner.manifest();
    const PreparedStream& ps = runner.prepared(m.sampler);
    std::filesystem::create_directories(m.out_dir);
    for (const auto& task : ps.tasks) {
        std::vector<EgoGraph> egos;
        for (Split split : {Split::Train, Split::Val, Split::Test})
            for (NodeIndex v : task.graph->split_nodes(split))
                egos.push_back(extract_ego(*task.graph, v, ps.sampler));
        const std::string base = "egos_task" + std::to_string(task.graph->task_id());
        write_ego_dump(egos, *task.graph, m.out_dir / (base + ".csv"),
                       m.out_dir / (base + ".bmp"));
        std::printf("task %d: dumped %zu ego-graphs\n", task.graph->task_id(), egos.size());
    }
}

void cmd_static(const CommonArgs& args) {
    ExperimentRunner runner(load_manifest(args), args.threads);
    StaticResult result = runner.run_static();
    const std::string csv = result.to_csv();
    std::fputs(csv.c_str(), stdout);
    atomic_write_file(runner.manifest().out_dir / "results.csv", csv);
}

void cmd_continual(const CommonArgs& args) {
    ExperimentRunner runner(load_manifest(args), args.threads);
    ContinualResult result = runner.run_continual();
    write_continual_outputs(result, runner.manifest().out_dir);
    std::fputs(result.to_csv().c_str(), stdout);
}

void cmd_sweep(const CommonArgs& args, const std::string& axis,
               std::vector<double>& values) {
    ExperimentRunner runner(load_manifest(args), args.threads);
    if (values.empty()) {
        if (axis == "replay_rate") values = {0.01, 0.05, 0.1, 0.2, 0.3};
        else values = {20, 35, 50, 65, 80};
    }
    SweepResult result = runner.run_sweep(axis, values);
    const std::string csv = result.to_csv();
    std::fputs(csv.c_str(), stdout);
    std::filesystem::create_directories(runner.manifest().out_dir);
    atomic_write_file(runner.manifest().out_dir / "results.csv", csv);
}

void cmd_bench(const CommonArgs& args) {
    ExperimentRunner runner(load_manifest(args), args.threads);
    BenchResult result = runner.run_bench();
    const std::string csv = result.to_csv();
    std::fputs(csv.c_str(), stdout);
    std::filesystem::create_directories(runner.manifest().out_dir);
    atomic_write_file(runner.manifest().out_dir / "bench.csv", csv);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continual ego-graph learning toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string sweep_axis = "replay_rate";
    std::vector<double> sweep_values;

    auto* stats = app.add_subcommand("stats", "per-task graph statistics table");
    add_common(stats, args);
    auto* synth = app.add_subcommand("synth", "generate a synthetic task stream to disk");
    add_common(synth, args);
    auto* sample = app.add_subcommand("sample", "dump ego-graphs per task");
    add_common(sample, args);
    auto* stat = app.add_subcommand("static", "per-task static training comparison");
    add_common(stat, args);
    auto* cont = app.add_subcommand("continual", "continual strategies over the stream");
    add_common(cont, args);
    auto* sweep = app.add_subcommand("sweep", "hyper-parameter sweep");
    add_common(sweep, args);
    sweep->add_option("--axis", sweep_axis, "replay_rate or ego_size")
        ->check(CLI::IsMember({"replay_rate", "ego_size"}));
    sweep->add_option("--values", sweep_values, "axis values");
    auto* bench = app.add_subcommand("bench", "wall-time and storage comparison");
    add_common(bench, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (stats->parsed()) cmd_stats(args);
        else if (synth->parsed()) cmd_synth(args);
        else if (sample->parsed()) cmd_sample(args);
        else if (stat->parsed()) cmd_static(args);
        else if (cont->parsed()) cmd_continual(args);
        else if (sweep->parsed()) cmd_sweep(args, sweep_axis, sweep_values);
        else if (bench->parsed()) cmd_bench(args);
    } catch (const egocl::Error& e) {
        nlohmann::json err{{"error", e.kind()}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        nlohmann::json err{{"error", "internal"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
