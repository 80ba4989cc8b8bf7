#include "egocl/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "egocl/io.hpp"
#include "egocl/rng.hpp"

namespace egocl {

namespace {

std::string fmt(double v, int precision = 6) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

std::string sampler_fingerprint(const SamplerConfig& s) {
    return std::string(s.strategy == SampleStrategy::Bfs ? "bfs" : "rwr") + ":" +
           std::to_string(s.ego_size) + ":" + fmt(s.restart_prob, 6) + ":" +
           std::to_string(s.effective_step_cap()) + ":" + std::to_string(s.seed);
}

}  // namespace

void parallel_for_jobs(int jobs, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, jobs));
    if (threads == 1) {
        for (int j = 0; j < jobs; ++j) fn(j);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const int j = next.fetch_add(1);
                if (j >= jobs) return;
                try {
                    fn(j);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double StaticResult::mean(int task, int method) const {
    const auto& runs = auc[static_cast<size_t>(task)][static_cast<size_t>(method)];
    double m = 0;
    for (double v : runs) m += v;
    return runs.empty() ? 0.0 : m / static_cast<double>(runs.size());
}

std::string StaticResult::to_csv() const {
    std::string out = "task";
    for (const auto& m : methods) out += "," + m;
    out += '\n';
    for (size_t t = 0; t < auc.size(); ++t) {
        out += std::to_string(t + 1);
        int best = 0;
        for (size_t m = 1; m < methods.size(); ++m)
            if (mean(static_cast<int>(t), static_cast<int>(m)) >
                mean(static_cast<int>(t), best))
                best = static_cast<int>(m);
        for (size_t m = 0; m < methods.size(); ++m) {
            out += ',' + fmt(mean(static_cast<int>(t), static_cast<int>(m)), 4);
            if (static_cast<int>(m) == best) out += '*';
        }
        out += '\n';
    }
    return out;
}

std::vector<ContinualResult::Summary> ContinualResult::summarize() const {
    std::vector<Summary> out;
    for (const auto& run : runs) {
        if (out.empty() || out.back().strategy != run.strategy) {
            out.push_back({});
            out.back().strategy = run.strategy;
        }
    }
    for (auto& s : out) {
        std::vector<double> avgs, fgts;
        for (const auto& run : runs) {
            if (run.strategy != s.strategy) continue;
            avgs.push_back(run.avg);
            if (!std::isnan(run.forgetting)) fgts.push_back(run.forgetting);
        }
        std::tie(s.avg_mean, s.avg_std) = mean_std(avgs);
        s.has_fgt = !fgts.empty();
        if (s.has_fgt) std::tie(s.fgt_mean, s.fgt_std) = mean_std(fgts);
    }
    return out;
}

std::string ContinualResult::to_csv() const {
    std::string out = "strategy,avg_auc_mean,avg_auc_std,fgt_mean,fgt_std,runs\n";
    for (const auto& s : summarize()) {
        int count = 0;
        for (const auto& run : runs) count += run.strategy == s.strategy;
        out += s.strategy + ',' + fmt(s.avg_mean) + ',' + fmt(s.avg_std) + ',';
        out += s.has_fgt ? fmt(s.fgt_mean) : std::string("");
        out += ',';
        out += s.has_fgt ? fmt(s.fgt_std) : std::string("");
        out += ',' + std::to_string(count) + '\n';
    }
    return out;
}

std::string SweepResult::to_csv() const {
    std::string out = axis + ",run,avg_auc,fgt\n";
    for (const auto& p : points)
        out += fmt(p.value, 4) + ',' + std::to_string(p.run_index) + ',' + fmt(p.avg) + ',' +
               fmt(p.forgetting) + '\n';
    return out;
}

std::string BenchResult::to_csv() const {
    double min_train = 0, min_test = 0;
    int64_t min_store = 0;
    for (const auto& r : rows) {
        if (r.train_seconds > 0 && (min_train == 0 || r.train_seconds < min_train))
            min_train = r.train_seconds;
        if (r.test_seconds > 0 && (min_test == 0 || r.test_seconds < min_test))
            min_test = r.test_seconds;
        if (r.storage_bytes > 0 && (min_store == 0 || r.storage_bytes < min_store))
            min_store = r.storage_bytes;
    }
    auto norm = [](double v, double lo) { return lo > 0 ? v / lo : 0.0; };
    std::string out =
        "strategy,train_seconds,test_seconds,storage_bytes,train_norm,test_norm,storage_"
        "norm\n";
    for (const auto& r : rows) {
        out += r.strategy + ',' + fmt(r.train_seconds) + ',' + fmt(r.test_seconds) + ',' +
               std::to_string(r.storage_bytes) + ',' +
               fmt(norm(r.train_seconds, min_train), 2) + ',' +
               fmt(norm(r.test_seconds, min_test), 2) + ',' +
               fmt(norm(static_cast<double>(r.storage_bytes),
                        static_cast<double>(min_store)),
                   2) +
               '\n';
    }
    return out;
}

ExperimentRunner::ExperimentRunner(ExperimentManifest manifest, int threads)
    : manifest_(std::move(manifest)), threads_(std::max(1, threads)) {}

const TaskStream& ExperimentRunner::stream() {
    if (!opened_) {
        stream_ = manifest_.open_dataset();
        opened_ = true;
    }
    return stream_;
}

std::vector<GraphStats> ExperimentRunner::stats() { return summarize(stream()); }

void ExperimentRunner::ensure_features() {
    if (!features_.empty()) return;
    const TaskStream& s = stream();
    features_.resize(s.tasks.size());
    for (size_t t = 0; t < s.tasks.size(); ++t) {
        Eigen::MatrixXd emb;
        if (manifest_.mode == ExperimentManifest::DatasetMode::Files &&
            !manifest_.task_files[t].embeddings.empty()) {
            emb = load_embeddings_csv(manifest_.task_files[t].embeddings, *s.tasks[t]);
        } else {
            emb = deepwalk_train(*s.tasks[t], manifest_.deepwalk);
        }
        features_[t] =
            std::make_shared<Eigen::MatrixXd>(build_features(emb, *s.tasks[t]).x);
    }
}

const PreparedStream& ExperimentRunner::prepared(const SamplerConfig& sampler) {
    const std::string key = sampler_fingerprint(sampler);
    auto it = prepared_.find(key);
    if (it != prepared_.end()) return it->second;
    ensure_features();
    PreparedStream ps;
    ps.sampler = sampler;
    const TaskStream& s = stream();
    for (size_t t = 0; t < s.tasks.size(); ++t) {
        PreparedTask task;
        task.graph = s.tasks[t];
        task.features = features_[t];
        task.train_egos = extract_all(*s.tasks[t], Split::Train, sampler, features_[t]);
        task.val_egos = extract_all(*s.tasks[t], Split::Val, sampler, features_[t]);
        task.test_egos = extract_all(*s.tasks[t], Split::Test, sampler, features_[t]);
        ps.tasks.push_back(std::move(task));
    }
    ps.input_dim = static_cast<int>(features_.front()->cols());
    return prepared_.emplace(key, std::move(ps)).first->second;
}

uint64_t ExperimentRunner::run_seed(int run_index) const {
    return derive_seed(manifest_.eval_seed, "run", static_cast<uint64_t>(run_index));
}

StaticResult ExperimentRunner::run_static() {
    StaticResult result;
    result.methods = manifest_.static_methods;
    const int n_tasks = stream().num_tasks();
    const int n_methods = static_cast<int>(result.methods.size());
    const int n_runs = manifest_.runs;
    result.auc.assign(static_cast<size_t>(n_tasks),
                      std::vector<std::vector<double>>(
                          static_cast<size_t>(n_methods),
                          std::vector<double>(static_cast<size_t>(n_runs), 0.0)));

    // prepared streams materialized up front; jobs only read them
    std::vector<const PreparedStream*> method_stream(static_cast<size_t>(n_methods));
    std::vector<StrategyKind> method_kind(static_cast<size_t>(n_methods));
    for (int m = 0; m < n_methods; ++m) {
        const std::string& name = result.methods[static_cast<size_t>(m)];
        SamplerConfig sampler = manifest_.sampler;
        if (name == "gat") {
            method_kind[static_cast<size_t>(m)] = StrategyKind::IncrementalFull;
        } else {
            method_kind[static_cast<size_t>(m)] = StrategyKind::Incremental;
            sampler.strategy =
                name == "ego-bfs" ? SampleStrategy::Bfs : SampleStrategy::Rwr;
        }
        method_stream[static_cast<size_t>(m)] = &prepared(sampler);
    }

    const int jobs = n_tasks * n_methods * n_runs;
    parallel_for_jobs(jobs, threads_, [&](int j) {
        const int task = j / (n_methods * n_runs);
        const int method = (j / n_runs) % n_methods;
        const int run = j % n_runs;
        PreparedStream single;
        const PreparedStream& full = *method_stream[static_cast<size_t>(method)];
        single.tasks.push_back(full.tasks[static_cast<size_t>(task)]);
        single.input_dim = full.input_dim;
        single.sampler = full.sampler;
        StrategyConfig strat;
        strat.kind = method_kind[static_cast<size_t>(method)];
        RunResult r = run_stream(single, strat, manifest_.model, manifest_.train,
                                 run_seed(run));
        result.auc[static_cast<size_t>(task)][static_cast<size_t>(method)]
                  [static_cast<size_t>(run)] = r.auc.at(1, 1);
    });
    return result;
}

ContinualResult ExperimentRunner::run_continual() {
    ContinualResult result;
    const int n_runs = manifest_.runs;
    const auto n_strats = static_cast<int>(manifest_.strategies.size());
    result.runs.resize(static_cast<size_t>(n_runs) * static_cast<size_t>(n_strats));

    std::vector<const PreparedStream*> strat_stream(static_cast<size_t>(n_strats));
    for (int s = 0; s < n_strats; ++s) {
        SamplerConfig sampler = manifest_.sampler;
        if (manifest_.strategies[static_cast<size_t>(s)].sampler_override)
            sampler.strategy = *manifest_.strategies[static_cast<size_t>(s)].sampler_override;
        strat_stream[static_cast<size_t>(s)] = &prepared(sampler);
    }

    parallel_for_jobs(n_strats * n_runs, threads_, [&](int j) {
        const int s = j / n_runs;
        const int run = j % n_runs;
        const auto& spec = manifest_.strategies[static_cast<size_t>(s)];
        RunResult r = run_stream(*strat_stream[static_cast<size_t>(s)], spec.config,
                                 manifest_.model, manifest_.train, run_seed(run));
        ContinualRun& out = result.runs[static_cast<size_t>(j)];
        out.strategy = spec.name;
        out.run_index = run;
        out.auc = r.auc;
        out.avg = avg_auc(r.auc);
        if (r.auc.num_tasks() >= 2) out.forgetting = fgt(r.auc);
        out.resources = r.resources;
        out.task_epoch_losses = std::move(r.task_epoch_losses);
    });
    return result;
}

SweepResult ExperimentRunner::run_sweep(const std::string& axis,
                                        const std::vector<double>& values) {
    if (axis != "replay_rate" && axis != "ego_size")
        throw ConfigError("sweep axis must be 'replay_rate' or 'ego_size'");
    if (values.empty()) throw ConfigError("sweep needs at least one value");

    // sweeps apply to the first replay-based strategy in the manifest
    StrategyConfig base;
    base.kind = StrategyKind::EgoCl;
    std::optional<SampleStrategy> sampler_override;
    for (const auto& spec : manifest_.strategies)
        if (spec.config.kind == StrategyKind::EgoCl) {
            base = spec.config;
            sampler_override = spec.sampler_override;
            break;
        }

    SweepResult result;
    result.axis = axis;
    const int n_runs = manifest_.runs;
    const auto n_values = static_cast<int>(values.size());
    result.points.resize(static_cast<size_t>(n_values) * static_cast<size_t>(n_runs));

    std::vector<const PreparedStream*> value_stream(static_cast<size_t>(n_values));
    for (int v = 0; v < n_values; ++v) {
        SamplerConfig sampler = manifest_.sampler;
        if (sampler_override) sampler.strategy = *sampler_override;
        if (axis == "ego_size") {
            const double raw = values[static_cast<size_t>(v)];
            if (raw < 1 || raw != std::floor(raw))
                throw ConfigError("ego_size sweep values must be positive integers");
            sampler.ego_size = static_cast<int>(raw);
        } else {
            if (values[static_cast<size_t>(v)] < 0 || values[static_cast<size_t>(v)] > 1)
                throw ConfigError("replay_rate sweep values must lie in [0, 1]");
        }
        value_stream[static_cast<size_t>(v)] = &prepared(sampler);
    }

    parallel_for_jobs(n_values * n_runs, threads_, [&](int j) {
        const int v = j / n_runs;
        const int run = j % n_runs;
        StrategyConfig strat = base;
        if (axis == "replay_rate") strat.replay_rate = values[static_cast<size_t>(v)];
        RunResult r = run_stream(*value_stream[static_cast<size_t>(v)], strat,
                                 manifest_.model, manifest_.train, run_seed(run));
        SweepPoint& p = result.points[static_cast<size_t>(j)];
        p.value = values[static_cast<size_t>(v)];
        p.run_index = run;
        p.avg = avg_auc(r.auc);
        p.forgetting = r.auc.num_tasks() >= 2 ? fgt(r.auc) : 0.0;
    });
    return result;
}

BenchResult ExperimentRunner::run_bench() {
    BenchResult result;
    result.rows.resize(manifest_.strategies.size());
    std::vector<const PreparedStream*> strat_stream(manifest_.strategies.size());
    for (size_t s = 0; s < manifest_.strategies.size(); ++s) {
        SamplerConfig sampler = manifest_.sampler;
        if (manifest_.strategies[s].sampler_override)
            sampler.strategy = *manifest_.strategies[s].sampler_override;
        strat_stream[s] = &prepared(sampler);
    }
    // timing runs are sequential so strategies never contend for cores
    for (size_t s = 0; s < manifest_.strategies.size(); ++s) {
        const auto& spec = manifest_.strategies[s];
        RunResult r = run_stream(*strat_stream[s], spec.config, manifest_.model,
                                 manifest_.train, run_seed(0));
        BenchRow& row = result.rows[s];
        row.strategy = spec.name;
        row.train_seconds = r.resources.seconds("train");
        row.test_seconds = r.resources.seconds("test");
        row.storage_bytes = r.resources.bytes("store");
    }
    return result;
}

void write_continual_outputs(const ContinualResult& result,
                             const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    atomic_write_file(out_dir / "results.csv", result.to_csv());

    for (const auto& run : result.runs) {
        atomic_write_file(out_dir / ("auc_matrix_" + run.strategy + "_" +
                                     std::to_string(run.run_index) + ".csv"),
                          run.auc.to_csv());
    }

    for (const auto& summary : result.summarize()) {
        nlohmann::json j;
        j["strategy"] = summary.strategy;
        j["avg_auc"] = {{"mean", summary.avg_mean}, {"std", summary.avg_std}};
        if (summary.has_fgt)
            j["fgt"] = {{"mean", summary.fgt_mean}, {"std", summary.fgt_std}};
        else
            j["fgt"] = nullptr;
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& run : result.runs) {
            if (run.strategy != summary.strategy) continue;
            nlohmann::json r;
            r["run"] = run.run_index;
            r["avg_auc"] = run.avg;
            if (!std::isnan(run.forgetting)) r["fgt"] = run.forgetting;
            r["train_seconds"] = run.resources.seconds("train");
            r["test_seconds"] = run.resources.seconds("test");
            r["store_bytes"] = run.resources.bytes("store");
            runs.push_back(std::move(r));
        }
        j["runs"] = std::move(runs);
        atomic_write_file(out_dir / ("metrics_" + summary.strategy + ".json"),
                          j.dump(2) + "\n");
    }
}

}  // namespace egocl
