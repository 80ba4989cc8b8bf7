#pragma once

#include <functional>
#include <limits>

#include "egocl/manifest.hpp"

namespace egocl {

struct StaticResult {
    std::vector<std::string> methods;
    // auc[task][method][run]
    std::vector<std::vector<std::vector<double>>> auc;

    double mean(int task, int method) const;
    std::string to_csv() const;  // mean per cell, best per row flagged with '*'
};

struct ContinualRun {
    std::string strategy;
    int run_index = 0;
    AucMatrix auc{1};
    double avg = 0.0;
    double forgetting = std::numeric_limits<double>::quiet_NaN();  // NaN when N == 1
    ResourceReport resources;
    std::vector<std::vector<double>> task_epoch_losses;
};

struct ContinualResult {
    std::vector<ContinualRun> runs;  // grouped by strategy, then run index

    struct Summary {
        std::string strategy;
        double avg_mean = 0, avg_std = 0, fgt_mean = 0, fgt_std = 0;
        bool has_fgt = false;
    };
    std::vector<Summary> summarize() const;
    std::string to_csv() const;
};

struct SweepPoint {
    double value = 0;
    int run_index = 0;
    double avg = 0;
    double forgetting = 0;
};

struct SweepResult {
    std::string axis;
    std::vector<SweepPoint> points;
    std::string to_csv() const;
};

struct BenchRow {
    std::string strategy;
    double train_seconds = 0;
    double test_seconds = 0;
    int64_t storage_bytes = 0;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    std::string to_csv() const;  // raw plus min-normalized columns
};

/// Runs experiments described by a manifest. Embeddings and feature matrices
/// are computed once per task and shared across every run; prepared ego sets
/// are cached per sampler configuration.
class ExperimentRunner {
public:
    explicit ExperimentRunner(ExperimentManifest manifest, int threads = 1);

    const ExperimentManifest& manifest() const { return manifest_; }
    const TaskStream& stream();
    std::vector<GraphStats> stats();

    const PreparedStream& prepared(const SamplerConfig& sampler);

    StaticResult run_static();
    ContinualResult run_continual();
    SweepResult run_sweep(const std::string& axis, const std::vector<double>& values);
    BenchResult run_bench();

    uint64_t run_seed(int run_index) const;

private:
    void ensure_features();

    ExperimentManifest manifest_;
    int threads_;
    bool opened_ = false;
    TaskStream stream_;
    std::vector<std::shared_ptr<const Eigen::MatrixXd>> features_;
    std::map<std::string, PreparedStream> prepared_;  // keyed by sampler fingerprint
};

/// Writes the standard continual outputs: results.csv, one
/// auc_matrix_<strategy>_<run>.csv per run, and metrics_<strategy>.json.
void write_continual_outputs(const ContinualResult& result,
                             const std::filesystem::path& out_dir);

/// Runs fn(0..jobs-1) on a small thread pool; results must be written to
/// disjoint slots so the output is independent of the schedule.
void parallel_for_jobs(int jobs, int threads, const std::function<void(int)>& fn);

}  // namespace egocl
