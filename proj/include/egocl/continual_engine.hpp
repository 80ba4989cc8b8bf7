#pragma once

#include <optional>

#include "egocl/ego_sampler.hpp"
#include "egocl/eval_metrics.hpp"
#include "egocl/feature_pipeline.hpp"
#include "egocl/nn/optimizer.hpp"
#include "egocl/task_stream.hpp"

namespace egocl {

enum class StrategyKind : uint8_t {
    EgoCl,            // ego-graph minibatch training with ego-graph replay
    Incremental,      // ego-graph training, no replay
    IncrementalFull,  // full-graph training, no replay
    NodeReplay,       // full-graph training with random stored nodes
    ErMf,             // full-graph training, mean-of-feature node selection
    Ewc,              // full-graph training with quadratic anchoring
    FullRetrain,      // reference: fresh model on the union of all train data
};

const char* strategy_name(StrategyKind k);
std::optional<StrategyKind> strategy_from_name(std::string_view name);
bool strategy_uses_egos(StrategyKind k);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::EgoCl;
    std::optional<double> replay_rate;  // replay strategies only
    std::optional<double> ewc_lambda;   // ewc only

    double effective_replay_rate() const { return replay_rate.value_or(0.1); }
    double effective_lambda() const { return ewc_lambda.value_or(10.0); }
    void validate() const;
};

/// One task with everything training needs: features built, ego sets
/// extracted per split. Immutable and shared across runs.
struct PreparedTask {
    std::shared_ptr<const TaskGraph> graph;
    std::shared_ptr<const Eigen::MatrixXd> features;
    std::vector<EgoGraph> train_egos;
    std::vector<EgoGraph> val_egos;
    std::vector<EgoGraph> test_egos;
};

struct PreparedStream {
    std::vector<PreparedTask> tasks;
    int input_dim = 0;
    SamplerConfig sampler;

    int num_tasks() const { return static_cast<int>(tasks.size()); }
};

/// Embeds, builds features, and extracts per-split ego-graphs for each task.
PreparedStream prepare_stream(const TaskStream& stream, const SamplerConfig& sampler,
                              const DeepWalkConfig& dw);

/// Accumulated ego-graph replay set. Entries are immutable copies drawn from
/// train-split ego sets only.
struct ReplayStore {
    struct Entry {
        EgoGraph ego;
        int source_task;
    };
    std::vector<Entry> entries;

    int64_t memory_bytes() const;
};

/// Stored (feature row, label) pairs for node-replay style strategies;
/// features are frozen at storage time.
struct NodeStore {
    Eigen::MatrixXd features;  // entries x d
    std::vector<uint8_t> labels;
    std::vector<int> source_tasks;

    int64_t size() const { return static_cast<int64_t>(labels.size()); }
    int64_t memory_bytes() const;
    void append(const Eigen::MatrixXd& rows, std::span<const uint8_t> labs, int task);
};

/// Per-task anchors: parameter snapshot plus diagonal empirical Fisher.
struct EwcState {
    struct Anchor {
        nn::ParamSet<Real> theta_star;
        nn::ParamSet<Real> fisher;
    };
    std::vector<Anchor> anchors;
    double lambda = 10.0;

    double penalty(const nn::ParamSet<Real>& params) const;
    void add_penalty_grad(const nn::ParamSet<Real>& params, nn::ParamSet<Real>& grads) const;
    int64_t memory_bytes() const;
};

/// Diagonal empirical Fisher at the current parameters: mean over train
/// examples of the squared per-example NLL gradient.
nn::ParamSet<Real> empirical_fisher(const nn::GnnClassifier<Real>& model,
                                    const PreparedTask& task);

/// Mean-of-feature selection: per class, the train nodes closest to the
/// class's mean feature vector (ties by node id). A class absent from the
/// train split donates its share of the budget to the present class.
std::vector<NodeIndex> er_mf_select(const TaskGraph& g, const Eigen::MatrixXd& features,
                                    int64_t budget);

struct RunResult {
    AucMatrix auc;
    std::vector<nn::ParamSet<Real>> param_history;     // snapshot after each task
    std::vector<std::vector<double>> task_epoch_losses;  // [task][epoch]
    std::vector<int64_t> store_sizes;                  // |store| after each task
    ResourceReport resources;

    RunResult() : auc(1) {}
};

struct RunOptions {
    std::optional<std::filesystem::path> replay_store_dir;  // checkpoint between tasks
};

/// Runs the stream under one strategy. Training carries parameters across
/// tasks (except FullRetrain, which reinitializes per stage); after each task
/// the test AUC is computed on all tasks seen so far.
RunResult run_stream(const PreparedStream& stream, const StrategyConfig& strategy,
                     const nn::ModelConfig& model_cfg, const nn::TrainConfig& train_cfg,
                     uint64_t run_seed, const RunOptions& options = {});

void save_replay_store(const ReplayStore& store, const PreparedStream& stream,
                       const std::filesystem::path& dir);
ReplayStore load_replay_store(const PreparedStream& stream,
                              const std::filesystem::path& dir);

}  // namespace egocl
