#include "egocl/continual_engine.hpp"

#include <algorithm>
#include <cmath>

#include "egocl/nn/batch.hpp"
#include "egocl/rng.hpp"

namespace egocl {

namespace {
// Tape granularity for ego minibatches: fixed so gradient reduction order
// never depends on batch size or thread count.
constexpr int kChunkEgos = 16;
constexpr int kEvalChunkEgos = 256;
}  // namespace

const char* strategy_name(StrategyKind k) {
    switch (k) {
        case StrategyKind::EgoCl: return "egocl";
        case StrategyKind::Incremental: return "incremental";
        case StrategyKind::IncrementalFull: return "incremental-full";
        case StrategyKind::NodeReplay: return "node-replay";
        case StrategyKind::ErMf: return "er-mf";
        case StrategyKind::Ewc: return "ewc";
        case StrategyKind::FullRetrain: return "full-retrain";
    }
    return "?";
}

std::optional<StrategyKind> strategy_from_name(std::string_view name) {
    for (StrategyKind k :
         {StrategyKind::EgoCl, StrategyKind::Incremental, StrategyKind::IncrementalFull,
          StrategyKind::NodeReplay, StrategyKind::ErMf, StrategyKind::Ewc,
          StrategyKind::FullRetrain})
        if (name == strategy_name(k)) return k;
    return std::nullopt;
}

bool strategy_uses_egos(StrategyKind k) {
    return k == StrategyKind::EgoCl || k == StrategyKind::Incremental ||
           k == StrategyKind::FullRetrain;
}

void StrategyConfig::validate() const {
    const bool replay_based = kind == StrategyKind::EgoCl ||
                              kind == StrategyKind::NodeReplay || kind == StrategyKind::ErMf;
    if (replay_rate && !replay_based)
        throw ConfigError(std::string("strategy '") + strategy_name(kind) +
                          "' does not take a replay rate");
    if (ewc_lambda && kind != StrategyKind::Ewc)
        throw ConfigError(std::string("strategy '") + strategy_name(kind) +
                          "' does not take an ewc lambda");
    if (replay_rate && (*replay_rate < 0.0 || *replay_rate > 1.0))
        throw ConfigError("replay rate must be in [0, 1]");
    if (ewc_lambda && *ewc_lambda < 0.0) throw ConfigError("ewc lambda must be >= 0");
}

PreparedStream prepare_stream(const TaskStream& stream, const SamplerConfig& sampler,
                              const DeepWalkConfig& dw) {
    stream.validate();
    sampler.validate();
    PreparedStream out;
    out.sampler = sampler;
    for (const auto& graph : stream.tasks) {
        PreparedTask t;
        t.graph = graph;
        Eigen::MatrixXd emb = deepwalk_train(*graph, dw);
        auto fm = std::make_shared<Eigen::MatrixXd>(build_features(emb, *graph).x);
        t.features = fm;
        t.train_egos = extract_all(*graph, Split::Train, sampler, fm);
        t.val_egos = extract_all(*graph, Split::Val, sampler, fm);
        t.test_egos = extract_all(*graph, Split::Test, sampler, fm);
        out.tasks.push_back(std::move(t));
    }
    out.input_dim = static_cast<int>(out.tasks.front().features->cols());
    for (const auto& t : out.tasks)
        if (t.features->cols() != out.input_dim)
            throw ConfigError("tasks disagree on feature dimension");
    return out;
}

int64_t ReplayStore::memory_bytes() const {
    int64_t total = 0;
    for (const auto& e : entries) total += e.ego.memory_bytes() + sizeof(int);
    return total;
}

int64_t NodeStore::memory_bytes() const {
    return static_cast<int64_t>(features.size()) * 8 + size() * 5;
}

void NodeStore::append(const Eigen::MatrixXd& rows, std::span<const uint8_t> labs, int task) {
    if (features.size() == 0) {
        features = rows;
    } else {
        Eigen::MatrixXd merged(features.rows() + rows.rows(), features.cols());
        merged << features, rows;
        features = std::move(merged);
    }
    labels.insert(labels.end(), labs.begin(), labs.end());
    source_tasks.insert(source_tasks.end(), labs.size(), task);
}

double EwcState::penalty(const nn::ParamSet<Real>& params) const {
    double total = 0.0;
    for (const auto& anchor : anchors)
        for (size_t t = 0; t < params.tensors.size(); ++t) {
            const auto d = params.tensors[t].value - anchor.theta_star.tensors[t].value;
            total += (anchor.fisher.tensors[t].value.array() * d.array().square())
                         .template cast<double>()
                         .sum();
        }
    return 0.5 * lambda * total;
}

void EwcState::add_penalty_grad(const nn::ParamSet<Real>& params,
                                nn::ParamSet<Real>& grads) const {
    const Real lam = static_cast<Real>(lambda);
    for (const auto& anchor : anchors)
        for (size_t t = 0; t < params.tensors.size(); ++t)
            grads.tensors[t].value.array() +=
                lam * anchor.fisher.tensors[t].value.array() *
                (params.tensors[t].value - anchor.theta_star.tensors[t].value).array();
}

int64_t EwcState::memory_bytes() const {
    int64_t total = 0;
    for (const auto& a : anchors)
        total += a.theta_star.memory_bytes() + a.fisher.memory_bytes();
    return total;
}

nn::ParamSet<Real> empirical_fisher(const nn::GnnClassifier<Real>& model,
                                    const PreparedTask& task) {
    auto fisher = model.params().zeros_like();
    auto train = task.graph->split_nodes(Split::Train);
    if (train.empty()) return fisher;
    for (NodeIndex v : train) {
        nn::Batch<Real> batch =
            nn::make_full_batch<Real>(*task.graph, *task.features, std::span(&v, 1));
        auto g = model.params().zeros_like();
        model.loss_and_grad(batch, g);
        for (size_t t = 0; t < fisher.tensors.size(); ++t)
            fisher.tensors[t].value.array() += g.tensors[t].value.array().square();
    }
    const Real inv = Real(1) / static_cast<Real>(train.size());
    for (auto& t : fisher.tensors) t.value *= inv;
    return fisher;
}

std::vector<NodeIndex> er_mf_select(const TaskGraph& g, const Eigen::MatrixXd& features,
                                    int64_t budget) {
    auto train = g.split_nodes(Split::Train);
    if (budget > static_cast<int64_t>(train.size()))
        throw ConfigError("er-mf budget exceeds the train split size");
    std::vector<NodeIndex> by_class[2];
    for (NodeIndex v : train) by_class[g.label(v)].push_back(v);

    int64_t budgets[2] = {budget - budget / 2, budget / 2};
    if (by_class[0].empty()) budgets[1] = budget;
    if (by_class[1].empty()) budgets[0] = budget;

    std::vector<NodeIndex> out;
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].empty() || budgets[c] == 0) continue;
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(features.cols());
        for (NodeIndex v : by_class[c]) mean += features.row(v);
        mean /= static_cast<double>(by_class[c].size());
        std::vector<std::pair<double, NodeIndex>> ranked;
        ranked.reserve(by_class[c].size());
        for (NodeIndex v : by_class[c])
            ranked.emplace_back((features.row(v) - mean).squaredNorm(), v);
        std::sort(ranked.begin(), ranked.end());  // ties resolve by ascending id
        const auto take = std::min<int64_t>(budgets[c],
                                            static_cast<int64_t>(ranked.size()));
        for (int64_t i = 0; i < take; ++i) out.push_back(ranked[static_cast<size_t>(i)].second);
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

// Test-time data retained per finished task. Holds no train-split material;
// this is the interface that enforces the continual-learning constraint.
struct EvalBundle {
    int task_id = 0;
    const std::vector<EgoGraph>* test_egos = nullptr;  // owned by PreparedStream
    std::shared_ptr<const TaskGraph> graph;
    std::shared_ptr<const Eigen::MatrixXd> features;
    std::vector<NodeIndex> test_nodes;
};

std::vector<const EgoGraph*> ego_ptrs(const std::vector<EgoGraph>& egos) {
    std::vector<const EgoGraph*> out;
    out.reserve(egos.size());
    for (const auto& e : egos) out.push_back(&e);
    return out;
}

double auc_on_egos(const nn::GnnClassifier<Real>& model, const std::vector<EgoGraph>& egos) {
    nn::Mat<Real> lp = nn::forward_egos<Real>(model, ego_ptrs(egos), kEvalChunkEgos);
    std::vector<double> scores(egos.size());
    std::vector<uint8_t> labels(egos.size());
    for (size_t i = 0; i < egos.size(); ++i) {
        scores[i] = std::exp(double(lp(static_cast<Eigen::Index>(i), 1)));
        labels[i] = egos[i].ego_label();
    }
    return auc(scores, labels);
}

double auc_on_full_graph(const nn::GnnClassifier<Real>& model, const TaskGraph& g,
                         const Eigen::MatrixXd& features,
                         std::span<const NodeIndex> nodes) {
    nn::Batch<Real> batch = nn::make_full_batch<Real>(g, features, nodes);
    nn::Mat<Real> lp = model.log_probs(batch);
    std::vector<double> scores(nodes.size());
    std::vector<uint8_t> labels(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i) {
        scores[i] = std::exp(double(lp(static_cast<Eigen::Index>(i), 1)));
        labels[i] = g.label(nodes[i]);
    }
    return auc(scores, labels);
}

// One epoch of minibatch SGD over ego-graphs: shuffles the pool, steps per
// batch, accumulating gradients over fixed-size tape chunks in pool order.
double ego_epoch(nn::GnnClassifier<Real>& model, nn::AdamW<Real>& opt,
                 const nn::TrainConfig& cfg, std::vector<const EgoGraph*>& pool,
                 Rng& shuffle_rng) {
    shuffle_rng.shuffle(pool);
    double loss_sum = 0.0;
    const auto total = static_cast<int64_t>(pool.size());
    for (int64_t start = 0; start < total; start += cfg.batch_size) {
        const auto batch_count = std::min<int64_t>(cfg.batch_size, total - start);
        auto grads = model.params().zeros_like();
        const std::vector<int64_t> divisors{batch_count};
        double batch_loss = 0.0;
        for (int64_t cs = start; cs < start + batch_count; cs += kChunkEgos) {
            const auto chunk = std::min<int64_t>(kChunkEgos, start + batch_count - cs);
            nn::Batch<Real> b = nn::make_ego_batch<Real>(
                std::span<const EgoGraph* const>(pool.data() + cs,
                                                 static_cast<size_t>(chunk)));
            batch_loss += model.loss_and_grad(b, grads, nullptr, &divisors);
        }
        opt.step(model.params(), grads, cfg);
        loss_sum += batch_loss * static_cast<double>(batch_count);
    }
    return total ? loss_sum / static_cast<double>(total) : 0.0;
}

// One epoch of full-graph training: a single step whose loss is the train
// NLL plus (optionally) the stored-node auxiliary term and the EWC penalty.
double full_epoch(nn::GnnClassifier<Real>& model, nn::AdamW<Real>& opt,
                  const nn::TrainConfig& cfg, const nn::Batch<Real>& batch,
                  const EwcState* ewc) {
    auto grads = model.params().zeros_like();
    std::vector<double> group_losses;
    double loss = model.loss_and_grad(batch, grads, &group_losses);
    if (ewc && !ewc->anchors.empty()) {
        loss += ewc->penalty(model.params());
        ewc->add_penalty_grad(model.params(), grads);
    }
    opt.step(model.params(), grads, cfg);
    return loss;
}

}  // namespace

RunResult run_stream(const PreparedStream& stream, const StrategyConfig& strategy,
                     const nn::ModelConfig& model_cfg, const nn::TrainConfig& train_cfg,
                     uint64_t run_seed, const RunOptions& options) {
    strategy.validate();
    train_cfg.validate();
    if (stream.tasks.empty()) throw ConfigError("empty prepared stream");
    nn::ModelConfig mc = model_cfg;
    mc.input_dim = stream.input_dim;
    mc.validate();

    const int n_tasks = stream.num_tasks();
    RunResult result;
    result.auc = AucMatrix(n_tasks);

    const double rate = strategy.kind == StrategyKind::EgoCl
                            ? strategy.effective_replay_rate()
                            : (strategy.kind == StrategyKind::NodeReplay ||
                                       strategy.kind == StrategyKind::ErMf
                                   ? strategy.effective_replay_rate()
                                   : 0.0);

    nn::GnnClassifier<Real> model(mc, derive_seed(run_seed, "model-init", 1));
    nn::AdamW<Real> opt(model.params());
    ReplayStore replay;
    NodeStore node_store;
    EwcState ewc;
    ewc.lambda = strategy.effective_lambda();
    std::vector<EvalBundle> past;

    for (int ti = 0; ti < n_tasks; ++ti) {
        const PreparedTask& task = stream.tasks[static_cast<size_t>(ti)];
        const int stage = ti + 1;
        std::vector<double> epoch_losses;

        time_section("train", result.resources, [&] {
            if (strategy.kind == StrategyKind::FullRetrain) {
                // Reference upper bound: new model on everything seen so far.
                // This mode deliberately re-reads past train splits.
                model = nn::GnnClassifier<Real>(
                    mc, derive_seed(run_seed, "model-init", static_cast<uint64_t>(stage)));
                opt = nn::AdamW<Real>(model.params());
                std::vector<const EgoGraph*> pool;
                for (int j = 0; j <= ti; ++j)
                    for (const auto& e :
                         stream.tasks[static_cast<size_t>(j)].train_egos)
                        pool.push_back(&e);
                Rng shuffle_rng(
                    derive_seed(run_seed, "shuffle", static_cast<uint64_t>(stage)));
                for (int epoch = 0; epoch < train_cfg.epochs; ++epoch)
                    epoch_losses.push_back(
                        ego_epoch(model, opt, train_cfg, pool, shuffle_rng));
            } else if (strategy_uses_egos(strategy.kind)) {
                // Algorithm: train on the shuffled union of the current task's
                // train ego-graphs and the replay set.
                std::vector<const EgoGraph*> pool;
                pool.reserve(task.train_egos.size() + replay.entries.size());
                for (const auto& e : task.train_egos) pool.push_back(&e);
                for (const auto& e : replay.entries) pool.push_back(&e.ego);
                Rng shuffle_rng(
                    derive_seed(run_seed, "shuffle", static_cast<uint64_t>(stage)));
                for (int epoch = 0; epoch < train_cfg.epochs; ++epoch)
                    epoch_losses.push_back(
                        ego_epoch(model, opt, train_cfg, pool, shuffle_rng));
            } else {
                // Full-graph modes; stored nodes ride along as an auxiliary
                // loss group of self-loop-only rows.
                auto train_nodes = task.graph->split_nodes(Split::Train);
                nn::Batch<Real> batch =
                    nn::make_full_batch<Real>(*task.graph, *task.features, train_nodes);
                if (node_store.size() > 0)
                    nn::append_singleton_rows<Real>(batch, node_store.features,
                                                    node_store.labels, 1);
                const EwcState* penalty =
                    strategy.kind == StrategyKind::Ewc ? &ewc : nullptr;
                for (int epoch = 0; epoch < train_cfg.epochs; ++epoch)
                    epoch_losses.push_back(
                        full_epoch(model, opt, train_cfg, batch, penalty));
            }
        });

        // store updates happen after training, before the task is dropped
        if (strategy.kind == StrategyKind::EgoCl) {
            const auto pool_size = static_cast<int64_t>(task.train_egos.size());
            const auto take = static_cast<int64_t>(
                std::floor(rate * static_cast<double>(pool_size)));
            if (take > 0) {
                Rng pick(derive_seed(run_seed, "replay-select",
                                     static_cast<uint64_t>(stage)));
                auto chosen = pick.sample_without_replacement(
                    static_cast<int32_t>(pool_size), static_cast<int32_t>(take));
                std::sort(chosen.begin(), chosen.end());
                for (int32_t idx : chosen)
                    replay.entries.push_back(
                        {task.train_egos[static_cast<size_t>(idx)], stage});
            }
            if (options.replay_store_dir)
                save_replay_store(replay, stream, *options.replay_store_dir);
        } else if (strategy.kind == StrategyKind::NodeReplay ||
                   strategy.kind == StrategyKind::ErMf) {
            auto train_nodes = task.graph->split_nodes(Split::Train);
            const auto pool_size = static_cast<int64_t>(train_nodes.size());
            const auto take = static_cast<int64_t>(
                std::floor(rate * static_cast<double>(pool_size)));
            std::vector<NodeIndex> chosen;
            if (strategy.kind == StrategyKind::NodeReplay) {
                Rng pick(derive_seed(run_seed, "replay-select",
                                     static_cast<uint64_t>(stage)));
                auto idx = pick.sample_without_replacement(
                    static_cast<int32_t>(pool_size), static_cast<int32_t>(take));
                std::sort(idx.begin(), idx.end());
                for (int32_t i : idx) chosen.push_back(train_nodes[static_cast<size_t>(i)]);
            } else {
                chosen = er_mf_select(*task.graph, *task.features, take);
            }
            if (!chosen.empty()) {
                Eigen::MatrixXd rows(static_cast<Eigen::Index>(chosen.size()),
                                     task.features->cols());
                std::vector<uint8_t> labs;
                for (size_t i = 0; i < chosen.size(); ++i) {
                    rows.row(static_cast<Eigen::Index>(i)) = task.features->row(chosen[i]);
                    labs.push_back(task.graph->label(chosen[i]));
                }
                node_store.append(rows, labs, stage);
            }
        } else if (strategy.kind == StrategyKind::Ewc) {
            EwcState::Anchor anchor;
            anchor.theta_star = model.params();
            anchor.fisher = empirical_fisher(model, task);
            ewc.anchors.push_back(std::move(anchor));
        }

        result.store_sizes.push_back(strategy.kind == StrategyKind::EgoCl
                                         ? static_cast<int64_t>(replay.entries.size())
                                         : node_store.size());

        // retain only test-side data for the finished task
        EvalBundle bundle;
        bundle.task_id = stage;
        bundle.test_egos = &task.test_egos;
        bundle.graph = task.graph;
        bundle.features = task.features;
        bundle.test_nodes = task.graph->split_nodes(Split::Test);
        past.push_back(std::move(bundle));

        time_section("test", result.resources, [&] {
            for (int j = 0; j < stage; ++j) {
                const EvalBundle& b = past[static_cast<size_t>(j)];
                const double score =
                    strategy_uses_egos(strategy.kind)
                        ? auc_on_egos(model, *b.test_egos)
                        : auc_on_full_graph(model, *b.graph, *b.features, b.test_nodes);
                result.auc.set(stage, j + 1, score);
            }
        });

        result.param_history.push_back(model.params());
        result.task_epoch_losses.push_back(std::move(epoch_losses));
    }

    result.resources.add_bytes("model", model.params().memory_bytes());
    if (strategy.kind == StrategyKind::EgoCl)
        result.resources.add_bytes("store", replay.memory_bytes());
    else if (strategy.kind == StrategyKind::NodeReplay || strategy.kind == StrategyKind::ErMf)
        result.resources.add_bytes("store", node_store.memory_bytes());
    else if (strategy.kind == StrategyKind::Ewc)
        result.resources.add_bytes("store", ewc.memory_bytes());
    return result;
}

void save_replay_store(const ReplayStore& store, const PreparedStream& stream,
                       const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (int ti = 0; ti < stream.num_tasks(); ++ti) {
        const int task_id = stream.tasks[static_cast<size_t>(ti)].graph->task_id();
        std::vector<EgoGraph> egos;
        for (const auto& e : store.entries)
            if (e.source_task == task_id) egos.push_back(e.ego);
        const std::string base = "store_task" + std::to_string(task_id);
        if (egos.empty()) {
            std::filesystem::remove(dir / (base + ".csv"));
            std::filesystem::remove(dir / (base + ".bmp"));
            continue;
        }
        write_ego_dump(egos, *stream.tasks[static_cast<size_t>(ti)].graph,
                       dir / (base + ".csv"), dir / (base + ".bmp"));
    }
}

ReplayStore load_replay_store(const PreparedStream& stream,
                              const std::filesystem::path& dir) {
    ReplayStore store;
    for (int ti = 0; ti < stream.num_tasks(); ++ti) {
        const PreparedTask& task = stream.tasks[static_cast<size_t>(ti)];
        const int task_id = task.graph->task_id();
        const std::string base = "store_task" + std::to_string(task_id);
        if (!std::filesystem::exists(dir / (base + ".csv"))) continue;
        for (const auto& rec :
             read_ego_dump(dir / (base + ".csv"), dir / (base + ".bmp")))
            store.entries.push_back(
                {ego_from_record(rec, *task.graph, task.features), task_id});
    }
    return store;
}

}  // namespace egocl
