#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "egocl/nn/tape.hpp"
#include "egocl/rng.hpp"

namespace egocl::nn {

enum class Arch : uint8_t { Gat, Gcn };

inline const char* arch_name(Arch a) { return a == Arch::Gat ? "gat" : "gcn"; }

struct ModelConfig {
    Arch arch = Arch::Gat;
    int input_dim = 0;
    int layers = 2;
    int hidden_total = 128;
    int heads = 8;
    int classes = 2;
    double leaky_slope = 0.2;

    int head_dim() const { return hidden_total / heads; }
    void validate() const {
        if (input_dim < 1) throw ConfigError("model: input_dim must be set");
        if (layers < 1) throw ConfigError("model: needs at least one layer");
        if (hidden_total < 1 || heads < 1 || classes < 2)
            throw ConfigError("model: bad width configuration");
        if (arch == Arch::Gat && hidden_total % heads != 0)
            throw ConfigError("model: hidden_total must be divisible by heads");
    }
};

/// Named trainable tensors. Doubles as the gradient container (same shapes).
template <class S>
struct ParamSet {
    struct Tensor {
        std::string name;
        Mat<S> value;
    };
    std::vector<Tensor> tensors;

    Mat<S>& at(std::string_view name) {
        for (auto& t : tensors)
            if (t.name == name) return t.value;
        throw ConfigError("no parameter tensor named '" + std::string(name) + "'");
    }

    int64_t scalar_count() const {
        int64_t n = 0;
        for (const auto& t : tensors) n += t.value.size();
        return n;
    }

    int64_t memory_bytes() const { return scalar_count() * static_cast<int64_t>(sizeof(S)); }

    ParamSet zeros_like() const {
        ParamSet z;
        z.tensors.reserve(tensors.size());
        for (const auto& t : tensors)
            z.tensors.push_back({t.name, Mat<S>::Zero(t.value.rows(), t.value.cols())});
        return z;
    }

    void set_zero() {
        for (auto& t : tensors) t.value.setZero();
    }

    bool all_finite() const {
        for (const auto& t : tensors)
            if (!t.value.allFinite()) return false;
        return true;
    }

    template <class T>
    ParamSet<T> cast() const {
        ParamSet<T> out;
        out.tensors.reserve(tensors.size());
        for (const auto& t : tensors)
            out.tensors.push_back({t.name, t.value.template cast<T>()});
        return out;
    }
};

/// Per-layer attention captures for diagnostics and tests.
template <class S>
struct AttnDiagnostics {
    std::vector<typename Tape<S>::AttnCapture> layers;
};

/// Two-layer (by default) GNN ego classifier: GAT or GCN message passing,
/// ELU between layers, heads concatenated on hidden layers and averaged on
/// the output layer, log-softmax over `classes` outputs.
template <class S>
class GnnClassifier {
public:
    GnnClassifier(ModelConfig cfg, uint64_t init_seed) : cfg_(cfg) {
        cfg_.validate();
        int in = cfg_.input_dim;
        for (int l = 0; l < cfg_.layers; ++l) {
            const bool last = l == cfg_.layers - 1;
            const std::string p = "layer" + std::to_string(l) + ".";
            if (cfg_.arch == Arch::Gat) {
                const int k = last ? cfg_.classes : cfg_.head_dim();
                params_.tensors.push_back({p + "W", Mat<S>(in, cfg_.heads * k)});
                params_.tensors.push_back({p + "a_src", Mat<S>(k, cfg_.heads)});
                params_.tensors.push_back({p + "a_dst", Mat<S>(k, cfg_.heads)});
                in = last ? cfg_.classes : cfg_.hidden_total;
            } else {
                const int out = last ? cfg_.classes : cfg_.hidden_total;
                params_.tensors.push_back({p + "W", Mat<S>(in, out)});
                in = out;
            }
        }
        for (size_t i = 0; i < params_.tensors.size(); ++i)
            glorot_fill(params_.tensors[i].value, derive_seed(init_seed, "init", i));
    }

    const ModelConfig& config() const { return cfg_; }
    ParamSet<S>& params() { return params_; }
    const ParamSet<S>& params() const { return params_; }

    /// Builds the forward graph on a tape; returns the log-prob node (one row
    /// per loss row) and param leaf ids aligned with params().tensors.
    struct Handles {
        typename Tape<S>::Id logp;
        std::vector<typename Tape<S>::Id> param_ids;
    };

    Handles build_forward(Tape<S>& tape, const Batch<S>& batch,
                          AttnDiagnostics<S>* diag = nullptr) const {
        if (batch.x.cols() != cfg_.input_dim)
            throw ConfigError("batch feature dim " + std::to_string(batch.x.cols()) +
                              " does not match model input_dim " +
                              std::to_string(cfg_.input_dim));
        Handles h;
        h.param_ids.reserve(params_.tensors.size());
        for (const auto& t : params_.tensors) h.param_ids.push_back(tape.param(&t.value));

        std::shared_ptr<const std::vector<S>> gcn_w;
        if (cfg_.arch == Arch::Gcn)
            gcn_w = std::make_shared<const std::vector<S>>(gcn_weights<S>(batch.topo));

        typename Tape<S>::Id x = tape.input(&batch.x);
        size_t pi = 0;
        for (int l = 0; l < cfg_.layers; ++l) {
            const bool last = l == cfg_.layers - 1;
            if (cfg_.arch == Arch::Gat) {
                auto w = h.param_ids[pi++];
                auto asrc = h.param_ids[pi++];
                auto adst = h.param_ids[pi++];
                auto hw = tape.matmul(x, w);
                typename Tape<S>::AttnCapture* cap = nullptr;
                if (diag) {
                    diag->layers.emplace_back();
                    cap = &diag->layers.back();
                }
                x = tape.gat_aggregate(hw, asrc, adst, &batch.topo, cfg_.leaky_slope, last,
                                       cap);
            } else {
                auto w = h.param_ids[pi++];
                auto hw = tape.matmul(x, w);
                x = tape.neighborhood_sum(hw, &batch.topo, gcn_w);
            }
            if (!last) x = tape.elu(x);
        }
        auto picked = tape.gather_rows(x, &batch.topo.loss_rows);
        h.logp = tape.log_softmax_rows(picked);
        return h;
    }

    /// Inference: log-probability rows for the batch's loss rows.
    Mat<S> log_probs(const Batch<S>& batch, AttnDiagnostics<S>* diag = nullptr) const {
        Tape<S> tape;
        auto h = build_forward(tape, batch, diag);
        Mat<S> out = tape.value(h.logp);
        if (!out.allFinite())
            throw NumericError("non-finite activation in forward pass");
        return out;
    }

    /// One forward/backward; accumulates parameter gradients into `grads`
    /// (shape-aligned with params()) and returns the loss. The loss is the
    /// sum over loss groups of each group's mean NLL; `divisors` replaces the
    /// per-group counts when the batch is a chunk of a larger step.
    double loss_and_grad(const Batch<S>& batch, ParamSet<S>& grads,
                         std::vector<double>* group_losses = nullptr,
                         const std::vector<int64_t>* divisors = nullptr) const {
        Tape<S> tape;
        auto h = build_forward(tape, batch);
        auto loss = tape.nll_grouped(h.logp, &batch.labels, &batch.topo.loss_group,
                                     batch.topo.num_groups, group_losses, divisors);
        const double value = double(tape.value(loss)(0, 0));
        if (!std::isfinite(value)) throw NumericError("non-finite training loss");
        tape.backward(loss);
        for (size_t i = 0; i < h.param_ids.size(); ++i)
            grads.tensors[i].value += tape.grad(h.param_ids[i]);
        return value;
    }

private:
    static void glorot_fill(Mat<S>& m, uint64_t seed) {
        Rng rng(seed);
        const double limit = std::sqrt(6.0 / (double(m.rows()) + double(m.cols())));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                m(r, c) = static_cast<S>((2.0 * rng.uniform01() - 1.0) * limit);
    }

    ModelConfig cfg_;
    ParamSet<S> params_;
};

// Checkpoint format: "EGOCKPT1", u32 version, u32 tensor count, then per
// tensor u32 name length, name bytes, u64 rows, u64 cols, row-major doubles.
// Values are serialized as doubles, which round-trips float and double
// parameters exactly.
void save_param_blob(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Eigen::MatrixXd>>& tensors);
std::vector<std::pair<std::string, Eigen::MatrixXd>> load_param_blob(
    const std::filesystem::path& path);

template <class S>
void save_checkpoint(const ParamSet<S>& params, const std::filesystem::path& path) {
    std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;
    tensors.reserve(params.tensors.size());
    for (const auto& t : params.tensors)
        tensors.emplace_back(t.name, t.value.template cast<double>());
    save_param_blob(path, tensors);
}

template <class S>
void load_checkpoint(ParamSet<S>& params, const std::filesystem::path& path) {
    auto tensors = load_param_blob(path);
    if (tensors.size() != params.tensors.size())
        throw IngestError("checkpoint tensor count does not match model");
    for (size_t i = 0; i < tensors.size(); ++i) {
        auto& dst = params.tensors[i];
        if (tensors[i].first != dst.name || tensors[i].second.rows() != dst.value.rows() ||
            tensors[i].second.cols() != dst.value.cols())
            throw IngestError("checkpoint tensor '" + tensors[i].first +
                              "' does not match model shape");
        dst.value = tensors[i].second.cast<S>();
    }
}

/// Forward a set of ego-graphs and return one log-probability row per ego.
template <class S>
Mat<S> forward_egos(const GnnClassifier<S>& model, std::span<const EgoGraph* const> egos,
                    int chunk = 256) {
    Mat<S> out(static_cast<Eigen::Index>(egos.size()), model.config().classes);
    for (size_t start = 0; start < egos.size(); start += static_cast<size_t>(chunk)) {
        const size_t count = std::min(static_cast<size_t>(chunk), egos.size() - start);
        Batch<S> b = make_ego_batch<S>(egos.subspan(start, count));
        out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) =
            model.log_probs(b);
    }
    return out;
}

/// Mean negative log-likelihood of the labelled class.
template <class S>
double nll_loss(const Mat<S>& log_probs, std::span<const uint8_t> labels) {
    if (static_cast<size_t>(log_probs.rows()) != labels.size())
        throw ConfigError("nll_loss: rows and labels differ in length");
    double sum = 0.0;
    for (size_t i = 0; i < labels.size(); ++i)
        sum -= double(log_probs(static_cast<Eigen::Index>(i), labels[i]));
    return labels.empty() ? 0.0 : sum / static_cast<double>(labels.size());
}

}  // namespace egocl::nn
