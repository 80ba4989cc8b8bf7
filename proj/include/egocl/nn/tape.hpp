#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "egocl/common.hpp"
#include "egocl/nn/batch.hpp"

namespace egocl::nn {

/// Reverse-mode tape over dense matrices. Values are computed eagerly when an
/// op is recorded; backward() replays the tape in reverse. Attention and
/// neighborhood aggregation are fused ops with analytic backward passes so
/// the masked softmax never materializes an n x n matrix.
template <class S>
class Tape {
public:
    using Id = int32_t;

    Id input(const Mat<S>* m) { return push(m, false); }
    Id param(const Mat<S>* m) { return push(m, true); }

    const Mat<S>& value(Id id) const {
        const Node& n = nodes_[static_cast<size_t>(id)];
        return n.ext ? *n.ext : n.val;
    }

    Mat<S>& grad(Id id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        const Mat<S>& v = n.ext ? *n.ext : n.val;
        if (n.grad.rows() != v.rows() || n.grad.cols() != v.cols())
            n.grad = Mat<S>::Zero(v.rows(), v.cols());
        return n.grad;
    }

    bool needs_grad(Id id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

    Id matmul(Id a, Id b) {
        Id out = push(value(a) * value(b), needs_grad(a) || needs_grad(b));
        node(out).back = [this, a, b, out] {
            const Mat<S>& g = grad(out);
            if (needs_grad(a)) grad(a).noalias() += g * value(b).transpose();
            if (needs_grad(b)) grad(b).noalias() += value(a).transpose() * g;
        };
        return out;
    }

    Id elu(Id a) {
        const Mat<S>& x = value(a);
        Mat<S> y = x.unaryExpr([](S v) { return v > S(0) ? v : S(std::expm1(double(v))); });
        Id out = push(std::move(y), needs_grad(a));
        node(out).back = [this, a, out] {
            if (!needs_grad(a)) return;
            const Mat<S>& y = value(out);
            const Mat<S>& g = grad(out);
            grad(a).array() += g.array() * y.array().unaryExpr([](S v) {
                return v > S(0) ? S(1) : v + S(1);
            });
        };
        return out;
    }

    struct AttnCapture {
        Mat<S> row_sums;          // rows x heads
        std::vector<S> alpha;     // heads-major, aligned with topo->nbr
    };

    /// Multi-head masked attention + aggregation. Per head h over block
    /// columns [h*k, (h+1)*k) of `hw`:
    ///   e_ij = LeakyReLU(asrc_h . hw_i + adst_h . hw_j), j in nbr(i)
    ///   alpha_i. = softmax(e_i.)
    ///   out_i = sum_j alpha_ij hw_j
    /// Heads are concatenated, or averaged when `average` is set (the output
    /// layer). Rows with empty support (dummies) yield zero rows.
    Id gat_aggregate(Id hw, Id asrc, Id adst, const BatchTopology* topo, double leaky_slope,
                     bool average, AttnCapture* capture = nullptr) {
        const Mat<S>& h = value(hw);
        const Mat<S>& as = value(asrc);
        const Mat<S>& ad = value(adst);
        const int heads = static_cast<int>(as.cols());
        const int k = static_cast<int>(as.rows());
        const int32_t rows = topo->rows;
        const int64_t nnz = topo->nnz();
        const S slope = static_cast<S>(leaky_slope);

        auto saved = std::make_shared<AttnSaved>();
        saved->alpha.assign(static_cast<size_t>(nnz) * static_cast<size_t>(heads), S(0));
        saved->dz.assign(static_cast<size_t>(nnz) * static_cast<size_t>(heads), S(0));
        if (capture) capture->row_sums = Mat<S>::Zero(rows, heads);

        Mat<S> out = Mat<S>::Zero(rows, average ? k : heads * k);
        Mat<S> s(rows, heads), t(rows, heads);
        for (int hd = 0; hd < heads; ++hd) {
            s.col(hd) = h.middleCols(hd * k, k) * as.col(hd);
            t.col(hd) = h.middleCols(hd * k, k) * ad.col(hd);
        }
        const S avg_w = average ? S(1) / static_cast<S>(heads) : S(1);

        for (int hd = 0; hd < heads; ++hd) {
            S* alpha = saved->alpha.data() + static_cast<size_t>(hd) * static_cast<size_t>(nnz);
            S* dz = saved->dz.data() + static_cast<size_t>(hd) * static_cast<size_t>(nnz);
            const int out_col = average ? 0 : hd * k;
            for (int32_t r = 0; r < rows; ++r) {
                const int64_t e0 = topo->nbr_offsets[static_cast<size_t>(r)];
                const int64_t e1 = topo->nbr_offsets[static_cast<size_t>(r) + 1];
                if (e0 == e1) continue;
                S zmax = std::numeric_limits<S>::lowest();
                for (int64_t e = e0; e < e1; ++e) {
                    const S pre = s(r, hd) + t(topo->nbr[static_cast<size_t>(e)], hd);
                    const S z = pre > S(0) ? pre : slope * pre;
                    dz[e] = pre > S(0) ? S(1) : slope;
                    alpha[e] = z;  // raw score, normalized below
                    zmax = std::max(zmax, z);
                }
                S denom = S(0);
                for (int64_t e = e0; e < e1; ++e) {
                    alpha[e] = static_cast<S>(std::exp(double(alpha[e] - zmax)));
                    denom += alpha[e];
                }
                const S inv = S(1) / denom;
                auto out_row = out.row(r).segment(out_col, k);
                for (int64_t e = e0; e < e1; ++e) {
                    alpha[e] *= inv;
                    out_row += (avg_w * alpha[e]) *
                               h.row(topo->nbr[static_cast<size_t>(e)]).segment(hd * k, k);
                }
                if (capture) {
                    S sum = S(0);
                    for (int64_t e = e0; e < e1; ++e) sum += alpha[e];
                    capture->row_sums(r, hd) = sum;
                }
            }
        }
        if (capture) capture->alpha = saved->alpha;

        Id out_id = push(std::move(out), needs_grad(hw) || needs_grad(asrc) || needs_grad(adst));
        node(out_id).back = [this, hw, asrc, adst, topo, heads, k, saved, average, avg_w,
                             out_id] {
            const Mat<S>& h = value(hw);
            const Mat<S>& as = value(asrc);
            const Mat<S>& ad = value(adst);
            const Mat<S>& g = grad(out_id);
            const int32_t rows = topo->rows;
            const int64_t nnz = topo->nnz();
            Mat<S>& gh = grad(hw);
            Mat<S>& gas = grad(asrc);
            Mat<S>& gad = grad(adst);

            Eigen::Matrix<S, Eigen::Dynamic, 1> ds(rows), dt(rows);
            std::vector<S> dalpha;
            for (int hd = 0; hd < heads; ++hd) {
                const S* alpha =
                    saved->alpha.data() + static_cast<size_t>(hd) * static_cast<size_t>(nnz);
                const S* dzf =
                    saved->dz.data() + static_cast<size_t>(hd) * static_cast<size_t>(nnz);
                const int out_col = average ? 0 : hd * k;
                ds.setZero();
                dt.setZero();
                for (int32_t r = 0; r < rows; ++r) {
                    const int64_t e0 = topo->nbr_offsets[static_cast<size_t>(r)];
                    const int64_t e1 = topo->nbr_offsets[static_cast<size_t>(r) + 1];
                    if (e0 == e1) continue;
                    auto g_row = g.row(r).segment(out_col, k);
                    dalpha.resize(static_cast<size_t>(e1 - e0));
                    // aggregation backward + alpha gradient
                    S dot_sum = S(0);
                    for (int64_t e = e0; e < e1; ++e) {
                        const int32_t j = topo->nbr[static_cast<size_t>(e)];
                        gh.row(j).segment(hd * k, k) += (avg_w * alpha[e]) * g_row;
                        const S da =
                            avg_w * g_row.dot(h.row(j).segment(hd * k, k));
                        dalpha[static_cast<size_t>(e - e0)] = da;
                        dot_sum += da * alpha[e];
                    }
                    // softmax + LeakyReLU backward
                    S ds_r = S(0);
                    for (int64_t e = e0; e < e1; ++e) {
                        const S de =
                            alpha[e] * (dalpha[static_cast<size_t>(e - e0)] - dot_sum) * dzf[e];
                        ds_r += de;
                        dt(topo->nbr[static_cast<size_t>(e)]) += de;
                    }
                    ds(r) = ds_r;
                }
                // de/dhw via s and t, plus attention vector grads
                gh.middleCols(hd * k, k).noalias() += ds * as.col(hd).transpose();
                gh.middleCols(hd * k, k).noalias() += dt * ad.col(hd).transpose();
                gas.col(hd).noalias() += h.middleCols(hd * k, k).transpose() * ds;
                gad.col(hd).noalias() += h.middleCols(hd * k, k).transpose() * dt;
            }
        };
        return out_id;
    }

    /// out_i = sum_j w_ij hw_j over the CSR support; `weights` must align
    /// with topo->nbr and be symmetric (w_ij == w_ji), which holds for the
    /// GCN normalization.
    Id neighborhood_sum(Id hw, const BatchTopology* topo,
                        std::shared_ptr<const std::vector<S>> weights) {
        Mat<S> out = aggregate(value(hw), *topo, *weights);
        Id out_id = push(std::move(out), needs_grad(hw));
        node(out_id).back = [this, hw, topo, weights, out_id] {
            if (!needs_grad(hw)) return;
            grad(hw) += aggregate(grad(out_id), *topo, *weights);
        };
        return out_id;
    }

    Id gather_rows(Id a, const std::vector<int32_t>* rows) {
        const Mat<S>& x = value(a);
        Mat<S> out(static_cast<Eigen::Index>(rows->size()), x.cols());
        for (size_t i = 0; i < rows->size(); ++i)
            out.row(static_cast<Eigen::Index>(i)) = x.row((*rows)[i]);
        Id out_id = push(std::move(out), needs_grad(a));
        node(out_id).back = [this, a, rows, out_id] {
            if (!needs_grad(a)) return;
            const Mat<S>& g = grad(out_id);
            Mat<S>& ga = grad(a);
            for (size_t i = 0; i < rows->size(); ++i)
                ga.row((*rows)[i]) += g.row(static_cast<Eigen::Index>(i));
        };
        return out_id;
    }

    Id log_softmax_rows(Id a) {
        const Mat<S>& x = value(a);
        Mat<S> out(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const S m = x.row(r).maxCoeff();
            double lse = 0.0;
            for (Eigen::Index c = 0; c < x.cols(); ++c)
                lse += std::exp(double(x(r, c) - m));
            const S logz = m + static_cast<S>(std::log(lse));
            out.row(r) = x.row(r).array() - logz;
        }
        Id out_id = push(std::move(out), needs_grad(a));
        node(out_id).back = [this, a, out_id] {
            if (!needs_grad(a)) return;
            const Mat<S>& y = value(out_id);
            const Mat<S>& g = grad(out_id);
            Mat<S>& ga = grad(a);
            for (Eigen::Index r = 0; r < y.rows(); ++r) {
                const S gsum = g.row(r).sum();
                ga.row(r) += g.row(r) - gsum * y.row(r).array().exp().matrix();
            }
        };
        return out_id;
    }

    /// Sum over loss groups of the group's mean NLL. `group_losses`
    /// (optional) receives each group's mean. When `divisors` is given it
    /// replaces the per-group row counts, so chunks of a larger batch sum to
    /// that batch's mean exactly.
    Id nll_grouped(Id logp, const std::vector<uint8_t>* labels,
                   const std::vector<int8_t>* groups, int num_groups,
                   std::vector<double>* group_losses = nullptr,
                   const std::vector<int64_t>* divisors = nullptr) {
        const Mat<S>& lp = value(logp);
        std::vector<int64_t> group_size(static_cast<size_t>(num_groups), 0);
        if (divisors) {
            group_size = *divisors;
        } else {
            for (int8_t gi : *groups) ++group_size[static_cast<size_t>(gi)];
        }
        std::vector<double> sums(static_cast<size_t>(num_groups), 0.0);
        for (size_t i = 0; i < labels->size(); ++i)
            sums[static_cast<size_t>((*groups)[i])] -=
                double(lp(static_cast<Eigen::Index>(i), (*labels)[i]));
        double total = 0.0;
        if (group_losses) group_losses->assign(static_cast<size_t>(num_groups), 0.0);
        for (int gi = 0; gi < num_groups; ++gi) {
            if (group_size[static_cast<size_t>(gi)] == 0) continue;
            const double mean =
                sums[static_cast<size_t>(gi)] /
                static_cast<double>(group_size[static_cast<size_t>(gi)]);
            total += mean;
            if (group_losses) (*group_losses)[static_cast<size_t>(gi)] = mean;
        }
        Mat<S> out(1, 1);
        out(0, 0) = static_cast<S>(total);
        Id out_id = push(std::move(out), needs_grad(logp));
        auto sizes = std::make_shared<std::vector<int64_t>>(std::move(group_size));
        node(out_id).back = [this, logp, labels, groups, sizes, out_id] {
            if (!needs_grad(logp)) return;
            const S g = grad(out_id)(0, 0);
            Mat<S>& gl = grad(logp);
            for (size_t i = 0; i < labels->size(); ++i) {
                const auto gi = static_cast<size_t>((*groups)[i]);
                gl(static_cast<Eigen::Index>(i), (*labels)[i]) -=
                    g / static_cast<S>((*sizes)[gi]);
            }
        };
        return out_id;
    }

    /// Seeds d(root)=1 and sweeps the tape in reverse.
    void backward(Id root) {
        grad(root).setConstant(S(1));
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if (it->back && it->needs_grad) it->back();
    }

    void reset() { nodes_.clear(); }

private:
    struct AttnSaved {
        std::vector<S> alpha;
        std::vector<S> dz;
    };

    struct Node {
        Mat<S> val;
        const Mat<S>* ext = nullptr;
        Mat<S> grad;
        bool needs_grad = false;
        std::function<void()> back;
    };

    static Mat<S> aggregate(const Mat<S>& h, const BatchTopology& topo,
                            const std::vector<S>& w) {
        Mat<S> out = Mat<S>::Zero(h.rows(), h.cols());
        for (int32_t r = 0; r < topo.rows; ++r)
            for (int64_t e = topo.nbr_offsets[static_cast<size_t>(r)];
                 e < topo.nbr_offsets[static_cast<size_t>(r) + 1]; ++e)
                out.row(r) += w[static_cast<size_t>(e)] *
                              h.row(topo.nbr[static_cast<size_t>(e)]);
        return out;
    }

    Node& node(Id id) { return nodes_[static_cast<size_t>(id)]; }

    Id push(Mat<S> v, bool needs) {
        Node n;
        n.val = std::move(v);
        n.needs_grad = needs;
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    Id push(const Mat<S>* v, bool needs) {
        Node n;
        n.ext = v;
        n.needs_grad = needs;
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
};

}  // namespace egocl::nn
