#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <memory>

#include "egocl/nn/model.hpp"
#include "egocl/nn/optimizer.hpp"
#include "egocl/rng.hpp"

using namespace egocl;
using namespace egocl::nn;

namespace {

TaskGraph random_graph(int n, double p, Rng& rng, uint64_t split_seed = 1) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    std::vector<TaskGraph::Edge> edges;
    for (int v = 1; v < n; ++v)
        edges.push_back({static_cast<NodeIndex>(rng.below(static_cast<uint64_t>(v))),
                         static_cast<NodeIndex>(v)});
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (rng.bernoulli(p)) edges.push_back({static_cast<NodeIndex>(a),
                                                   static_cast<NodeIndex>(b)});
    std::vector<uint8_t> labels(static_cast<size_t>(n));
    for (auto& l : labels) l = rng.bernoulli(0.5);
    return TaskGraph::build(0, ids, edges, Eigen::MatrixXd::Zero(n, 3), labels, split_seed);
}

std::shared_ptr<Eigen::MatrixXd> random_features(int n, int d, Rng& rng) {
    auto x = std::make_shared<Eigen::MatrixXd>(n, d);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) (*x)(r, c) = rng.normal();
    return x;
}

std::vector<EgoGraph> sample_egos(const TaskGraph& g, int ego_size, int count,
                                  std::shared_ptr<const Eigen::MatrixXd> feats, Rng& rng) {
    SamplerConfig cfg;
    cfg.ego_size = ego_size;
    std::vector<EgoGraph> out;
    for (int i = 0; i < count; ++i) {
        auto v = static_cast<NodeIndex>(rng.below(static_cast<uint64_t>(g.num_nodes())));
        out.push_back(bfs_extract(g, v, cfg, feats));
    }
    return out;
}

std::vector<const EgoGraph*> ptrs(const std::vector<EgoGraph>& egos) {
    std::vector<const EgoGraph*> p;
    for (const auto& e : egos) p.push_back(&e);
    return p;
}

ModelConfig small_cfg(Arch arch, int input_dim) {
    ModelConfig cfg;
    cfg.arch = arch;
    cfg.input_dim = input_dim;
    cfg.hidden_total = 8;
    cfg.heads = 2;
    return cfg;
}

// Central finite differences over every parameter scalar.
double max_grad_rel_err(GnnClassifier<double>& model, const Batch<double>& batch,
                        double h = 1e-5) {
    auto grads = model.params().zeros_like();
    model.loss_and_grad(batch, grads);
    auto loss_at = [&] {
        auto scratch = model.params().zeros_like();
        return model.loss_and_grad(batch, scratch);
    };
    double worst = 0.0;
    for (size_t t = 0; t < model.params().tensors.size(); ++t) {
        auto& m = model.params().tensors[t].value;
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double saved = m(r, c);
                m(r, c) = saved + h;
                const double lp = loss_at();
                m(r, c) = saved - h;
                const double lm = loss_at();
                m(r, c) = saved;
                const double fd = (lp - lm) / (2 * h);
                const double an = grads.tensors[t].value(r, c);
                const double rel =
                    std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
                worst = std::max(worst, rel);
            }
    }
    return worst;
}

}  // namespace

TEST_CASE("gradients match central finite differences (both architectures)") {
    Rng rng(515);
    for (Arch arch : {Arch::Gat, Arch::Gcn}) {
        for (int trial = 0; trial < 4; ++trial) {
            const int d = 5;
            TaskGraph g = random_graph(12, 0.25, rng);
            auto feats = random_features(12, d, rng);
            auto egos = sample_egos(g, 6, 2, feats, rng);
            Batch<double> batch = make_ego_batch<double>(ptrs(egos));
            GnnClassifier<double> model(small_cfg(arch, d), rng.next());
            CHECK(max_grad_rel_err(model, batch) <= 1e-4);
        }
    }
}

TEST_CASE("gradients on the full-graph path match finite differences") {
    Rng rng(99);
    TaskGraph g = random_graph(10, 0.3, rng);
    auto feats = random_features(10, 4, rng);
    auto train = g.split_nodes(Split::Train);
    Batch<double> batch = make_full_batch<double>(g, *feats, train);
    for (Arch arch : {Arch::Gat, Arch::Gcn}) {
        GnnClassifier<double> model(small_cfg(arch, 4), rng.next());
        CHECK(max_grad_rel_err(model, batch) <= 1e-4);
    }
}

TEST_CASE("attention: singleton support and equal-feature neighbors") {
    // Two-node ego with identical feature rows: the softmax support of the
    // ego row carries two equal logits, so both attention weights are 1/2.
    auto feats = std::make_shared<Eigen::MatrixXd>(2, 3);
    feats->row(0) << 0.3, -1.2, 0.7;
    feats->row(1) = feats->row(0);
    std::vector<std::string> ids{"0", "1"};
    TaskGraph g = TaskGraph::build(0, ids, {{0, 1}}, Eigen::MatrixXd::Zero(2, 3), {1, 0}, 1);
    SamplerConfig scfg;
    scfg.ego_size = 2;
    EgoGraph pair_ego = bfs_extract(g, 0, scfg, feats);

    Batch<double> batch = make_ego_batch<double>(std::vector<const EgoGraph*>{&pair_ego});
    GnnClassifier<double> model(small_cfg(Arch::Gat, 3), 7);
    AttnDiagnostics<double> diag;
    model.log_probs(batch, &diag);
    REQUIRE(diag.layers.size() == 2);
    const auto& cap = diag.layers[0];
    const auto nnz = static_cast<int64_t>(batch.topo.nbr.size());
    for (int hd = 0; hd < 2; ++hd)
        for (int64_t e = batch.topo.nbr_offsets[0]; e < batch.topo.nbr_offsets[1]; ++e)
            CHECK(cap.alpha[static_cast<size_t>(hd * nnz + e)] == doctest::Approx(0.5));

    // Single node with only a self-loop: alpha_ii == 1 and the layer output
    // is the transformed feature row itself.
    auto solo_feats = std::make_shared<Eigen::MatrixXd>(1, 3);
    solo_feats->row(0) << 1.0, 2.0, -0.5;
    TaskGraph g1 = TaskGraph::build(0, {"0"}, {}, Eigen::MatrixXd::Zero(1, 3), {1}, 1);
    EgoGraph solo = bfs_extract(g1, 0, scfg, solo_feats);
    Batch<double> b1 = make_ego_batch<double>(std::vector<const EgoGraph*>{&solo});
    Tape<double> tape;
    Mat<double> x = b1.x;
    Mat<double> w = Mat<double>::Random(3, 4);  // 2 heads x 2 dims
    Mat<double> asrc = Mat<double>::Random(2, 2);
    Mat<double> adst = Mat<double>::Random(2, 2);
    auto xid = tape.input(&x);
    auto wid = tape.param(&w);
    auto hw = tape.matmul(xid, wid);
    typename Tape<double>::AttnCapture cap1;
    auto out = tape.gat_aggregate(hw, tape.param(&asrc), tape.param(&adst), &b1.topo, 0.2,
                                  false, &cap1);
    CHECK(cap1.alpha[0] == doctest::Approx(1.0));
    CHECK(cap1.alpha[1] == doctest::Approx(1.0));
    const Mat<double>& y = tape.value(out);
    const Mat<double> expect = x * w;  // alpha = 1 so aggregation is identity
    CHECK((y - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("attention rows sum to one over real support") {
    Rng rng(21);
    TaskGraph g = random_graph(40, 0.1, rng);
    auto feats = random_features(40, 6, rng);
    auto egos = sample_egos(g, 9, 8, feats, rng);
    Batch<double> batch = make_ego_batch<double>(ptrs(egos));
    GnnClassifier<double> model(small_cfg(Arch::Gat, 6), 3);
    AttnDiagnostics<double> diag;
    model.log_probs(batch, &diag);
    for (const auto& cap : diag.layers)
        for (int32_t r = 0; r < batch.topo.rows; ++r)
            for (Eigen::Index hd = 0; hd < cap.row_sums.cols(); ++hd) {
                if (batch.topo.real[static_cast<size_t>(r)])
                    CHECK(std::abs(cap.row_sums(r, hd) - 1.0) <= 1e-6);
                else
                    CHECK(cap.row_sums(r, hd) == 0.0);
            }
}

TEST_CASE("dummy invariance: extra padding never changes ego outputs") {
    Rng rng(33);
    // ten disjoint 3-node paths, so every ego tops out at three real members
    std::vector<std::string> ids;
    std::vector<TaskGraph::Edge> edges;
    for (int k = 0; k < 30; ++k) ids.push_back(std::to_string(k));
    for (int k = 0; k < 10; ++k) {
        edges.push_back({static_cast<NodeIndex>(3 * k), static_cast<NodeIndex>(3 * k + 1)});
        edges.push_back({static_cast<NodeIndex>(3 * k + 1), static_cast<NodeIndex>(3 * k + 2)});
    }
    std::vector<uint8_t> labels(30);
    for (auto& l : labels) l = rng.bernoulli(0.5) ? 1 : 0;
    TaskGraph g = TaskGraph::build(0, ids, edges, Eigen::MatrixXd::Zero(30, 3), labels, 1);
    auto feats = random_features(30, 5, rng);
    SamplerConfig small;
    small.ego_size = 6;
    SamplerConfig big;
    big.ego_size = 13;
    for (Arch arch : {Arch::Gat, Arch::Gcn}) {
        GnnClassifier<double> model(small_cfg(arch, 5), 11);
        int checked = 0;
        for (NodeIndex v = 0; v < 30 && checked < 5; ++v) {
            EgoGraph a = bfs_extract(g, v, small, feats);
            REQUIRE(a.real_count() == 3);
            EgoGraph b = bfs_extract(g, v, big, feats);
            REQUIRE(b.real_count() == 3);
            ++checked;
            Batch<double> ba = make_ego_batch<double>(std::vector<const EgoGraph*>{&a});
            Batch<double> bb = make_ego_batch<double>(std::vector<const EgoGraph*>{&b});
            Mat<double> la = model.log_probs(ba);
            Mat<double> lb = model.log_probs(bb);
            CHECK((la - lb).cwiseAbs().maxCoeff() <= 1e-9);
        }
        CHECK(checked > 0);
    }
}

TEST_CASE("permutation equivariance over non-ego members") {
    Rng rng(44);
    TaskGraph g = random_graph(30, 0.12, rng);
    auto feats = random_features(30, 5, rng);
    SamplerConfig cfg;
    cfg.ego_size = 8;
    for (Arch arch : {Arch::Gat, Arch::Gcn}) {
        GnnClassifier<double> model(small_cfg(arch, 5), 17);
        for (int t = 0; t < 6; ++t) {
            auto v = static_cast<NodeIndex>(rng.below(30));
            EgoGraph e = bfs_extract(g, v, cfg, feats);
            const int n = e.size();
            std::vector<int> perm(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
            std::vector<int> tail(perm.begin() + 1, perm.end());
            rng.shuffle(tail);
            std::copy(tail.begin(), tail.end(), perm.begin() + 1);

            std::vector<NodeIndex> members(static_cast<size_t>(n));
            std::vector<uint8_t> adj(static_cast<size_t>(n) * static_cast<size_t>(n));
            for (int i = 0; i < n; ++i)
                members[static_cast<size_t>(i)] =
                    e.members()[static_cast<size_t>(perm[static_cast<size_t>(i)])];
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    adj[static_cast<size_t>(i) * static_cast<size_t>(n) +
                        static_cast<size_t>(j)] =
                        e.adj(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
            EgoGraph p(e.task_id(), e.ego_node(), members, e.real_count(), adj, e.ego_label(),
                       feats);

            Batch<double> b0 = make_ego_batch<double>(std::vector<const EgoGraph*>{&e});
            Batch<double> b1 = make_ego_batch<double>(std::vector<const EgoGraph*>{&p});
            Mat<double> l0 = model.log_probs(b0);
            Mat<double> l1 = model.log_probs(b1);
            CHECK((l0 - l1).cwiseAbs().maxCoeff() <= 1e-9);
        }
    }
}

TEST_CASE("log-softmax and nll behaviors") {
    Tape<double> tape;
    Mat<double> logits = Mat<double>::Zero(3, 2);
    auto id = tape.input(&logits);
    auto lsm = tape.log_softmax_rows(id);
    const Mat<double>& y = tape.value(lsm);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c) CHECK(y(r, c) == doctest::Approx(std::log(0.5)));

    SUBCASE("exponentials sum to one on random logit rows") {
        Rng rng(3);
        Mat<double> z(20, 2);
        for (int r = 0; r < 20; ++r)
            for (int c = 0; c < 2; ++c) z(r, c) = rng.normal() * 5;
        Tape<double> t2;
        const Mat<double>& out = t2.value(t2.log_softmax_rows(t2.input(&z)));
        for (int r = 0; r < 20; ++r)
            CHECK(std::abs(std::exp(out(r, 0)) + std::exp(out(r, 1)) - 1.0) <= 1e-6);
    }

    SUBCASE("nll hand values and random oracle") {
        Mat<double> lp(2, 2);
        lp << std::log(1 - 1e-9), std::log(1e-9), std::log(1e-9), std::log(1 - 1e-9);
        std::vector<uint8_t> labels{0, 1};
        CHECK(nll_loss(lp, labels) <= 1e-8);

        Mat<double> uniform = Mat<double>::Constant(4, 2, std::log(0.5));
        std::vector<uint8_t> l2{0, 1, 1, 0};
        CHECK(nll_loss(uniform, l2) == doctest::Approx(std::log(2.0)));

        Rng rng(8);
        Mat<double> r(5, 2);
        std::vector<uint8_t> l3;
        double expect = 0;
        for (int i = 0; i < 5; ++i) {
            const double p = 0.05 + 0.9 * rng.uniform01();
            r(i, 0) = std::log(p);
            r(i, 1) = std::log(1 - p);
            l3.push_back(rng.bernoulli(0.5) ? 1 : 0);
            expect -= l3.back() ? r(i, 1) : r(i, 0);
        }
        CHECK(nll_loss(r, l3) == doctest::Approx(expect / 5).epsilon(1e-12));
    }
}

TEST_CASE("forward_batch returns one log-prob row per ego") {
    Rng rng(5);
    TaskGraph g = random_graph(25, 0.15, rng);
    auto feats = random_features(25, 4, rng);
    auto egos = sample_egos(g, 5, 7, feats, rng);
    GnnClassifier<float> model(small_cfg(Arch::Gat, 4), 2);
    Mat<float> lp = forward_egos<float>(model, ptrs(egos), 3);
    CHECK(lp.rows() == 7);
    CHECK(lp.cols() == 2);
    for (Eigen::Index r = 0; r < lp.rows(); ++r)
        CHECK(std::abs(std::exp(double(lp(r, 0))) + std::exp(double(lp(r, 1))) - 1.0) <= 1e-6);
}

TEST_CASE("real node without a self-loop is rejected at batch build") {
    auto feats = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(2, 3));
    std::vector<NodeIndex> members{0, 1};
    std::vector<uint8_t> adj(4, 0);  // no self-loops at all
    EgoGraph broken(0, 0, members, 2, adj, 1, feats);
    CHECK_THROWS_AS(make_ego_batch<double>(std::vector<const EgoGraph*>{&broken}),
                    NumericError);
}

TEST_CASE("adamw: zero-grad fixpoint, decay shrinkage, quadratic convergence") {
    ModelConfig cfg = small_cfg(Arch::Gcn, 3);
    GnnClassifier<double> model(cfg, 5);
    auto& params = model.params();

    SUBCASE("zero gradient and zero decay leave parameters unchanged") {
        AdamW<double> opt(params);
        auto before = params;
        auto zeros = params.zeros_like();
        TrainConfig tc;
        tc.weight_decay = 0.0;
        opt.step(params, zeros, tc);
        for (size_t i = 0; i < params.tensors.size(); ++i)
            CHECK(params.tensors[i].value == before.tensors[i].value);
    }

    SUBCASE("pure decay shrinks norms") {
        AdamW<double> opt(params);
        const double norm_before = params.tensors[0].value.norm();
        auto zeros = params.zeros_like();
        TrainConfig tc;
        tc.weight_decay = 0.1;
        opt.step(params, zeros, tc);
        CHECK(params.tensors[0].value.norm() < norm_before);
    }

    SUBCASE("non-finite gradients abort") {
        AdamW<double> opt(params);
        auto bad = params.zeros_like();
        bad.tensors[0].value(0, 0) = std::numeric_limits<double>::quiet_NaN();
        TrainConfig tc;
        CHECK_THROWS_AS(opt.step(params, bad, tc), NumericError);
    }

    SUBCASE("100 steps on a convex quadratic reach gradient norm < 1e-6") {
        // f(theta) = 0.5 * sum c_k (theta_k - o_k)^2, optimum at o.
        ParamSet<double> theta;
        theta.tensors.push_back({"w", Mat<double>::Zero(3, 1)});
        Mat<double> opt_point(3, 1), curv(3, 1);
        opt_point << 0.02, -0.013, 0.007;
        curv << 2e-3, 1e-3, 5e-4;
        AdamW<double> adam(theta);
        TrainConfig tc;
        tc.learning_rate = 5e-4;
        tc.weight_decay = 0.0;
        double gnorm = 1;
        for (int step = 0; step < 100; ++step) {
            auto grads = theta.zeros_like();
            grads.tensors[0].value = curv.cwiseProduct(theta.tensors[0].value - opt_point);
            gnorm = grads.tensors[0].value.norm();
            adam.step(theta, grads, tc);
        }
        CHECK(gnorm < 1e-6);
        CHECK((theta.tensors[0].value - opt_point).norm() < 1e-3);
    }
}

TEST_CASE("training a linearly separable batch drives loss below 0.1") {
    Rng rng(200);
    const int d = 6;
    const int count = 40;
    auto feats = std::make_shared<Eigen::MatrixXd>(count, d);
    Eigen::VectorXd w(d);
    for (int c = 0; c < d; ++c) w(c) = rng.normal();
    std::vector<std::string> ids;
    std::vector<uint8_t> labels;
    for (int i = 0; i < count; ++i) {
        ids.push_back(std::to_string(i));
        Eigen::VectorXd x(d);
        do {
            for (int c = 0; c < d; ++c) x(c) = rng.normal();
        } while (std::abs(w.dot(x)) < 0.5);  // enforce a margin
        feats->row(i) = x;
        labels.push_back(w.dot(x) > 0 ? 1 : 0);
    }
    TaskGraph g = TaskGraph::build(0, ids, {}, Eigen::MatrixXd::Zero(count, 3), labels, 1);
    SamplerConfig scfg;
    scfg.ego_size = 1;
    std::vector<EgoGraph> egos;
    for (NodeIndex v = 0; v < count; ++v) egos.push_back(bfs_extract(g, v, scfg, feats));

    GnnClassifier<float> model(small_cfg(Arch::Gat, d), 9);
    AdamW<float> opt(model.params());
    TrainConfig tc;
    tc.epochs = 100;
    Batch<float> batch = make_ego_batch<float>(ptrs(egos));
    double loss = 1;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        auto grads = model.params().zeros_like();
        loss = model.loss_and_grad(batch, grads);
        opt.step(model.params(), grads, tc);
    }
    CHECK(loss < 0.1);
}

TEST_CASE("checkpoint round-trips exactly and validates shape") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "egocl_test_ckpt";
    fs::create_directories(dir);

    GnnClassifier<float> model(small_cfg(Arch::Gat, 5), 123);
    save_checkpoint(model.params(), dir / "m.ckpt");
    GnnClassifier<float> other(small_cfg(Arch::Gat, 5), 456);
    load_checkpoint(other.params(), dir / "m.ckpt");
    for (size_t i = 0; i < model.params().tensors.size(); ++i)
        CHECK(model.params().tensors[i].value == other.params().tensors[i].value);

    GnnClassifier<float> mismatched(small_cfg(Arch::Gat, 6), 1);
    CHECK_THROWS_AS(load_checkpoint(mismatched.params(), dir / "m.ckpt"), IngestError);

    GnnClassifier<double> dmodel(small_cfg(Arch::Gcn, 4), 9);
    save_checkpoint(dmodel.params(), dir / "d.ckpt");
    GnnClassifier<double> dother(small_cfg(Arch::Gcn, 4), 10);
    load_checkpoint(dother.params(), dir / "d.ckpt");
    for (size_t i = 0; i < dmodel.params().tensors.size(); ++i)
        CHECK(dmodel.params().tensors[i].value == dother.params().tensors[i].value);
}

TEST_CASE("gcn on K3 with unit features treats all egos identically") {
    auto feats = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Ones(3, 3));
    TaskGraph g = TaskGraph::build(0, {"0", "1", "2"}, {{0, 1}, {1, 2}, {0, 2}},
                                   Eigen::MatrixXd::Zero(3, 3), {1, 0, 1}, 1);
    SamplerConfig cfg;
    cfg.ego_size = 3;
    EgoGraph e = bfs_extract(g, 0, cfg, feats);
    Batch<double> b = make_ego_batch<double>(std::vector<const EgoGraph*>{&e});
    GnnClassifier<double> model(small_cfg(Arch::Gcn, 3), 77);
    Mat<double> lp = model.log_probs(b);
    EgoGraph e1 = bfs_extract(g, 1, cfg, feats);
    Batch<double> b1 = make_ego_batch<double>(std::vector<const EgoGraph*>{&e1});
    CHECK((model.log_probs(b1) - lp).cwiseAbs().maxCoeff() <= 1e-12);
}
