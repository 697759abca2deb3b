#include <doctest.h>

#include <cmath>

#include "mim/gnn.hpp"
#include "testutil.hpp"

using namespace mim;
using testutil::random_tensor;

namespace {

GnnConfig tiny_cfg() {
    GnnConfig cfg;
    cfg.hidden_dim = 5;
    cfg.mean_pool_dim = 5;
    cfg.max_pool_dim = 5;
    cfg.attn_pool_dim = 10;
    return cfg;
}

GgnnLayerParams random_layer(std::size_t hd, Rng& rng) {
    GgnnLayerParams p;
    p.msg_weight = random_tensor({hd, hd}, rng, true);
    p.msg_bias = random_tensor({hd}, rng, true);
    p.update_w = random_tensor({hd, hd}, rng, true);
    p.update_u = random_tensor({hd, hd}, rng, true);
    p.update_b = random_tensor({hd}, rng, true);
    p.reset_w = random_tensor({hd, hd}, rng, true);
    p.reset_u = random_tensor({hd, hd}, rng, true);
    p.reset_b = random_tensor({hd}, rng, true);
    p.cand_w = random_tensor({hd, hd}, rng, true);
    p.cand_u = random_tensor({hd, hd}, rng, true);
    p.cand_b = random_tensor({hd}, rng, true);
    return p;
}

GnnParams random_params(const GnnConfig& cfg, Rng& rng) {
    GnnParams p;
    for (std::size_t i = 0; i < cfg.layers; ++i) p.layers.push_back(random_layer(cfg.hidden_dim, rng));
    for (auto& t : p.topk) t.score_vector = random_tensor({cfg.hidden_dim, 1}, rng, true);
    p.pool.gate_weight = random_tensor({cfg.hidden_dim, 1}, rng, true);
    p.pool.gate_bias = random_tensor({1}, rng, true);
    p.pool.proj_weight = random_tensor({cfg.hidden_dim, cfg.attn_pool_dim}, rng, true);
    return p;
}

GraphSample random_graph(std::size_t n, std::size_t hd, Rng& rng) {
    GraphSample g;
    g.node_features = random_tensor({n, hd}, rng, false);
    g.adjacency = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        std::vector<double> row(n);
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = rng.uniform(0.05, 1.0);
            row_sum += row[j];
        }
        for (std::size_t j = 0; j < n; ++j) g.adjacency.at(i, j) = row[j] / row_sum;
    }
    g.node_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) g.node_ids[i] = i;
    return g;
}

GraphSample permuted(const GraphSample& g, const std::vector<std::size_t>& perm) {
    const std::size_t n = g.node_count(), d = g.node_features.cols();
    GraphSample out;
    out.node_features = Tensor::zeros({n, d});
    out.adjacency = Tensor::zeros({n, n});
    out.node_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.node_ids[i] = i;
        for (std::size_t c = 0; c < d; ++c) out.node_features.at(i, c) = g.node_features(perm[i], c);
        for (std::size_t j = 0; j < n; ++j) out.adjacency.at(i, j) = g.adjacency(perm[i], perm[j]);
    }
    return out;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

TEST_CASE("topk_select matches the sort oracle on 200 random score vectors") {
    Rng rng(61);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(30);
        std::vector<double> scores(n);
        for (double& s : scores) s = double(rng.uniform_index(10)) / 3.0; // with ties
        const double ratio = 0.05 + 0.95 * rng.uniform();
        CHECK(topk_select(scores, ratio) == testutil::topk_bruteforce(scores, ratio));
    }
}

TEST_CASE("topk keeps ceil(ratio*n) nodes; the published chain is 116->93->75->23") {
    std::vector<double> scores(116);
    Rng rng(62);
    for (double& s : scores) s = rng.normal();
    auto k1 = topk_select(scores, 0.8);
    CHECK(k1.size() == 93);
    std::vector<double> s2(93);
    for (double& s : s2) s = rng.normal();
    auto k2 = topk_select(s2, 0.8);
    CHECK(k2.size() == 75);
    std::vector<double> s3(75);
    for (double& s : s3) s = rng.normal();
    auto k3 = topk_select(s3, 0.3);
    CHECK(k3.size() == 23);
    // ceil guarantees at least one node for any ratio
    CHECK(topk_select({0.4}, 0.01).size() == 1);
}

TEST_CASE("single-node graph with unit self-weight reduces to a GRU cell step") {
    Rng rng(63);
    GnnConfig cfg = tiny_cfg();
    const std::size_t hd = cfg.hidden_dim;
    GgnnLayerParams p = random_layer(hd, rng);
    GraphSample g;
    g.node_features = random_tensor({1, hd}, rng, false);
    g.adjacency = Tensor::full({1, 1}, 1.0);
    g.node_ids = {0};
    Tape tape;
    GraphSample out = ggnn_layer(tape, cfg, p, g);

    // hand-computed GRU cell on m = W h + b
    std::vector<double> h(hd), m(hd, 0.0);
    for (std::size_t j = 0; j < hd; ++j) h[j] = g.node_features(0, j);
    for (std::size_t j = 0; j < hd; ++j) {
        for (std::size_t k = 0; k < hd; ++k) m[j] += h[k] * p.msg_weight(k, j);
        m[j] += p.msg_bias.values()[j];
    }
    std::vector<double> zv(hd), rv(hd), cv(hd);
    for (std::size_t j = 0; j < hd; ++j) {
        double z = p.update_b.values()[j], r = p.reset_b.values()[j];
        for (std::size_t k = 0; k < hd; ++k) {
            z += m[k] * p.update_w(k, j) + h[k] * p.update_u(k, j);
            r += m[k] * p.reset_w(k, j) + h[k] * p.reset_u(k, j);
        }
        zv[j] = sigmoid_ref(z);
        rv[j] = sigmoid_ref(r);
    }
    for (std::size_t j = 0; j < hd; ++j) {
        double c = p.cand_b.values()[j];
        for (std::size_t k = 0; k < hd; ++k) {
            c += m[k] * p.cand_w(k, j) + rv[k] * h[k] * p.cand_u(k, j);
        }
        cv[j] = std::tanh(c);
    }
    for (std::size_t j = 0; j < hd; ++j) {
        const double expect = (1.0 - zv[j]) * h[j] + zv[j] * cv[j];
        CHECK(out.node_features(0, j) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("zero adjacency reduces messages to the bias") {
    Rng rng(64);
    GnnConfig cfg = tiny_cfg();
    const std::size_t hd = cfg.hidden_dim;
    GgnnLayerParams p = random_layer(hd, rng);
    GraphSample g;
    g.node_features = random_tensor({3, hd}, rng, false);
    g.adjacency = Tensor::zeros({3, 3});
    g.node_ids = {0, 1, 2};
    Tape tape;
    GraphSample out = ggnn_layer(tape, cfg, p, g);
    // reference with m = bias for every node
    for (std::size_t v = 0; v < 3; ++v) {
        std::vector<double> h(hd), m(hd);
        for (std::size_t j = 0; j < hd; ++j) {
            h[j] = g.node_features(v, j);
            m[j] = p.msg_bias.values()[j];
        }
        for (std::size_t j = 0; j < hd; ++j) {
            double z = p.update_b.values()[j], r = p.reset_b.values()[j];
            for (std::size_t k = 0; k < hd; ++k) {
                z += m[k] * p.update_w(k, j) + h[k] * p.update_u(k, j);
                r += m[k] * p.reset_w(k, j) + h[k] * p.reset_u(k, j);
            }
            z = sigmoid_ref(z);
            r = sigmoid_ref(r);
            double c = p.cand_b.values()[j];
            for (std::size_t k = 0; k < hd; ++k) {
                double rk = p.reset_b.values()[k];
                for (std::size_t q = 0; q < hd; ++q) {
                    rk += m[q] * p.reset_w(q, k) + h[q] * p.reset_u(q, k);
                }
                c += m[k] * p.cand_w(k, j) + sigmoid_ref(rk) * h[k] * p.cand_u(k, j);
            }
            const double expect = (1.0 - z) * h[j] + z * std::tanh(c);
            CHECK(out.node_features(v, j) == doctest::Approx(expect).epsilon(1e-10));
        }
    }
}

TEST_CASE("ggnn_layer is permutation equivariant") {
    Rng rng(65);
    GnnConfig cfg = tiny_cfg();
    GgnnLayerParams p = random_layer(cfg.hidden_dim, rng);
    GraphSample g = random_graph(6, cfg.hidden_dim, rng);
    std::vector<std::size_t> perm{4, 2, 0, 5, 1, 3};
    GraphSample gp = permuted(g, perm);
    Tape t1, t2;
    GraphSample a = ggnn_layer(t1, cfg, p, g);
    GraphSample b = ggnn_layer(t2, cfg, p, gp);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t c = 0; c < cfg.hidden_dim; ++c) {
            CHECK(std::fabs(b.node_features(i, c) - a.node_features(perm[i], c)) < 1e-12);
        }
    }
}

TEST_CASE("ratio 1 with positive scores keeps all nodes, features gated by tanh(score)") {
    Rng rng(66);
    GnnConfig cfg = tiny_cfg();
    TopkParams tp;
    tp.score_vector = Tensor::full({cfg.hidden_dim, 1}, 0.5, true);
    GraphSample g = random_graph(4, cfg.hidden_dim, rng);
    for (double& v : g.node_features.values()) v = std::fabs(v) + 0.1; // strictly positive scores
    Tape tape;
    TopkSelection sel;
    GraphSample out = topk_pool(tape, cfg, tp, g, 1.0, &sel);
    CHECK(out.node_count() == 4);
    CHECK(out.node_ids == g.node_ids);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(sel.scores[i] > 0.0);
        for (std::size_t c = 0; c < cfg.hidden_dim; ++c) {
            const double expect = g.node_features(i, c) * std::tanh(sel.scores[i]);
            CHECK(out.node_features(i, c) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("topk_pool restricts the adjacency without renormalizing") {
    Rng rng(67);
    GnnConfig cfg = tiny_cfg();
    TopkParams tp;
    tp.score_vector = random_tensor({cfg.hidden_dim, 1}, rng, true);
    GraphSample g = random_graph(6, cfg.hidden_dim, rng);
    Tape tape;
    TopkSelection sel;
    GraphSample out = topk_pool(tape, cfg, tp, g, 0.5, &sel);
    REQUIRE(out.node_count() == 3);
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            CHECK(out.adjacency(a, b) == g.adjacency(sel.kept[a], sel.kept[b]));
        }
    }
    // node ids preserved as the original subset
    for (std::size_t a = 0; a < 3; ++a) CHECK(out.node_ids[a] == g.node_ids[sel.kept[a]]);
}

TEST_CASE("topk_pool on an empty graph is a contract error") {
    GnnConfig cfg = tiny_cfg();
    TopkParams tp;
    tp.score_vector = Tensor::zeros({cfg.hidden_dim, 1}, true);
    GraphSample g;
    g.node_features = Tensor::zeros({1, cfg.hidden_dim});
    g.adjacency = Tensor::zeros({1, 1});
    g.node_ids = {};
    Tape tape;
    CHECK_THROWS_AS(topk_pool(tape, cfg, tp, g, 0.5), ContractError);
}

TEST_CASE("global pool on a single node: mean and max slices equal the features") {
    Rng rng(68);
    GnnConfig cfg = tiny_cfg();
    GnnParams params = random_params(cfg, rng);
    GraphSample g = random_graph(1, cfg.hidden_dim, rng);
    Tape tape;
    Tensor c = global_pool(tape, cfg, params.pool, g);
    REQUIRE(c.size() == cfg.pooled_dim());
    for (std::size_t j = 0; j < cfg.hidden_dim; ++j) {
        CHECK(c.values()[j] == doctest::Approx(g.node_features(0, j)));
        CHECK(c.values()[cfg.mean_pool_dim + j] == doctest::Approx(g.node_features(0, j)));
    }
}

TEST_CASE("global pool is invariant to node permutation") {
    Rng rng(69);
    GnnConfig cfg = tiny_cfg();
    GnnParams params = random_params(cfg, rng);
    for (int trial = 0; trial < 20; ++trial) {
        GraphSample g = random_graph(5, cfg.hidden_dim, rng);
        std::vector<std::size_t> perm{3, 1, 4, 0, 2};
        GraphSample gp = permuted(g, perm);
        Tape t1, t2;
        Tensor a = global_pool(t1, cfg, params.pool, g);
        Tensor b = global_pool(t2, cfg, params.pool, gp);
        for (std::size_t j = 0; j < a.size(); ++j) {
            CHECK(std::fabs(a.values()[j] - b.values()[j]) < 1e-12);
        }
    }
}

TEST_CASE("gnn_forward runs a minimal graph end to end") {
    Rng rng(70);
    GnnConfig cfg = tiny_cfg();
    GnnParams params = random_params(cfg, rng);
    GraphSample g = random_graph(4, cfg.hidden_dim, rng);
    Tape tape;
    Tensor c = gnn_forward(tape, cfg, params, g);
    REQUIRE(c.size() == cfg.pooled_dim());
    for (double v : c.values()) CHECK(std::isfinite(v));
}

TEST_CASE("gnn_forward is invariant to node permutation for generic inputs") {
    Rng rng(71);
    GnnConfig cfg = tiny_cfg();
    GnnParams params = random_params(cfg, rng);
    GraphSample g = random_graph(7, cfg.hidden_dim, rng);
    std::vector<std::size_t> perm{6, 0, 3, 1, 5, 2, 4};
    GraphSample gp = permuted(g, perm);
    Tape t1, t2;
    Tensor a = gnn_forward(t1, cfg, params, g);
    Tensor b = gnn_forward(t2, cfg, params, gp);
    for (std::size_t j = 0; j < a.size(); ++j) {
        CHECK(std::fabs(a.values()[j] - b.values()[j]) < 1e-9);
    }
}

TEST_CASE("gnn gradients reach every parameter and match finite differences") {
    Rng rng(72);
    GnnConfig cfg = tiny_cfg();
    GnnParams params = random_params(cfg, rng);
    GraphSample g = random_graph(5, cfg.hidden_dim, rng);
    auto forward = [&](Tape& t) { return mean(t, gnn_forward(t, cfg, params, g)); };
    std::vector<Tensor> all;
    for (const auto& l : params.layers) {
        all.insert(all.end(), {l.msg_weight, l.msg_bias, l.update_w, l.update_u, l.update_b,
                               l.reset_w, l.reset_u, l.reset_b, l.cand_w, l.cand_u, l.cand_b});
    }
    for (const auto& t : params.topk) all.push_back(t.score_vector);
    all.insert(all.end(), {params.pool.gate_weight, params.pool.gate_bias,
                           params.pool.proj_weight});
    auto r = testutil::finite_diff_check(forward, all, 3, rng);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("gated features stay bounded by max(|h0|, 1)") {
    Rng rng(73);
    GnnConfig cfg = tiny_cfg();
    GnnParams params = random_params(cfg, rng);
    GraphSample g = random_graph(6, cfg.hidden_dim, rng);
    double bound = 1.0;
    for (double v : g.node_features.values()) bound = std::max(bound, std::fabs(v));
    Tape tape;
    GraphSample cur = g;
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        cur = ggnn_layer(tape, cfg, params.layers[i], cur);
        for (double v : cur.node_features.values()) {
            CHECK(std::fabs(v) <= bound + 1e-12);
        }
    }
}
