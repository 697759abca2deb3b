#include <doctest.h>

#include <cmath>

#include "mim/attention.hpp"
#include "testutil.hpp"

using namespace mim;
using testutil::random_tensor;

namespace {

AttentionConfig tiny_cfg() {
    AttentionConfig cfg;
    cfg.input_dim = 10;
    cfg.node_dim = 6;
    return cfg;
}

AttentionParams random_params(const AttentionConfig& cfg, Rng& rng) {
    AttentionParams p;
    p.wq = random_tensor({cfg.input_dim, cfg.node_dim}, rng, true);
    p.wk = random_tensor({cfg.input_dim, cfg.node_dim}, rng, true);
    p.wv = random_tensor({cfg.input_dim, cfg.node_dim}, rng, true);
    return p;
}

} // namespace

TEST_CASE("build_graph output shapes and node ids") {
    Rng rng(51);
    AttentionConfig cfg = tiny_cfg();
    AttentionParams params = random_params(cfg, rng);
    Tape tape;
    GraphSample g = build_graph(tape, cfg, params, random_tensor({7, cfg.input_dim}, rng, false));
    CHECK(g.node_features.shape() == Shape{7, cfg.node_dim});
    CHECK(g.adjacency.shape() == Shape{7, 7});
    REQUIRE(g.node_ids.size() == 7);
    for (std::size_t i = 0; i < 7; ++i) CHECK(g.node_ids[i] == i);
}

TEST_CASE("zero query weights give the uniform adjacency") {
    Rng rng(52);
    AttentionConfig cfg = tiny_cfg();
    AttentionParams params = random_params(cfg, rng);
    for (double& v : params.wq.values()) v = 0.0;
    Tape tape;
    GraphSample g = build_graph(tape, cfg, params, random_tensor({5, cfg.input_dim}, rng, false));
    for (double v : g.adjacency.values()) {
        CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
    }
}

TEST_CASE("adjacency rows sum to one and are strictly positive on 100 random inputs") {
    Rng rng(53);
    AttentionConfig cfg = tiny_cfg();
    for (int trial = 0; trial < 100; ++trial) {
        AttentionParams params = random_params(cfg, rng);
        Tape tape;
        const std::size_t n = 2 + rng.uniform_index(8);
        GraphSample g =
            build_graph(tape, cfg, params, random_tensor({n, cfg.input_dim}, rng, false));
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(g.adjacency(i, j) > 0.0);
                CHECK(g.adjacency(i, j) < 1.0);
                s += g.adjacency(i, j);
            }
            CHECK(std::fabs(s - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("joint permutation equivariance of features and adjacency") {
    Rng rng(54);
    AttentionConfig cfg = tiny_cfg();
    AttentionParams params = random_params(cfg, rng);
    Tensor h = random_tensor({6, cfg.input_dim}, rng, false);
    const std::size_t perm[6] = {3, 0, 5, 1, 4, 2};
    Tensor hp = Tensor::zeros({6, cfg.input_dim});
    for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t c = 0; c < cfg.input_dim; ++c) hp.at(r, c) = h(perm[r], c);
    }
    Tape t1, t2;
    GraphSample a = build_graph(t1, cfg, params, h);
    GraphSample b = build_graph(t2, cfg, params, hp);
    for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t c = 0; c < cfg.node_dim; ++c) {
            CHECK(std::fabs(b.node_features(r, c) - a.node_features(perm[r], c)) < 1e-12);
        }
        for (std::size_t c = 0; c < 6; ++c) {
            CHECK(std::fabs(b.adjacency(r, c) - a.adjacency(perm[r], perm[c])) < 1e-12);
        }
    }
}

TEST_CASE("gradient flows through the adjacency into all projections") {
    Rng rng(55);
    AttentionConfig cfg = tiny_cfg();
    AttentionParams params = random_params(cfg, rng);
    Tensor h = random_tensor({4, cfg.input_dim}, rng, false);
    auto forward = [&](Tape& t) {
        GraphSample g = build_graph(t, cfg, params, h);
        return mean(t, tanh(t, g.node_features));
    };
    auto r = testutil::finite_diff_check(forward, {params.wq, params.wk, params.wv}, 0, rng);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("build_graph rejects a single-region input") {
    Rng rng(56);
    AttentionConfig cfg = tiny_cfg();
    AttentionParams params = random_params(cfg, rng);
    Tape tape;
    CHECK_THROWS_AS(build_graph(tape, cfg, params, random_tensor({1, cfg.input_dim}, rng, false)),
                    ContractError);
}
