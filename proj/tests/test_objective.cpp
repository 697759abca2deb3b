#include <doctest.h>

#include <cmath>

#include "mim/objective.hpp"
#include "testutil.hpp"

using namespace mim;
using testutil::random_tensor;

TEST_CASE("critic scores equal explicit dot products") {
    Rng rng(81);
    Tape tape;
    Tensor c = random_tensor({4, 6}, rng, false);
    Tensor y = random_tensor({4, 6}, rng, false);
    Tensor s = critic_scores(tape, c, y);
    REQUIRE(s.shape() == Shape{4, 4});
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < 6; ++k) dot += c(i, k) * y(j, k);
            CHECK(s(i, j) == doctest::Approx(dot).epsilon(1e-12));
        }
    }
}

TEST_CASE("orthogonal embeddings score zero; unit rows give the identity") {
    Tape tape;
    Tensor c = Tensor::from_values({1, 2}, {1.0, 0.0});
    Tensor y = Tensor::from_values({1, 2}, {0.0, 1.0});
    CHECK(critic_scores(tape, c, y)(0, 0) == 0.0);

    Tensor e = Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor s = critic_scores(tape, e, e);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(s(i, j) == (i == j ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("critic rejects width mismatch") {
    Tape tape;
    CHECK_THROWS_AS(critic_scores(tape, Tensor::zeros({2, 3}), Tensor::zeros({2, 4})),
                    ShapeError);
}

TEST_CASE("infonce analytic reference points") {
    Tape tape;
    // N=1: softmax over one element, loss exactly 0
    CHECK(infonce_loss(tape, Tensor::from_values({1, 1}, {3.7})).item() == 0.0);

    // constant score matrix: uniform softmax, loss = N log N
    for (std::size_t n : {2ul, 5ul, 9ul}) {
        Tensor s = Tensor::full({n, n}, 1.234);
        const double loss = infonce_loss(tape, s).item();
        CHECK(std::fabs(loss - double(n) * std::log(double(n))) < 1e-9);
    }

    // S = [[1,0],[0,1]]: loss = 2 log(1 + e^-1)
    Tensor s = Tensor::from_values({2, 2}, {1, 0, 0, 1});
    CHECK(infonce_loss(tape, s).item() ==
          doctest::Approx(0.6265233750364457).epsilon(1e-12));
}

TEST_CASE("infonce is non-negative on 1000 random batches") {
    Rng rng(82);
    Tape tape;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(8);
        Tensor s = random_tensor({n, n}, rng, false, -5.0, 5.0);
        CHECK(infonce_loss(tape, s).item() >= 0.0);
    }
}

TEST_CASE("infonce approaches zero when the diagonal dominates") {
    Tape tape;
    Tensor s = Tensor::zeros({3, 3});
    for (std::size_t i = 0; i < 3; ++i) s.at(i, i) = 50.0;
    CHECK(infonce_loss(tape, s).item() < 1e-15);
}

TEST_CASE("infonce rejects non-finite scores") {
    Tape tape;
    Tensor s = Tensor::full({2, 2}, std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(infonce_loss(tape, s), NumericError);
}

TEST_CASE("joint row permutation leaves the loss unchanged") {
    Rng rng(83);
    for (int trial = 0; trial < 25; ++trial) {
        Tensor c = random_tensor({5, 7}, rng, false);
        Tensor y = random_tensor({5, 7}, rng, false);
        std::vector<std::size_t> perm{4, 1, 3, 0, 2};
        Tensor cp = Tensor::zeros({5, 7}), yp = Tensor::zeros({5, 7});
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 7; ++j) {
                cp.at(i, j) = c(perm[i], j);
                yp.at(i, j) = y(perm[i], j);
            }
        }
        Tape t1, t2;
        const double a = infonce_loss(t1, critic_scores(t1, c, y)).item();
        const double b = infonce_loss(t2, critic_scores(t2, cp, yp)).item();
        CHECK(std::fabs(a - b) < 1e-12);
    }
}

TEST_CASE("loss gradients w.r.t. both embedding matrices match finite differences") {
    Rng rng(84);
    Tensor c = random_tensor({4, 5}, rng, true);
    Tensor y = random_tensor({4, 5}, rng, true);
    auto forward = [&](Tape& t) { return infonce_loss(t, critic_scores(t, c, y)); };
    auto r = testutil::finite_diff_check(forward, {c, y}, 0, rng);
    CHECK(r.max_rel_err < 1e-5);
}

TEST_CASE("mi lower bound analytics") {
    // uninformative critic: L = N log N -> bound 0
    CHECK(mi_lower_bound(4.0 * std::log(4.0), 4) == doctest::Approx(0.0));
    // saturated: L = 0 -> bound log N
    CHECK(mi_lower_bound(0.0, 4) == doctest::Approx(std::log(4.0)));
    // monotone: decreasing L strictly increases the bound
    Rng rng(85);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(30);
        const double l1 = rng.uniform(0.0, 10.0);
        const double l2 = l1 + rng.uniform(1e-6, 5.0);
        CHECK(mi_lower_bound(l1, n) > mi_lower_bound(l2, n));
        // never exceeds log N (loss is non-negative)
        CHECK(mi_lower_bound(l1, n) <= std::log(double(n)));
    }
}
