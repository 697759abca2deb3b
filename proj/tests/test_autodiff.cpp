#include <doctest.h>

#include <cmath>

#include "mim/ops.hpp"
#include "testutil.hpp"

using namespace mim;
using testutil::finite_diff_check;
using testutil::random_tensor;

TEST_CASE("matmul identity and hand-computed product") {
    Tape tape;
    Tensor eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
    Tensor x = Tensor::from_values({2, 2}, {3, -1, 2, 7});
    Tensor ix = matmul(tape, eye, x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(ix.values()[i] == x.values()[i]);

    Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_values({2, 1}, {1, 1});
    Tensor c = matmul(tape, a, b);
    CHECK(c(0, 0) == 3.0);
    CHECK(c(1, 0) == 7.0);
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    Tape tape;
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({2, 2});
    CHECK_THROWS_WITH_AS(matmul(tape, a, b), doctest::Contains("[2x3]"), ShapeError);
}

TEST_CASE("matmul gradient matches finite differences") {
    Rng rng(7);
    Tensor a = random_tensor({3, 4}, rng, true);
    Tensor b = random_tensor({4, 2}, rng, true);
    auto forward = [&](Tape& t) { return sum(t, matmul(t, a, b)); };
    auto r = finite_diff_check(forward, {a, b}, 0, rng);
    CHECK(r.max_rel_err < 1e-5);
}

TEST_CASE("matmul_nt and matmul_tn agree with explicit transposition") {
    Rng rng(8);
    Tensor a = random_tensor({3, 5}, rng, true);
    Tensor b = random_tensor({4, 5}, rng, true);
    Tape tape;
    Tensor nt = matmul_nt(tape, a, b); // a * b^T -> 3x4
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 5; ++k) s += a(i, k) * b(j, k);
            CHECK(nt(i, j) == doctest::Approx(s).epsilon(1e-12));
        }
    }
    auto fwd_nt = [&](Tape& t) { return sum(t, matmul_nt(t, a, b)); };
    CHECK(finite_diff_check(fwd_nt, {a, b}, 0, rng).max_rel_err < 1e-5);

    Tensor c = random_tensor({5, 3}, rng, true);
    Tensor d = random_tensor({5, 4}, rng, true);
    auto fwd_tn = [&](Tape& t) { return sum(t, matmul_tn(t, c, d)); };
    CHECK(finite_diff_check(fwd_tn, {c, d}, 0, rng).max_rel_err < 1e-5);
}

TEST_CASE("conv1d length arithmetic follows the no-padding formula") {
    // 160 -(k4,s2)-> 79 -(k4,s1)-> 76 -(k3,s2)-> 37 -(k1,s1)-> 37
    Rng rng(9);
    Tape tape;
    Tensor x = random_tensor({1, 160}, rng, false);
    const std::size_t ks[4] = {4, 4, 3, 1};
    const std::size_t ss[4] = {2, 1, 2, 1};
    const std::size_t expect[4] = {79, 76, 37, 37};
    Tensor cur = x;
    for (int i = 0; i < 4; ++i) {
        Tensor w = random_tensor({2, cur.dim(0), ks[i]}, rng, false);
        Tensor b = random_tensor({2}, rng, false);
        cur = conv1d(tape, cur, w, b, ss[i]);
        CHECK(cur.dim(1) == expect[i]);
        CHECK(cur.dim(0) == 2);
    }
}

TEST_CASE("conv1d with an all-zero kernel returns the bias everywhere") {
    Rng rng(10);
    Tape tape;
    Tensor x = random_tensor({2, 12}, rng, false);
    Tensor w = Tensor::zeros({3, 2, 3});
    Tensor b = Tensor::from_values({3}, {0.5, -1.0, 2.0});
    Tensor y = conv1d(tape, x, w, b, 1);
    for (std::size_t oc = 0; oc < 3; ++oc) {
        for (std::size_t t = 0; t < y.dim(1); ++t) {
            CHECK(y(oc, t) == b.values()[oc]);
        }
    }
}

TEST_CASE("conv1d rejects an input shorter than the kernel") {
    Tape tape;
    Tensor x = Tensor::zeros({1, 3});
    Tensor w = Tensor::zeros({1, 1, 4});
    Tensor b = Tensor::zeros({1});
    CHECK_THROWS_WITH_AS(conv1d(tape, x, w, b, 1), doctest::Contains("shorter"), ShapeError);
}

TEST_CASE("conv1d gradients match finite differences") {
    Rng rng(11);
    Tensor x = random_tensor({2, 14}, rng, true);
    Tensor w = random_tensor({3, 2, 4}, rng, true);
    Tensor b = random_tensor({3}, rng, true);
    auto forward = [&](Tape& t) { return sum(t, tanh(t, conv1d(t, x, w, b, 2))); };
    auto r = finite_diff_check(forward, {x, w, b}, 0, rng);
    CHECK(r.max_rel_err < 1e-5);
}

TEST_CASE("relu, softmax and log_softmax reference points") {
    Tape tape;
    Tensor x = Tensor::from_values({3}, {-1.0, 0.0, 2.0});
    Tensor y = relu(tape, x);
    CHECK(y.values()[0] == 0.0);
    CHECK(y.values()[1] == 0.0);
    CHECK(y.values()[2] == 2.0);

    Tensor c = Tensor::full({1, 5}, 3.7);
    Tensor sm = softmax_rows(tape, c);
    for (double v : sm.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));

    Tensor extreme = Tensor::from_values({1, 2}, {1000.0, 0.0});
    Tensor lsm = log_softmax_rows(tape, extreme);
    CHECK(std::isfinite(lsm(0, 0)));
    CHECK(std::isfinite(lsm(0, 1)));
    CHECK(lsm(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(lsm(0, 1) == doctest::Approx(-1000.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and stay strictly positive") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        Tape tape;
        Tensor x = random_tensor({4, 6}, rng, false, -30.0, 30.0);
        Tensor y = softmax_rows(tape, x);
        for (std::size_t i = 0; i < 4; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 6; ++j) {
                CHECK(y(i, j) > 0.0);
                s += y(i, j);
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("elementwise suite gradients match finite differences") {
    Rng rng(13);
    Tensor a = random_tensor({3, 4}, rng, true);
    Tensor b = random_tensor({3, 4}, rng, true);
    Tensor bias = random_tensor({4}, rng, true);
    Tensor v = random_tensor({6}, rng, true);
    Tensor col = random_tensor({3, 1}, rng, true);

    auto check = [&](std::function<Tensor(Tape&)> f, std::vector<Tensor> params) {
        CHECK(finite_diff_check(f, params, 0, rng).max_rel_err < 1e-5);
    };
    check([&](Tape& t) { return sum(t, relu(t, a)); }, {a});
    check([&](Tape& t) { return sum(t, tanh(t, a)); }, {a});
    check([&](Tape& t) { return sum(t, sigmoid(t, a)); }, {a});
    check([&](Tape& t) { return sum(t, mul(t, a, b)); }, {a, b});
    check([&](Tape& t) { return sum(t, sub(t, a, b)); }, {a, b});
    check([&](Tape& t) { return sum(t, scale(t, a, -2.5)); }, {a});
    check([&](Tape& t) { return sum(t, add_bias(t, a, bias)); }, {a, bias});
    check([&](Tape& t) { return mean(t, mul(t, a, a)); }, {a});
    check([&](Tape& t) { return sum(t, slice(t, v, 1, 5)); }, {v});
    check([&](Tape& t) { return sum(t, softmax_rows(t, a)); }, {a});
    check([&](Tape& t) { return sum(t, mul(t, log_softmax_rows(t, a), b)); }, {a, b});
    check([&](Tape& t) { return sum(t, max_over_axis(t, a, 0)); }, {a});
    check([&](Tape& t) { return sum(t, max_over_axis(t, a, 1)); }, {a});
    check([&](Tape& t) { return sum(t, mean_over_axis(t, a, 0)); }, {a});
    check([&](Tape& t) { return l2_norm(t, v); }, {v});
    check([&](Tape& t) { return sum(t, scale_rows(t, a, col)); }, {a, col});
    check([&](Tape& t) { return sum(t, gather_rows(t, a, {2, 0})); }, {a});
    check([&](Tape& t) {
        Tensor sq = matmul_nt(t, a, a);
        return diag_sum(t, sq);
    }, {a});
    check([&](Tape& t) {
        const Tensor parts[] = {v, v};
        return sum(t, tanh(t, concat(t, parts)));
    }, {v});
    check([&](Tape& t) { return sum(t, divide(t, a, l2_norm(t, v))); }, {a, v});
}

TEST_CASE("max_over_axis routes gradient to the first maximal index") {
    Tape tape;
    Tensor x = Tensor::from_values({1, 3}, {2.0, 2.0, 1.0}, true);
    Tensor m = max_over_axis(tape, x, 1);
    Tensor loss = sum(tape, m);
    tape.backward(loss);
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == 0.0);
    CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("axis out of range raises an axis error") {
    Tape tape;
    Tensor x = Tensor::zeros({2, 2});
    CHECK_THROWS_WITH_AS(max_over_axis(tape, x, 2), doctest::Contains("axis"), ShapeError);
}

TEST_CASE("backward seeds one and accumulates over fan-out") {
    Tape tape;
    Tensor x = Tensor::from_values({4}, {1, -2, 3, 0.5}, true);
    Tensor loss = sum(tape, x);
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == 1.0);

    Tape tape2;
    Tensor y = Tensor::from_values({3}, {1.0, -2.0, 4.0}, true);
    Tensor loss2 = sum(tape2, mul(tape2, y, y));
    tape2.backward(loss2);
    for (std::size_t i = 0; i < 3; ++i) CHECK(y.grad()[i] == doctest::Approx(2.0 * y.values()[i]));

    // a tensor consumed twice accumulates the sum of per-consumer gradients
    Tape tape3;
    Tensor z = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor left = scale(tape3, z, 3.0);
    Tensor right = scale(tape3, z, 5.0);
    tape3.backward(sum(tape3, add(tape3, left, right)));
    CHECK(z.grad()[0] == 8.0);
    CHECK(z.grad()[1] == 8.0);
}

TEST_CASE("backward rejects a non-scalar loss") {
    Tape tape;
    Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor y = scale(tape, x, 2.0);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("seeded forward+backward is bit-identical across runs") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tensor a = random_tensor({4, 4}, rng, true);
        Tensor b = random_tensor({4, 4}, rng, true);
        Tape tape;
        Tensor loss = sum(tape, sigmoid(tape, matmul(tape, a, b)));
        tape.backward(loss);
        std::vector<double> out(a.grad().begin(), a.grad().end());
        out.insert(out.end(), b.grad().begin(), b.grad().end());
        out.push_back(loss.item());
        return out;
    };
    CHECK(run(42) == run(42));
}

TEST_CASE("composite graph gradients match finite differences") {
    Rng rng(14);
    Tensor a = random_tensor({3, 3}, rng, true);
    Tensor b = random_tensor({3, 3}, rng, true);
    auto forward = [&](Tape& t) {
        Tensor h = sigmoid(t, matmul(t, a, b));
        Tensor s = softmax_rows(t, matmul_nt(t, h, b));
        return mean(t, mul(t, s, h));
    };
    auto r = finite_diff_check(forward, {a, b}, 0, rng, 1e-6);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("no-NaN invariant after forward passes on finite inputs") {
    Rng rng(15);
    for (int trial = 0; trial < 50; ++trial) {
        Tape tape;
        Tensor a = random_tensor({5, 5}, rng, false, -50.0, 50.0);
        Tensor out = softmax_rows(tape, matmul_nt(tape, tanh(tape, a), sigmoid(tape, a)));
        for (double v : out.values()) CHECK(std::isfinite(v));
    }
}
