#include <cmath>
#include <random>

#include "doctest.h"
#include "finite_diff.hpp"
#include "pip/tensor.hpp"

using namespace pip;
using pip::testing::finite_diff_grad;
using pip::testing::max_rel_err;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng,
                     bool requires_grad = true) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::size_t n = 1;
    for (int d : shape) n *= d;
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

}  // namespace

TEST_CASE("matmul identity and scalar cases") {
    auto id = Tensor::from({2, 2}, {1, 0, 0, 1});
    auto m = Tensor::from({2, 2}, {5, 6, 7, 8});
    auto out = matmul(id, m);
    CHECK(out.values() == std::vector<double>{5, 6, 7, 8});

    auto a = Tensor::from({1, 1}, {2});
    auto b = Tensor::from({1, 1}, {3});
    CHECK(matmul(a, b).values()[0] == 6);
}

TEST_CASE("matmul shape mismatch throws") {
    auto a = Tensor::from({2, 3}, std::vector<double>(6, 1.0));
    auto b = Tensor::from({2, 3}, std::vector<double>(6, 1.0));
    CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("matmul gradient of sum(out) equals column sums of b") {
    std::mt19937_64 rng(42);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({4, 2}, rng);
    auto loss = sum(matmul(a, b));
    backward(loss);
    // grad_a[i][p] = sum_j b[p][j]
    for (int i = 0; i < 3; ++i)
        for (int p = 0; p < 4; ++p) {
            double expect = b.values()[p * 2] + b.values()[p * 2 + 1];
            CHECK(a.grad()[i * 4 + p] == doctest::Approx(expect).epsilon(1e-12));
        }
    auto fd = finite_diff_grad(a, [&] { return sum(matmul(a, b)).item(); });
    CHECK(max_rel_err(a.grad(), fd) < 1e-5);
}

TEST_CASE("softmax symmetry and row normalization") {
    auto x = Tensor::from({1, 3}, {0, 0, 0});
    auto s = softmax_rows(x);
    for (double v : s.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

    std::mt19937_64 rng(1);
    auto y = random_tensor({4, 7}, rng, false);
    auto sy = softmax_rows(y);
    for (int i = 0; i < 4; ++i) {
        double row = 0;
        for (int j = 0; j < 7; ++j) row += sy.values()[i * 7 + j];
        CHECK(std::abs(row - 1.0) < 1e-12);
    }
}

TEST_CASE("add identity") {
    auto x = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto z = Tensor::zeros({2, 2});
    CHECK(add(x, z).values() == x.values());
}

TEST_CASE("layernorm gradient matches finite differences") {
    auto x = Tensor::from({1, 3}, {1, 2, 3}, true);
    auto loss = sum(mul(layernorm_rows(x), layernorm_rows(x)));
    backward(loss);
    auto fd = finite_diff_grad(x, [&] {
        auto l = layernorm_rows(x);
        return sum(mul(l, l)).item();
    });
    CHECK(max_rel_err(x.grad(), fd) < 1e-5);
}

TEST_CASE("cross entropy uniform logits gives ln(V)") {
    const int v = 256;
    auto logits = Tensor::zeros({4, v});
    auto loss = cross_entropy_next_token(logits, {0, 10, 100, 255});
    CHECK(loss.item() == doctest::Approx(std::log(256.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy goes to zero with growing margin") {
    double prev = 100;
    for (double margin : {2.0, 5.0, 10.0, 25.0}) {
        auto logits = Tensor::zeros({2, 8});
        logits.values()[3] = margin;
        logits.values()[8 + 5] = margin;
        auto loss = cross_entropy_next_token(logits, {3, 5});
        CHECK(loss.item() < prev);
        prev = loss.item();
    }
    CHECK(prev < 1e-8);
}

TEST_CASE("cross entropy rejects out-of-range targets") {
    auto logits = Tensor::zeros({1, 8});
    CHECK_THROWS_AS(cross_entropy_next_token(logits, {8}), ValidationError);
}

TEST_CASE("cross entropy gradient is softmax minus onehot over T") {
    std::mt19937_64 rng(9);
    auto logits = random_tensor({8, 16}, rng);
    std::vector<int> targets{0, 3, 7, 15, 2, 2, 9, 11};
    auto loss = cross_entropy_next_token(logits, targets);
    backward(loss);
    auto probs = softmax_rows(Tensor::from(logits.shape(), logits.values()));
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 16; ++j) {
            double expect = probs.values()[i * 16 + j] / 8.0;
            if (j == targets[i]) expect -= 1.0 / 8.0;
            CHECK(logits.grad()[i * 16 + j] ==
                  doctest::Approx(expect).epsilon(1e-9));
        }
}

TEST_CASE("backward on sum gives ones; on half squared norm gives w") {
    auto w = Tensor::from({2, 3}, {1, -2, 3, 0.5, 0, -1}, true);
    auto loss = sum(w);
    backward(loss);
    for (double g : w.grad()) CHECK(g == 1.0);

    auto w2 = Tensor::from({2, 2}, {1, -2, 3, 4}, true);
    auto loss2 = scale(sum(mul(w2, w2)), 0.5);
    backward(loss2);
    for (int i = 0; i < 4; ++i)
        CHECK(w2.grad()[i] == doctest::Approx(w2.values()[i]).epsilon(1e-12));
}

TEST_CASE("backward rejects non-scalar loss") {
    auto w = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
    auto out = mul(w, w);
    CHECK_THROWS_AS(backward(out), ContractError);
}

TEST_CASE("gradient accumulates across backward calls until reset") {
    auto w = Tensor::from({1, 2}, {1, 2}, true);
    auto l1 = sum(w);
    backward(l1);
    auto l2 = sum(w);
    backward(l2);
    CHECK(w.grad()[0] == 2.0);
    w.zero_grad();
    CHECK(w.grad()[0] == 0.0);
}

TEST_CASE("property: finite differences agree with autodiff for every op") {
    // composite graph exercising all registered ops, 100 random seeds
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        auto a = random_tensor({3, 4}, rng);
        auto b = random_tensor({4, 4}, rng);
        auto row = random_tensor({1, 4}, rng);
        auto build = [&] {
            auto x = matmul(a, b);
            x = add(x, row);
            x = layernorm_rows(x);
            x = mul(x, row);
            x = gelu(x);
            auto s = causal_masked_softmax(
                scale(matmul(slice_cols(x, 0, 2),
                             transpose(slice_cols(x, 2, 4))), 0.7));
            auto y = concat_cols({matmul(s, slice_cols(x, 0, 2)),
                                  slice_cols(x, 2, 4)});
            auto sm = softmax_rows(y);
            return cross_entropy_next_token(add(y, sm), {0, 3, 1});
        };
        auto loss = build();
        backward(loss);
        for (Tensor p : {a, b, row}) {
            auto fd = finite_diff_grad(p, [&] { return build().item(); });
            CHECK(max_rel_err(p.grad(), fd) < 1e-4);
        }
    }
}

TEST_CASE("gradient of an unused parameter is exactly zero") {
    auto used = Tensor::from({1, 2}, {1, 2}, true);
    auto unused = Tensor::from({1, 2}, {3, 4}, true);
    auto loss = sum(used);
    backward(loss);
    CHECK(unused.grad() == std::vector<double>{0, 0});
}

TEST_CASE("determinism: identical inputs give bitwise identical results") {
    auto run = [] {
        std::mt19937_64 rng(77);
        auto a = random_tensor({4, 4}, rng);
        auto b = random_tensor({4, 4}, rng);
        auto loss = cross_entropy_next_token(matmul(gelu(a), b), {0, 1, 2, 3});
        backward(loss);
        auto out = a.grad();
        out.push_back(loss.item());
        return out;
    };
    CHECK(run() == run());
}
