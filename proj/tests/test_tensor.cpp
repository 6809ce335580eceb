#include <cmath>

#include "doctest.h"
#include "eagle/kernels.hpp"
#include "eagle/rng.hpp"

using namespace eagle;

namespace {

tensor random_tensor(std::vector<int64_t> shape, uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
    tensor t(std::move(shape));
    rng r(seed);
    for (float& v : t.data) v = r.next_uniform(lo, hi);
    return t;
}

float max_rel_err(const tensor& a, const tensor& b) {
    float worst = 0.0f;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const float denom = std::max({std::fabs(a.data[i]), std::fabs(b.data[i]), 1e-6f});
        worst = std::max(worst, std::fabs(a.data[i] - b.data[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("matmul hand-arithmetic example") {
    const tensor a({2, 2}, {1, 2, 3, 4});
    const tensor b({2, 2}, {5, 6, 7, 8});
    const tensor c = matmul(a, b);
    CHECK(c.data == std::vector<float>{19, 22, 43, 50});
    CHECK(matmul_ref(a, b).data == c.data);
}

TEST_CASE("matmul identity and zero cases") {
    const tensor a = random_tensor({5, 7}, 11);
    tensor eye({7, 7});
    for (int i = 0; i < 7; ++i) eye.data[i * 7 + i] = 1.0f;
    CHECK(matmul(a, eye).data == a.data);

    const tensor z({2, 3});
    const tensor b = random_tensor({3, 4}, 12);
    for (float v : matmul(z, b).data) CHECK(v == 0.0f);
}

TEST_CASE("matmul shape error names both shapes") {
    const tensor a({2, 3});
    const tensor b({4, 2});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), shape_error);
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[4x2]"), shape_error);
}

TEST_CASE("matmul associativity within 1e-4 relative") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const tensor a = random_tensor({9, 13}, seed * 3 + 1);
        const tensor b = random_tensor({13, 8}, seed * 3 + 2);
        const tensor c = random_tensor({8, 11}, seed * 3 + 3);
        const tensor lhs = matmul(matmul(a, b), c);
        const tensor rhs = matmul(a, matmul(b, c));
        CHECK(max_rel_err(lhs, rhs) < 1e-4f);
    }
}

TEST_CASE("optimized matmul matches naive reference within 1e-5 relative") {
    for (int64_t n : {17, 64, 256}) {
        const tensor a = random_tensor({n, n}, static_cast<uint64_t>(n));
        const tensor b = random_tensor({n, n}, static_cast<uint64_t>(n) + 1);
        CHECK(max_rel_err(matmul(a, b), matmul_ref(a, b)) < 1e-5f);
        // the dot-product (linear) path too
        const tensor bt = random_tensor({n, n}, static_cast<uint64_t>(n) + 2);
        tensor bt_t({n, n});
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < n; ++j) bt_t.data[j * n + i] = bt.data[i * n + j];
        CHECK(max_rel_err(matmul_nt(a, bt), matmul_ref(a, bt_t)) < 1e-5f);
    }
}

TEST_CASE("softmax trivial and closed-form examples") {
    const tensor sym = softmax_lastdim(tensor({3}, {0, 0, 0}));
    for (float v : sym.data) CHECK(v == doctest::Approx(1.0f / 3.0f));

    const tensor big = softmax_lastdim(tensor({2}, {1000, 1000}));
    CHECK(big.data[0] == doctest::Approx(0.5f));
    CHECK(big.data[1] == doctest::Approx(0.5f));

    const tensor cf = softmax_lastdim(tensor({2}, {0.0f, std::log(3.0f)}));
    CHECK(cf.data[0] == doctest::Approx(0.25f).epsilon(1e-5));
    CHECK(cf.data[1] == doctest::Approx(0.75f).epsilon(1e-5));
}

TEST_CASE("softmax sums to one and stays nonnegative at extremes") {
    rng r(99);
    for (int trial = 0; trial < 50; ++trial) {
        tensor x({4, 16});
        for (float& v : x.data) v = r.next_uniform(-1e4f, 1e4f);
        const tensor y = softmax_lastdim(x);
        for (int64_t row = 0; row < 4; ++row) {
            float sum = 0.0f;
            for (int64_t j = 0; j < 16; ++j) {
                CHECK(y.data[row * 16 + j] >= 0.0f);
                sum += y.data[row * 16 + j];
            }
            CHECK(std::fabs(sum - 1.0f) < 1e-6f);
        }
        CHECK(all_finite(y));
    }
}

TEST_CASE("rmsnorm hand oracle and edge cases") {
    const tensor gain({2}, {1, 1});
    const tensor y = rmsnorm(tensor({2}, {3, 4}), gain, 0.0f);
    // x / sqrt(mean(x^2)) = [3,4]/sqrt(12.5)
    CHECK(y.data[0] == doctest::Approx(3.0 / std::sqrt(12.5)).epsilon(1e-5));
    CHECK(y.data[1] == doctest::Approx(4.0 / std::sqrt(12.5)).epsilon(1e-5));

    const tensor zeros = rmsnorm(tensor({3, 2}), gain, 1e-5f);
    for (float v : zeros.data) CHECK(v == 0.0f);

    const tensor zero_gain({2});
    const tensor killed = rmsnorm(tensor({2}, {3, 4}), zero_gain, 1e-5f);
    for (float v : killed.data) CHECK(v == 0.0f);

    CHECK_THROWS_AS(rmsnorm(tensor({2}, {3, 4}), tensor({3}), 1e-5f), shape_error);
}

TEST_CASE("elementwise examples") {
    CHECK(silu(tensor({1}, {0.0f})).data[0] == 0.0f);

    const tensor x = random_tensor({4, 5}, 21);
    CHECK(add(x, tensor({4, 5})).data == x.data);

    // gelu approaches identity for large positive inputs
    for (float v : {6.0f, 10.0f, 30.0f}) {
        const float g = gelu(tensor({1}, {v})).data[0];
        CHECK(std::fabs(g - v) / v < 1e-4f);
    }

    // trailing-dim broadcast
    const tensor bias({5}, {1, 2, 3, 4, 5});
    const tensor y = add(x, bias);
    for (int64_t r = 0; r < 4; ++r)
        for (int64_t j = 0; j < 5; ++j)
            CHECK(y.data[r * 5 + j] == x.data[r * 5 + j] + bias.data[j]);

    CHECK_THROWS_AS(add(x, tensor({3})), shape_error);
    CHECK_THROWS_AS(mul(x, tensor({2, 5})), shape_error);
}

TEST_CASE("kernels keep finite inputs finite") {
    const tensor x = random_tensor({8, 32}, 31, -50.0f, 50.0f);
    const tensor w = random_tensor({16, 32}, 32, -2.0f, 2.0f);
    const tensor gain = random_tensor({32}, 33, 0.1f, 2.0f);
    CHECK(all_finite(matmul_nt(x, w)));
    CHECK(all_finite(rmsnorm(x, gain, 1e-5f)));
    CHECK(all_finite(silu(x)));
    CHECK(all_finite(gelu(x)));
    CHECK(all_finite(softmax_lastdim(x)));
}
