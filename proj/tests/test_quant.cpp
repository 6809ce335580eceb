#include <cmath>
#include <cstring>

#include "doctest.h"
#include "eagle/quant.hpp"
#include "eagle/rng.hpp"

using namespace eagle;

namespace {

tensor random_weights(std::vector<int64_t> shape, uint64_t seed, float scale = 1.0f) {
    tensor t(std::move(shape));
    rng r(seed);
    for (float& v : t.data) v = scale * r.next_uniform(-1.0f, 1.0f);
    return t;
}

}  // namespace

TEST_CASE("quantize int8 hand-arithmetic example") {
    const tensor w({3}, {0.0f, 0.5f, -1.0f});
    const quantized_tensor q = quantize(w, quant_spec{8, 32, true});
    CHECK(q.scales.size() == 1);
    CHECK(q.scales[0] == doctest::Approx(1.0f / 127.0f).epsilon(1e-7));
    CHECK(q.get_code(0) == 0);
    CHECK(q.get_code(1) == 64); // 0.5*127 = 63.5 rounds half-to-even to 64
    CHECK(q.get_code(2) == -127);
}

TEST_CASE("quantize all-zero group convention") {
    const tensor w({2, 32});
    const quantized_tensor q = quantize(w, quant_spec{8, 32, true});
    for (float s : q.scales) CHECK(s == 0.0f);
    const tensor back = dequantize(q);
    for (float v : back.data) CHECK(v == 0.0f);
}

TEST_CASE("int4 exactly representable grid round-trips bit-exactly") {
    // values constructed as i * fl(1/7): amax rounds to 1.0f, the scale
    // snaps to fl(1/7), and every value sits exactly on the code grid
    const float s0 = 1.0f / 7.0f;
    tensor w({15});
    for (int i = -7; i <= 7; ++i) w.data[static_cast<size_t>(i + 7)] = static_cast<float>(i) * s0;
    const quantized_tensor q = quantize(w, quant_spec{4, 32, true});
    for (int i = -7; i <= 7; ++i) CHECK(q.get_code(i + 7) == i);
    const tensor back = dequantize(q);
    for (size_t i = 0; i < w.data.size(); ++i) CHECK(back.data[i] == w.data[i]);
}

TEST_CASE("round-trip error bounded by scale/2 + 1e-7 per group") {
    for (int bits : {8, 4}) {
        for (uint64_t seed = 0; seed < 40; ++seed) {
            const float amp = seed % 2 ? 1.0f : 0.05f;
            const tensor w = random_weights({8, 40}, seed + 1000 * bits, amp);
            const quant_spec spec{bits, 32, true};
            const quantized_tensor q = quantize(w, spec);
            const tensor back = dequantize(q);
            const int64_t gpr = q.groups_per_row();
            for (int64_t r = 0; r < 8; ++r)
                for (int64_t g = 0; g < gpr; ++g) {
                    const float scale = q.scales[static_cast<size_t>(r * gpr + g)];
                    const int64_t lo = g * 32, hi = std::min<int64_t>(lo + 32, 40);
                    for (int64_t j = lo; j < hi; ++j) {
                        const float err = std::fabs(back.data[r * 40 + j] - w.data[r * 40 + j]);
                        CHECK(err <= scale / 2 + 1e-7f);
                    }
                }
        }
    }
}

TEST_CASE("denormal groups keep scales positive") {
    tensor w({32});
    w.data[3] = 1e-43f;
    w.data[17] = -4e-44f;
    const quantized_tensor q = quantize(w, quant_spec{8, 32, true});
    CHECK(q.scales[0] > 0.0f);
    CHECK(all_finite(dequantize(q)));
}

TEST_CASE("fake_quant equals dequantize-of-quantize bit-exactly") {
    for (int bits : {8, 4}) {
        const tensor w = random_weights({6, 64}, 7 + static_cast<uint64_t>(bits));
        const quant_spec spec{bits, 32, true};
        const tensor a = fake_quant(w, spec);
        const tensor b = dequantize(quantize(w, spec));
        CHECK(std::memcmp(a.data.data(), b.data.data(), a.data.size() * 4) == 0);
    }
}

TEST_CASE("fake_quant is idempotent bit-exactly") {
    for (int bits : {8, 4}) {
        for (uint64_t seed = 0; seed < 30; ++seed) {
            const float amp = seed % 3 == 0 ? 100.0f : (seed % 3 == 1 ? 1.0f : 1e-3f);
            const tensor w = random_weights({4, 32}, seed, amp);
            const quant_spec spec{bits, 32, true};
            const tensor once = fake_quant(w, spec);
            const tensor twice = fake_quant(once, spec);
            CHECK(std::memcmp(once.data.data(), twice.data.data(), once.data.size() * 4) == 0);
        }
    }
}

TEST_CASE("fake_quant of zeros is zeros") {
    const tensor out = fake_quant(tensor({5, 32}), quant_spec{4, 32, true});
    for (float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("ste_grad passes inside the clip range and zeroes outside") {
    const quant_spec spec{8, 32, true};
    const tensor w = random_weights({2, 32}, 5);
    const tensor up = random_weights({2, 32}, 6);

    // max-based scaling puts every element inside the range
    const tensor g = ste_grad(up, w, spec);
    CHECK(g.data == up.data);

    // frozen scales from a narrower group clip a constructed outlier
    std::vector<float> scales = group_scales(w, spec);
    tensor w2 = w;
    w2.data[5] = 10.0f * spec.qmax() * scales[0];
    const tensor g2 = ste_grad(up, w2, spec, scales);
    CHECK(g2.data[5] == 0.0f);
    for (size_t i = 0; i < g2.data.size(); ++i)
        if (i != 5) CHECK(g2.data[i] == up.data[i]);

    const tensor zero_up({2, 32});
    for (float v : ste_grad(zero_up, w, spec).data) CHECK(v == 0.0f);

    CHECK_THROWS_AS(ste_grad(tensor({3, 2}), w, spec), shape_error);
}

TEST_CASE("mixed plan: equal sizes at target 5.5 puts 0.375 of parameters at 8 bits") {
    sensitivity_report rep;
    std::map<std::string, int64_t> counts;
    for (int i = 0; i < 40; ++i) {
        const std::string name = "t" + std::to_string(100 + i);
        rep.loss_delta[name] = 1.0 + 0.01 * i;
        counts[name] = 1000;
    }
    const quant_plan plan = build_mixed_plan(rep, counts, 5.5);
    int64_t at8 = 0;
    for (const auto& [name, spec] : plan.assignments)
        if (spec.bits == 8) at8 += counts.at(name);
    const double frac = static_cast<double>(at8) / (40.0 * 1000.0);
    CHECK(frac == doctest::Approx(0.375).epsilon(1.0 / 40 + 1e-9));
    CHECK(plan.achieved_avg_bits <= 5.5 + 1e-12);
    CHECK(plan.achieved_avg_bits >= 5.5 - 4.0 / 40 - 1e-12);
}

TEST_CASE("mixed plan boundary targets") {
    sensitivity_report rep;
    std::map<std::string, int64_t> counts;
    for (int i = 0; i < 25; ++i) {
        const std::string name = "w" + std::to_string(i);
        rep.loss_delta[name] = 0.5 * i;
        counts[name] = 100 + 17 * i;
    }
    const quant_plan all8 = build_mixed_plan(rep, counts, 8.0);
    for (const auto& [name, spec] : all8.assignments) CHECK(spec.bits == 8);
    CHECK(all8.achieved_avg_bits == doctest::Approx(8.0));

    const quant_plan all4 = build_mixed_plan(rep, counts, 4.0);
    for (const auto& [name, spec] : all4.assignments) CHECK(spec.bits == 4);
    CHECK(all4.achieved_avg_bits == doctest::Approx(4.0));
}

TEST_CASE("mixed plan feasibility within +0.05 for 20+ uneven tensors") {
    rng r(42);
    for (uint64_t trial = 0; trial < 10; ++trial) {
        sensitivity_report rep;
        std::map<std::string, int64_t> counts;
        rng tr(trial);
        const int n = 20 + static_cast<int>(tr.next_range(60));
        for (int i = 0; i < n; ++i) {
            const std::string name = "p" + std::to_string(i);
            rep.loss_delta[name] = tr.next_float();
            counts[name] = 64 + static_cast<int64_t>(tr.next_range(200000));
        }
        for (double target : {4.5, 5.5, 6.8}) {
            const quant_plan plan = build_mixed_plan(rep, counts, target);
            CHECK(plan.achieved_avg_bits <= target + 0.05);
        }
    }
}

TEST_CASE("mixed plan rejects bad inputs") {
    sensitivity_report rep;
    std::map<std::string, int64_t> counts{{"a", 10}};
    CHECK_THROWS_AS(build_mixed_plan(rep, counts, 5.5), std::invalid_argument);
    rep.loss_delta["a"] = 0.1;
    CHECK_THROWS_AS(build_mixed_plan(rep, counts, 3.0), std::invalid_argument);
    CHECK_THROWS_AS(build_mixed_plan(rep, {}, 5.5), std::invalid_argument);
}

TEST_CASE("size accounting reproduces the paper arithmetic") {
    // 4.5e9 params at float32 -> 18.0 GB of code bytes
    const auto f32 = estimate_size_bytes(4500000000ULL, 32.0, 0);
    CHECK(f32.code_bytes == 18000000000ULL);
    CHECK(f32.scale_bytes == 0);

    // 4.5e9 params at 5.5 bits -> 3.09 GB of code bytes
    const auto mixed = estimate_size_bytes(4500000000ULL, 5.5, 32);
    CHECK(mixed.code_bytes == 3093750000ULL);
    CHECK(static_cast<double>(mixed.code_bytes) / 1e9 == doctest::Approx(3.09).epsilon(0.002));

    // group_size 32 adds 4 bytes per 32 values = param_count / 8
    CHECK(mixed.scale_bytes == 4500000000ULL / 8);

    CHECK_THROWS_AS(estimate_size_bytes(0, 8.0, 32), std::invalid_argument);
}

TEST_CASE("packed layout: int4 odd value counts and short tail groups") {
    const tensor w = random_weights({3, 37}, 77);
    const quantized_tensor q = quantize(w, quant_spec{4, 32, true});
    CHECK(q.packed.size() == (3 * 37 * 4 + 7) / 8);
    CHECK(q.scales.size() == 3 * 2); // ceil(37/32) = 2 groups per row
    const tensor back = dequantize(q);
    CHECK(back.shape == w.shape);
    // tail group scale excludes the conceptual padding
    for (int64_t r = 0; r < 3; ++r) {
        float amax = 0.0f;
        for (int64_t j = 32; j < 37; ++j) amax = std::max(amax, std::fabs(w.data[r * 37 + j]));
        CHECK(q.scales[static_cast<size_t>(r * 2 + 1)] ==
              doctest::Approx(amax / 7.0f).epsilon(1e-6));
    }

    quantized_tensor corrupt = q;
    corrupt.packed.pop_back();
    CHECK_THROWS_AS(dequantize(corrupt), format_error);
}
