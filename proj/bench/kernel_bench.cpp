// Compares the serial reference kernels against the OpenMP paths and the
// packed-weight matmul; prints GFLOP/s per size so regressions are visible.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "eagle/kernels.hpp"
#include "eagle/quant.hpp"
#include "eagle/rng.hpp"
#include "eagle/runtime.hpp"

using namespace eagle;

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

tensor random_tensor(std::vector<int64_t> shape, uint64_t seed) {
    tensor t(std::move(shape));
    rng r(seed);
    for (float& v : t.data) v = r.next_uniform(-1.0f, 1.0f);
    return t;
}

template <typename F>
double time_op(F&& f, int iters) {
    f(); // warm-up
    const double t0 = now_s();
    for (int i = 0; i < iters; ++i) f();
    return (now_s() - t0) / iters;
}

void bench_matmul(int64_t m, int64_t k, int64_t n) {
    const tensor a = random_tensor({m, k}, 1);
    const tensor b = random_tensor({k, n}, 2);
    const tensor bt = random_tensor({n, k}, 3);
    const double flops = 2.0 * static_cast<double>(m) * k * n;
    const int iters = std::max(1, static_cast<int>(2e8 / flops));

    const double t_ref = time_op([&] { (void)matmul_ref(a, b); }, std::max(1, iters / 4));
    const double t_nn = time_op([&] { (void)matmul(a, b); }, iters);
    const double t_nt = time_op([&] { (void)matmul_nt(a, bt); }, iters);
    std::printf("matmul       %4lldx%4lldx%4lld  ref %7.2f  omp %7.2f  nt %7.2f  speedup %.1fx\n",
                static_cast<long long>(m), static_cast<long long>(k), static_cast<long long>(n),
                flops / t_ref / 1e9, flops / t_nn / 1e9, flops / t_nt / 1e9, t_ref / t_nt);
}

void bench_packed(int64_t m, int64_t k, int64_t n, int bits) {
    model_weights w;
    w.cfg = eagle_config{};
    const tensor x = random_tensor({m, k}, 4);
    const tensor wt = random_tensor({n, k}, 5);
    runtime_model rm;
    rm.cfg = w.cfg;
    runtime_weight dense;
    dense.dense = wt;
    rm.weights.emplace("w", dense);
    runtime_weight packed;
    packed.packed = true;
    packed.q = quantize(wt, quant_spec{bits, 32, true});
    rm.weights.emplace("wq", packed);

    const double flops = 2.0 * static_cast<double>(m) * k * n;
    const int iters = std::max(1, static_cast<int>(2e8 / flops));
    const double t_dense = time_op([&] { (void)rt_linear(rm, "w", x); }, iters);
    const double t_packed = time_op([&] { (void)rt_linear(rm, "wq", x); }, iters);
    std::printf("linear int%-2d %4lldx%4lldx%4lld  f32 %7.2f  packed %7.2f GFLOP/s\n", bits,
                static_cast<long long>(m), static_cast<long long>(k), static_cast<long long>(n),
                flops / t_dense / 1e9, flops / t_packed / 1e9);
}

void bench_rowwise() {
    const tensor x = random_tensor({512, 256}, 6);
    const tensor gain = random_tensor({256}, 7);
    const double n = static_cast<double>(x.numel());
    const double t_sm = time_op([&] { (void)softmax_lastdim(x); }, 200);
    const double t_rn = time_op([&] { (void)rmsnorm(x, gain, 1e-5f); }, 200);
    std::printf("softmax      512x256            %7.2f Melem/s\n", n / t_sm / 1e6);
    std::printf("rmsnorm      512x256            %7.2f Melem/s\n", n / t_rn / 1e6);
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) omp_set_num_threads(std::stoi(argv[1]));
    std::printf("threads: %d\n", omp_get_max_threads());
    bench_matmul(128, 256, 256);
    bench_matmul(256, 256, 512);
    bench_matmul(134, 6912, 128);
    bench_packed(128, 256, 256, 8);
    bench_packed(128, 256, 256, 4);
    bench_packed(1, 256, 512, 8);
    bench_rowwise();
    return 0;
}
