#include "eagle/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eagle {

void quant_spec::validate() const {
    if (bits != 4 && bits != 8)
        throw std::invalid_argument("quant_spec: bits must be 4 or 8, got " + std::to_string(bits));
    if (group_size < 1 || (group_size & (group_size - 1)) != 0)
        throw std::invalid_argument("quant_spec: group_size must be a positive power of two, got " +
                                    std::to_string(group_size));
}

int64_t quantized_tensor::numel() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

int64_t quantized_tensor::groups_per_row() const {
    return (last_dim() + spec.group_size - 1) / spec.group_size;
}

int64_t quantized_tensor::num_groups() const {
    return (numel() / last_dim()) * groups_per_row();
}

int64_t quantized_tensor::packed_bytes() const {
    return (numel() * spec.bits + 7) / 8;
}

int quantized_tensor::get_code(int64_t i) const {
    if (spec.bits == 8) return static_cast<int8_t>(packed[static_cast<size_t>(i)]);
    const uint8_t byte = packed[static_cast<size_t>(i >> 1)];
    const uint8_t nib = (i & 1) ? (byte >> 4) : (byte & 0x0F);
    return static_cast<int>(nib) - 8;
}

void quantized_tensor::validate() const {
    spec.validate();
    if (shape.empty()) throw format_error("quantized tensor has empty shape");
    if (static_cast<int64_t>(packed.size()) != packed_bytes())
        throw format_error("quantized tensor packed length " + std::to_string(packed.size()) +
                           " does not match expected " + std::to_string(packed_bytes()) +
                           " for shape " + shape_str(shape));
    if (static_cast<int64_t>(scales.size()) != num_groups())
        throw format_error("quantized tensor scale count " + std::to_string(scales.size()) +
                           " does not match expected " + std::to_string(num_groups()));
}

namespace {

// fl(fl(qmax*s)/qmax) is idempotent for qmax in {7,127}; snapping the raw
// scale onto that fixpoint makes fake_quant(fake_quant(w)) bit-equal to
// fake_quant(w): requantizing a dequantized group recovers the same scale.
float snap_scale(float raw, float qmax) {
    float s = (qmax * raw) / qmax;
    if (s == 0.0f) s = std::numeric_limits<float>::denorm_min();
    return s;
}

float group_scale(const float* w, int64_t n, int qmax) {
    float amax = 0.0f;
    for (int64_t i = 0; i < n; ++i) amax = std::max(amax, std::fabs(w[i]));
    if (amax == 0.0f) return 0.0f;
    return snap_scale(amax / static_cast<float>(qmax), static_cast<float>(qmax));
}

}  // namespace

std::vector<float> group_scales(const tensor& w, const quant_spec& spec) {
    spec.validate();
    const int64_t d = w.last_dim(), rows = w.rows2d();
    const int64_t gpr = (d + spec.group_size - 1) / spec.group_size;
    std::vector<float> scales(static_cast<size_t>(rows * gpr));
    const int qmax = spec.qmax();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const float* p = w.row(r);
        for (int64_t g = 0; g < gpr; ++g) {
            const int64_t lo = g * spec.group_size;
            const int64_t n = std::min<int64_t>(spec.group_size, d - lo);
            scales[static_cast<size_t>(r * gpr + g)] = group_scale(p + lo, n, qmax);
        }
    }
    return scales;
}

quantized_tensor quantize(const tensor& w, const quant_spec& spec) {
    spec.validate();
    quantized_tensor q;
    q.spec = spec;
    q.shape = w.shape;
    q.scales = group_scales(w, spec);
    q.packed.assign(static_cast<size_t>(q.packed_bytes()), 0);

    const int64_t d = w.last_dim(), rows = w.rows2d();
    const int64_t gpr = q.groups_per_row();
    const int qmax = spec.qmax();
    // int4 rows of odd length share pack bytes across row boundaries, so only
    // parallelize when each byte belongs to a single row
    const bool rows_byte_aligned = spec.bits == 8 || d % 2 == 0;
#pragma omp parallel for schedule(static) if (rows_byte_aligned)
    for (int64_t r = 0; r < rows; ++r) {
        const float* p = w.row(r);
        for (int64_t g = 0; g < gpr; ++g) {
            const float scale = q.scales[static_cast<size_t>(r * gpr + g)];
            const int64_t lo = g * spec.group_size;
            const int64_t hi = std::min<int64_t>(lo + spec.group_size, d);
            for (int64_t j = lo; j < hi; ++j) {
                int code = 0;
                if (scale != 0.0f) {
                    // round half to even, computed in double so the nearest
                    // code is always selected
                    const long long c =
                        std::llrint(static_cast<double>(p[j]) / static_cast<double>(scale));
                    code = static_cast<int>(std::clamp<long long>(c, -qmax, qmax));
                }
                const int64_t flat = r * d + j;
                if (spec.bits == 8) {
                    q.packed[static_cast<size_t>(flat)] = static_cast<uint8_t>(static_cast<int8_t>(code));
                } else {
                    const uint8_t nib = static_cast<uint8_t>(code + 8);
                    uint8_t& byte = q.packed[static_cast<size_t>(flat >> 1)];
                    if (flat & 1)
                        byte = static_cast<uint8_t>((byte & 0x0F) | (nib << 4));
                    else
                        byte = static_cast<uint8_t>((byte & 0xF0) | nib);
                }
            }
        }
    }
    return q;
}

void dequantize_row(const quantized_tensor& q, int64_t row, float* out) {
    const int64_t d = q.last_dim();
    const int64_t gpr = q.groups_per_row();
    for (int64_t g = 0; g < gpr; ++g) {
        const float scale = q.scales[static_cast<size_t>(row * gpr + g)];
        const int64_t lo = g * q.spec.group_size;
        const int64_t hi = std::min<int64_t>(lo + q.spec.group_size, d);
        if (q.spec.bits == 8) {
            const int8_t* codes = reinterpret_cast<const int8_t*>(q.packed.data()) + row * d;
            for (int64_t j = lo; j < hi; ++j) out[j] = static_cast<float>(codes[j]) * scale;
        } else {
            for (int64_t j = lo; j < hi; ++j)
                out[j] = static_cast<float>(q.get_code(row * d + j)) * scale;
        }
    }
}

tensor dequantize(const quantized_tensor& q) {
    q.validate();
    tensor w(q.shape);
    const int64_t rows = w.rows2d();
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) dequantize_row(q, r, w.row(r));
    return w;
}

tensor fake_quant(const tensor& w, const quant_spec& spec) {
    return dequantize(quantize(w, spec));
}

tensor ste_grad(const tensor& upstream, const tensor& w, const quant_spec& spec) {
    return ste_grad(upstream, w, spec, group_scales(w, spec));
}

tensor ste_grad(const tensor& upstream, const tensor& w, const quant_spec& spec,
                const std::vector<float>& scales) {
    require_same_shape(upstream.shape, w.shape, "ste_grad");
    const int64_t d = w.last_dim(), rows = w.rows2d();
    const int64_t gpr = (d + spec.group_size - 1) / spec.group_size;
    if (static_cast<int64_t>(scales.size()) != rows * gpr)
        throw shape_error("ste_grad: scale count " + std::to_string(scales.size()) +
                          " does not match group count " + std::to_string(rows * gpr));
    const float qmax = static_cast<float>(spec.qmax());
    tensor g(w.shape);
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const float* wp = w.row(r);
        const float* up = upstream.row(r);
        float* gp = g.data.data() + r * d;
        for (int64_t j = 0; j < d; ++j) {
            const float s = scales[static_cast<size_t>(r * gpr + j / spec.group_size)];
            gp[j] = std::fabs(wp[j]) <= qmax * s ? up[j] : 0.0f;
        }
    }
    return g;
}

quant_plan build_mixed_plan(const sensitivity_report& report,
                            const std::map<std::string, int64_t>& param_counts,
                            double target_avg_bits, const std::set<std::string>& forced_int8,
                            int group_size) {
    if (param_counts.empty()) throw std::invalid_argument("build_mixed_plan: empty parameter map");
    if (report.loss_delta.empty()) throw std::invalid_argument("build_mixed_plan: empty sensitivity report");
    if (target_avg_bits < 4.0 || target_avg_bits > 8.0)
        throw std::invalid_argument("build_mixed_plan: target_avg_bits must lie in [4, 8]");
    int64_t total = 0;
    for (const auto& [name, count] : param_counts) {
        if (!report.loss_delta.count(name))
            throw std::invalid_argument("build_mixed_plan: sensitivity report is missing tensor '" +
                                        name + "'");
        total += count;
    }

    // rank: forced tensors first (name ascending), then by sensitivity per
    // parameter descending, ties broken by name ascending
    std::vector<std::string> order;
    for (const auto& name : forced_int8)
        if (param_counts.count(name)) order.push_back(name);
    std::vector<std::string> rest;
    for (const auto& [name, count] : param_counts)
        if (!forced_int8.count(name)) rest.push_back(name);
    std::sort(rest.begin(), rest.end(), [&](const std::string& a, const std::string& b) {
        const double sa = report.loss_delta.at(a) / static_cast<double>(param_counts.at(a));
        const double sb = report.loss_delta.at(b) / static_cast<double>(param_counts.at(b));
        if (sa != sb) return sa > sb;
        return a < b;
    });
    order.insert(order.end(), rest.begin(), rest.end());

    quant_plan plan;
    plan.target_avg_bits = target_avg_bits;
    for (const auto& [name, count] : param_counts) {
        (void)count;
        plan.assignments[name] = quant_spec{4, group_size, true};
    }
    // skip-greedy: upgrade any tensor that still fits under the target, so
    // small tensors can fill the budget a large one would overshoot
    int64_t bits8_params = 0;
    for (const auto& name : order) {
        const int64_t c = param_counts.at(name);
        const double avg_after =
            (4.0 * static_cast<double>(total - bits8_params - c) + 8.0 * static_cast<double>(bits8_params + c)) /
            static_cast<double>(total);
        if (avg_after <= target_avg_bits) {
            plan.assignments[name].bits = 8;
            bits8_params += c;
        }
    }
    plan.achieved_avg_bits = plan_average_bits(plan, param_counts);
    return plan;
}

double plan_average_bits(const quant_plan& plan, const std::map<std::string, int64_t>& param_counts) {
    double weighted = 0.0;
    int64_t total = 0;
    for (const auto& [name, count] : param_counts) {
        weighted += static_cast<double>(plan.assignments.at(name).bits) * static_cast<double>(count);
        total += count;
    }
    return weighted / static_cast<double>(total);
}

size_estimate estimate_size_bytes(uint64_t param_count, double avg_bits, int group_size,
                                  uint64_t header_bytes) {
    if (param_count == 0) throw std::invalid_argument("estimate_size_bytes: param_count must be positive");
    size_estimate e;
    e.code_bytes = static_cast<uint64_t>(std::llround(static_cast<double>(param_count) * avg_bits / 8.0));
    e.scale_bytes = group_size > 0
                        ? static_cast<uint64_t>(std::llround(4.0 * static_cast<double>(param_count) /
                                                             static_cast<double>(group_size)))
                        : 0;
    e.header_bytes = header_bytes;
    return e;
}

}  // namespace eagle
