#include "eagle/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <sstream>

#include "json.hpp"

#include "eagle/graph.hpp"
#include "eagle/image_io.hpp"
#include "eagle/model_graph.hpp"
#include "eagle/prep.hpp"
#include "eagle/rng.hpp"
#include "eagle/runtime.hpp"

namespace eagle {

std::string train_config::to_json() const {
    nlohmann::json j;
    j["lr"] = lr;
    j["batch_size"] = batch_size;
    j["steps"] = steps;
    j["seed"] = seed;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["adam_eps"] = adam_eps;
    j["weight_decay"] = weight_decay;
    j["clip_norm"] = clip_norm;
    j["log_every"] = log_every;
    return j.dump(2);
}

train_config train_config::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    train_config c;
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps = j.value("steps", c.steps);
    c.seed = j.value("seed", c.seed);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.log_every = j.value("log_every", c.log_every);
    return c;
}

std::vector<std::string> default_lora_targets(const eagle_config& cfg) {
    std::vector<std::string> t;
    for (int i = 0; i < cfg.n_layers; ++i) {
        t.push_back("decoder.l" + std::to_string(i) + ".attn.wq");
        t.push_back("decoder.l" + std::to_string(i) + ".attn.wv");
    }
    return t;
}

lora_adapters init_lora(const model_weights& w, int rank, float alpha, uint64_t seed) {
    lora_adapters la;
    la.rank = rank;
    la.alpha = alpha;
    la.targets = default_lora_targets(w.cfg);
    for (const auto& name : la.targets) {
        const tensor& base = w.at(name);
        tensor a({base.shape[0], rank});
        tensor b({rank, base.shape[1]});
        rng r(seed, hash_str64((name + ".lora_a").c_str()));
        for (float& v : a.data) v = 0.01f * r.next_gaussian();
        // B starts at zero so the initial delta is exactly zero
        la.a.emplace(name, std::move(a));
        la.b.emplace(name, std::move(b));
    }
    return la;
}

std::pair<std::vector<size_t>, std::vector<size_t>> split_pretrain_subset(size_t n, double fraction,
                                                                          uint64_t seed) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    rng r(seed, hash_str64("pretrain_split"));
    for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[r.next_range(i)]);
    const size_t cut = std::max<size_t>(1, static_cast<size_t>(std::llround(fraction * static_cast<double>(n))));
    return {std::vector<size_t>(idx.begin(), idx.begin() + static_cast<long>(cut)),
            std::vector<size_t>(idx.begin() + static_cast<long>(cut), idx.end())};
}

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// What a training mode exposes to the graph builder.
struct train_context {
    const model_weights* w = nullptr;
    const quant_plan* plan = nullptr;        // fake-quant every planned tensor
    const lora_adapters* lora = nullptr;     // lora mode
    const model_weights* fq_base = nullptr;  // lora mode: frozen fake-quant base
    std::set<std::string> trainable;         // weight tensor names (ignored in lora mode)
};

// flat parameter layout over the trainable leaves
struct flat_layout {
    std::vector<std::string> names; // sorted
    std::vector<tensor*> dst;       // parameter storage, same order
    std::vector<int64_t> offsets;
    int64_t total = 0;
};

flat_layout layout_for(train_context& ctx, model_weights& w, lora_adapters* lora) {
    flat_layout fl;
    if (ctx.lora) {
        for (const auto& name : lora->targets) {
            fl.names.push_back(name + ".lora_a");
            fl.names.push_back(name + ".lora_b");
        }
        std::sort(fl.names.begin(), fl.names.end());
        for (const auto& n : fl.names) {
            const std::string base = n.substr(0, n.size() - 7);
            fl.dst.push_back(n.ends_with(".lora_a") ? &lora->a.at(base) : &lora->b.at(base));
        }
    } else {
        for (const auto& n : ctx.trainable) fl.names.push_back(n); // std::set is sorted
        for (const auto& n : fl.names) fl.dst.push_back(&w.at(n));
    }
    for (const auto* t : fl.dst) {
        fl.offsets.push_back(fl.total);
        fl.total += t->numel();
    }
    return fl;
}

// Builds the bound weights for one sample graph and records the gradient
// leaves in layout order.
bound_weights<float> bind_context(graphf& g, const train_context& ctx, const flat_layout& fl,
                                  std::vector<graphf::value>& leaves) {
    bound_weights<float> bw;
    std::map<std::string, graphf::value> leaf_by_name;
    if (ctx.lora) {
        const float s = ctx.lora->scaling();
        for (const auto& [name, t] : ctx.fq_base->tensors) {
            auto base = g.constant(t);
            if (ctx.lora->a.count(name)) {
                auto a = g.input(ctx.lora->a.at(name), true);
                auto b = g.input(ctx.lora->b.at(name), true);
                leaf_by_name[name + ".lora_a"] = a;
                leaf_by_name[name + ".lora_b"] = b;
                bw.values[name] = g.add(base, g.scale(g.matmul(a, b), s));
            } else {
                bw.values[name] = base;
            }
        }
    } else {
        for (const auto& [name, t] : ctx.w->tensors) {
            const bool trainable = ctx.trainable.count(name) != 0;
            auto leaf = g.input(t, trainable);
            if (trainable) leaf_by_name[name] = leaf;
            if (ctx.plan) {
                bw.values[name] = g.fake_quant(leaf, ctx.plan->assignments.at(name));
            } else {
                bw.values[name] = leaf;
            }
        }
    }
    leaves.clear();
    for (const auto& n : fl.names) leaves.push_back(leaf_by_name.at(n));
    return bw;
}

// forward+backward for one sample; grads written into `flat`
double sample_grads(const train_context& ctx, const flat_layout& fl, const eagle_config& cfg,
                    const sample& s, std::vector<float>& flat) {
    graphf g;
    std::vector<graphf::value> leaves;
    bound_weights<float> bw = bind_context(g, ctx, fl, leaves);
    const prepared_sample ps = prepare_sample(s, cfg, true);
    sample_graph<float> sg = build_sample_graph(g, bw, cfg, ps, true);
    g.backward(sg.loss);
    for (size_t i = 0; i < leaves.size(); ++i) {
        const tensor& grad = g.grad(leaves[i]);
        float* out = flat.data() + fl.offsets[i];
        if (grad.numel() == 0) {
            std::memset(out, 0, static_cast<size_t>(fl.dst[i]->numel()) * sizeof(float));
        } else {
            std::memcpy(out, grad.data.data(), grad.data.size() * sizeof(float));
        }
    }
    return static_cast<double>(g.val(sg.loss).data[0]);
}

class adam {
  public:
    adam(const flat_layout& fl, const train_config& cfg)
        : fl_(fl), cfg_(cfg), m_(static_cast<size_t>(fl.total), 0.0f),
          v_(static_cast<size_t>(fl.total), 0.0f) {}

    void apply(std::vector<float>& grad) {
        // global-norm clip, accumulated serially in double
        double sq = 0.0;
        for (float gv : grad) sq += static_cast<double>(gv) * gv;
        const double norm = std::sqrt(sq);
        if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) {
            const float sc = static_cast<float>(cfg_.clip_norm / norm);
            for (float& gv : grad) gv *= sc;
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
        const float lr = static_cast<float>(cfg_.lr);
        const float eps = static_cast<float>(cfg_.adam_eps);
        const float wd = static_cast<float>(cfg_.weight_decay);
        const float inv_bc1 = static_cast<float>(1.0 / bc1);
        const float inv_bc2 = static_cast<float>(1.0 / bc2);
        for (size_t p = 0; p < fl_.dst.size(); ++p) {
            float* dst = fl_.dst[p]->data.data();
            const int64_t n = fl_.dst[p]->numel();
            const int64_t off = fl_.offsets[p];
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < n; ++i) {
                const float gv = grad[static_cast<size_t>(off + i)];
                float& m = m_[static_cast<size_t>(off + i)];
                float& v = v_[static_cast<size_t>(off + i)];
                m = b1 * m + (1.0f - b1) * gv;
                v = b2 * v + (1.0f - b2) * gv * gv;
                const float mh = m * inv_bc1;
                const float vh = v * inv_bc2;
                dst[i] -= lr * (mh / (std::sqrt(vh) + eps) + wd * dst[i]);
            }
        }
    }

  private:
    const flat_layout& fl_;
    train_config cfg_;
    std::vector<float> m_, v_;
    int64_t t_ = 0;
};

// dataset order: reshuffled every epoch with a seeded generator
struct batch_stream {
    size_t n;
    uint64_t seed;
    std::vector<size_t> order;
    size_t pos = 0;
    uint64_t epoch = 0;

    explicit batch_stream(size_t count, uint64_t s) : n(count), seed(s) { reshuffle(); }
    void reshuffle() {
        order.resize(n);
        for (size_t i = 0; i < n; ++i) order[i] = i;
        rng r(seed, mix64(hash_str64("epoch_shuffle") ^ epoch));
        for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[r.next_range(i)]);
    }
    size_t next() {
        if (pos >= n) {
            ++epoch;
            pos = 0;
            reshuffle();
        }
        return order[pos++];
    }
};

void train_loop(train_context& ctx, model_weights& w, lora_adapters* lora,
                const std::vector<sample>& data, const train_config& cfg, const metrics_sink& sink) {
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    flat_layout fl = layout_for(ctx, w, lora);
    if (fl.total == 0) throw std::invalid_argument("train: nothing to train");
    adam opt(fl, cfg);
    batch_stream stream(data.size(), cfg.seed);
    const double t0 = now_ms();

    std::vector<std::vector<float>> per_sample(static_cast<size_t>(cfg.batch_size));
    std::vector<double> losses(static_cast<size_t>(cfg.batch_size));
    std::vector<float> mean_grad(static_cast<size_t>(fl.total));
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<size_t> batch(static_cast<size_t>(cfg.batch_size));
        for (int b = 0; b < cfg.batch_size; ++b) batch[static_cast<size_t>(b)] = stream.next();
#pragma omp parallel for schedule(dynamic)
        for (int b = 0; b < cfg.batch_size; ++b) {
            auto& flat = per_sample[static_cast<size_t>(b)];
            flat.assign(static_cast<size_t>(fl.total), 0.0f);
            losses[static_cast<size_t>(b)] =
                sample_grads(ctx, fl, w.cfg, data[batch[static_cast<size_t>(b)]], flat);
        }
        // reduction in sample order keeps results thread-count independent
        std::fill(mean_grad.begin(), mean_grad.end(), 0.0f);
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& flat = per_sample[static_cast<size_t>(b)];
            for (int64_t i = 0; i < fl.total; ++i) mean_grad[static_cast<size_t>(i)] += flat[static_cast<size_t>(i)];
        }
        const float inv = 1.0f / static_cast<float>(cfg.batch_size);
        for (float& gv : mean_grad) gv *= inv;
        opt.apply(mean_grad);

        double loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) loss += losses[static_cast<size_t>(b)];
        loss /= cfg.batch_size;
        if (sink && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
            std::ostringstream os;
            os << "step=" << step << " loss=" << loss << " lr=" << cfg.lr
               << " wall_ms=" << (now_ms() - t0);
            sink(os.str());
        }
    }
}

}  // namespace

void train_stage1(model_weights& w, const std::vector<sample>& data, const train_config& cfg,
                  const metrics_sink& sink) {
    train_context ctx;
    ctx.w = &w;
    ctx.trainable = projector_tensor_names(w.cfg);
    train_loop(ctx, w, nullptr, data, cfg, sink);
}

void train_stage2(model_weights& w, const std::vector<sample>& data, const train_config& cfg,
                  const metrics_sink& sink) {
    train_context ctx;
    ctx.w = &w;
    for (const auto& [name, t] : w.tensors) ctx.trainable.insert(name);
    train_loop(ctx, w, nullptr, data, cfg, sink);
}

checkpoint_data qat_finetune(model_weights& w, const quant_plan& plan, qat_mode mode,
                             const std::vector<sample>& data, const train_config& cfg,
                             const metrics_sink& sink, lora_adapters* out_adapters) {
    for (const auto& [name, t] : w.tensors)
        if (!plan.assignments.count(name))
            throw std::invalid_argument("qat: plan is missing tensor '" + name + "'");

    if (mode == qat_mode::full) {
        train_context ctx;
        ctx.w = &w;
        ctx.plan = &plan;
        for (const auto& [name, t] : w.tensors) ctx.trainable.insert(name);
        train_loop(ctx, w, nullptr, data, cfg, sink);
        return quantize_checkpoint(w, plan);
    }

    // lora: freeze the fake-quantized base, train adapters only
    model_weights fq_base;
    fq_base.cfg = w.cfg;
    for (const auto& [name, t] : w.tensors)
        fq_base.tensors.emplace(name, fake_quant(t, plan.assignments.at(name)));
    lora_adapters adapters = init_lora(w, 8, 16.0f, cfg.seed);
    train_context ctx;
    ctx.w = &w;
    ctx.plan = &plan;
    ctx.lora = &adapters;
    ctx.fq_base = &fq_base;
    train_loop(ctx, w, &adapters, data, cfg, sink);

    checkpoint_data ckpt = quantize_checkpoint(w, plan);
    ckpt.meta.kind = "quantized_lora";
    ckpt.meta.lora.rank = adapters.rank;
    ckpt.meta.lora.alpha = adapters.alpha;
    ckpt.meta.lora.targets = adapters.targets;
    for (const auto& name : adapters.targets) {
        stored_tensor a, b;
        a.dtype = dtype_f32;
        a.f32 = adapters.a.at(name);
        b.dtype = dtype_f32;
        b.f32 = adapters.b.at(name);
        ckpt.tensors.emplace(name + ".lora_a", std::move(a));
        ckpt.tensors.emplace(name + ".lora_b", std::move(b));
    }
    if (out_adapters) *out_adapters = adapters;
    return ckpt;
}

sensitivity_report compute_sensitivity(const model_weights& w, const std::vector<sample>& calib,
                                       const metrics_sink& sink) {
    if (calib.empty()) throw std::invalid_argument("compute_sensitivity: empty calibration set");
    runtime_model rm = runtime_model::from_weights(w);
    const size_t n = calib.size();

    std::vector<prepared_sample> ps(n);
    std::vector<segment_cache> caches(n);
    std::vector<double> losses(n);
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
        ps[i] = prepare_sample(calib[static_cast<size_t>(i)], w.cfg, true);
        const packed_sequence seq = assemble_embeddings(rm, ps[i], &caches[i], false, false);
        kv_cache kc = make_cache(w.cfg);
        const tensor logits = decoder_prefill(rm, seq.embeddings, kc);
        losses[i] = masked_cross_entropy(logits, ps[i].targets, ps[i].mask);
    }
    double base = 0.0;
    for (double l : losses) base += l;
    base /= static_cast<double>(n);
    if (sink) sink("sensitivity base_loss=" + std::to_string(base));

    const quant_spec probe{4, 32, true};
    sensitivity_report report;
    int done = 0;
    for (const auto& [name, t] : w.tensors) {
        runtime_weight backup = rm.rw(name);
        runtime_weight& live = rm.rw_mut(name);
        live.dense = fake_quant(t, probe);
        live.packed = false;

        const bool fresh_vision =
            name.rfind("vision.", 0) == 0 || name.rfind("proj.vision", 0) == 0;
        const bool fresh_audio = name.rfind("audio.", 0) == 0 || name.rfind("proj.audio", 0) == 0;
#pragma omp parallel for schedule(dynamic)
        for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) {
            const packed_sequence seq =
                assemble_embeddings(rm, ps[i], &caches[i], fresh_vision, fresh_audio);
            kv_cache kc = make_cache(w.cfg);
            const tensor logits = decoder_prefill(rm, seq.embeddings, kc);
            losses[i] = masked_cross_entropy(logits, ps[i].targets, ps[i].mask);
        }
        double loss = 0.0;
        for (double l : losses) loss += l;
        loss /= static_cast<double>(n);
        report.loss_delta[name] = std::max(0.0, loss - base);

        rm.rw_mut(name) = std::move(backup);
        ++done;
        if (sink && done % 16 == 0)
            sink("sensitivity " + std::to_string(done) + "/" +
                 std::to_string(w.tensors.size()) + " tensors");
    }
    return report;
}

quant_plan plan_mixed_precision(const model_weights& w, const std::vector<sample>& calib,
                                double target_avg_bits, const metrics_sink& sink) {
    const sensitivity_report report = compute_sensitivity(w, calib, sink);
    return build_mixed_plan(report, param_counts(w), target_avg_bits, forced_int8_tensors(w.cfg));
}

std::string plan_to_text(const quant_plan& plan) {
    std::ostringstream os;
    os.precision(17);
    int group_size = 32;
    if (!plan.assignments.empty()) group_size = plan.assignments.begin()->second.group_size;
    os << "# eagle quantization plan v1\n";
    os << "target_avg_bits " << plan.target_avg_bits << "\n";
    os << "achieved_avg_bits " << plan.achieved_avg_bits << "\n";
    os << "group_size " << group_size << "\n";
    for (const auto& [name, spec] : plan.assignments) os << "tensor " << name << " " << spec.bits << "\n";
    return os.str();
}

quant_plan plan_from_text(const std::string& text) {
    quant_plan plan;
    int group_size = 32;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "target_avg_bits") {
            ls >> plan.target_avg_bits;
        } else if (key == "achieved_avg_bits") {
            ls >> plan.achieved_avg_bits;
        } else if (key == "group_size") {
            ls >> group_size;
        } else if (key == "tensor") {
            std::string name;
            int bits = 0;
            ls >> name >> bits;
            if (name.empty() || (bits != 4 && bits != 8))
                throw format_error("plan: bad tensor line: " + line);
            plan.assignments[name] = quant_spec{bits, group_size, true};
        } else {
            throw format_error("plan: unknown key '" + key + "'");
        }
        if (ls.fail()) throw format_error("plan: malformed line: " + line);
    }
    for (auto& [name, spec] : plan.assignments) spec.group_size = group_size;
    return plan;
}

void save_plan(const std::string& path, const quant_plan& plan) {
    const std::string text = plan_to_text(plan);
    write_file_atomic(path, text.data(), text.size());
}

quant_plan load_plan(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    return plan_from_text(std::string(bytes.begin(), bytes.end()));
}

}  // namespace eagle
