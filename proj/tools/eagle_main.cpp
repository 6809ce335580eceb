// eagle: command-line surface for the toy multi-modal pipeline.
// Subcommands: synth | train | plan | quantize | qat | generate | bench | inspect

#include <omp.h>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "eagle/checkpoint.hpp"
#include "eagle/dataset.hpp"
#include "eagle/image_io.hpp"
#include "eagle/runtime.hpp"
#include "eagle/train.hpp"

namespace {

using namespace eagle;

std::string read_text_file(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

struct pipeline_config {
    eagle_config model;
    train_config stage1;
    train_config stage2;
    train_config qat;
};

pipeline_config load_pipeline_config(const std::string& path) {
    pipeline_config pc;
    pc.stage1.lr = 1e-3; // projectors only
    pc.stage1.steps = 150;
    pc.qat.lr = 1e-4;
    pc.qat.steps = 100;
    if (path.empty()) return pc;
    nlohmann::json j = nlohmann::json::parse(read_text_file(path));
    if (j.contains("model")) pc.model = eagle_config::from_json(j["model"].dump());
    if (j.contains("stage1")) pc.stage1 = train_config::from_json(j["stage1"].dump());
    if (j.contains("stage2")) pc.stage2 = train_config::from_json(j["stage2"].dump());
    if (j.contains("qat")) pc.qat = train_config::from_json(j["qat"].dump());
    return pc;
}

std::vector<sample> load_datasets(const std::vector<std::string>& paths) {
    std::vector<sample> all;
    for (const auto& p : paths) {
        auto part = read_dataset(p);
        all.insert(all.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
    }
    if (all.empty()) throw std::runtime_error("no samples in dataset input");
    return all;
}

metrics_sink stdout_sink(const std::string& log_path) {
    auto log = log_path.empty() ? nullptr : std::make_shared<std::ofstream>(log_path, std::ios::app);
    return [log](const std::string& line) {
        std::cout << line << "\n";
        if (log && log->is_open()) *log << line << "\n" << std::flush;
    };
}

// "path" (png) or "path:HxW" (raw rgb)
image_u8 load_image_arg(const std::string& arg) {
    const auto colon = arg.rfind(':');
    if (colon != std::string::npos && arg.find('x', colon) != std::string::npos) {
        const std::string path = arg.substr(0, colon);
        const std::string dims = arg.substr(colon + 1);
        const auto x = dims.find('x');
        const int h = std::stoi(dims.substr(0, x));
        const int w = std::stoi(dims.substr(x + 1));
        return read_raw_rgb_file(path, h, w);
    }
    return read_image_file(arg);
}

int cmd_synth(const std::string& task, int count, uint64_t seed, const std::string& out) {
    const synth_task t = task_from_name(task);
    std::vector<sample> samples;
    samples.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) samples.push_back(generate_sample(t, seed + static_cast<uint64_t>(i)));
    write_dataset(out, samples);
    std::cout << "wrote " << samples.size() << " samples to " << out << "\n";
    return 0;
}

int cmd_train(int stage, const std::vector<std::string>& data_paths, const std::string& config_path,
              const std::string& init_ckpt, const std::string& out, const std::string& log_path) {
    pipeline_config pc = load_pipeline_config(config_path);
    auto data = load_datasets(data_paths);

    model_weights w = [&] {
        if (stage == 1) {
            if (!init_ckpt.empty()) return weights_from_checkpoint(load_checkpoint_file(init_ckpt));
            return init_weights(pc.model, pc.stage1.seed);
        }
        if (init_ckpt.empty())
            throw std::runtime_error("train --stage 2 requires --init with the stage-1 checkpoint");
        return weights_from_checkpoint(load_checkpoint_file(init_ckpt));
    }();

    // stage 1 trains on a 10% seeded subset, stage 2 on the remainder
    auto [subset, rest] = split_pretrain_subset(data.size(), 0.10, pc.stage1.seed);
    std::vector<sample> split_data;
    for (size_t i : stage == 1 ? subset : rest) split_data.push_back(data[i]);

    auto sink = stdout_sink(log_path);
    if (stage == 1)
        train_stage1(w, split_data, pc.stage1, sink);
    else
        train_stage2(w, split_data, pc.stage2, sink);

    checkpoint_data ckpt = checkpoint_from_weights(w);
    save_checkpoint(out, ckpt);
    std::cout << "wrote checkpoint " << out << "\n";
    return 0;
}

int cmd_plan(const std::string& ckpt_path, const std::string& calib_path, double target_bits,
             int calib_count, const std::string& out) {
    model_weights w = weights_from_checkpoint(load_checkpoint_file(ckpt_path));
    auto calib = read_dataset(calib_path);
    if (calib_count > 0 && static_cast<size_t>(calib_count) < calib.size())
        calib.resize(static_cast<size_t>(calib_count));
    auto sink = stdout_sink("");
    const quant_plan plan = plan_mixed_precision(w, calib, target_bits, sink);
    save_plan(out, plan);
    std::cout << "target_avg_bits " << plan.target_avg_bits << "\n";
    std::cout << "achieved_avg_bits " << plan.achieved_avg_bits << "\n";
    std::cout << "wrote plan " << out << "\n";
    return 0;
}

int cmd_quantize(const std::string& ckpt_path, const std::string& plan_path, const std::string& out) {
    model_weights w = weights_from_checkpoint(load_checkpoint_file(ckpt_path));
    const quant_plan plan = load_plan(plan_path);
    checkpoint_data q = quantize_checkpoint(w, plan);
    save_checkpoint(out, q);

    const double achieved = q.average_bits();
    const auto est = estimate_size_bytes(static_cast<uint64_t>(q.total_params()), achieved, 32);
    const auto actual = read_file_bytes(out).size();
    std::cout << "achieved_avg_bits " << achieved << "\n";
    std::cout << "estimated_bytes " << est.total() << "\n";
    std::cout << "actual_bytes " << actual << "\n";
    return 0;
}

int cmd_qat(const std::string& ckpt_path, const std::string& plan_path, const std::string& mode,
            const std::vector<std::string>& data_paths, const std::string& config_path,
            const std::string& out, const std::string& log_path) {
    model_weights w = weights_from_checkpoint(load_checkpoint_file(ckpt_path));
    const quant_plan plan = load_plan(plan_path);
    auto data = load_datasets(data_paths);
    pipeline_config pc = load_pipeline_config(config_path);
    const qat_mode m = mode == "full" ? qat_mode::full : qat_mode::lora;
    if (mode != "full" && mode != "lora") throw std::runtime_error("qat --mode must be full or lora");
    checkpoint_data ckpt = qat_finetune(w, plan, m, data, pc.qat, stdout_sink(log_path));
    save_checkpoint(out, ckpt);
    std::cout << "wrote checkpoint " << out << "\n";
    return 0;
}

int cmd_generate(const std::string& ckpt_path, const std::string& prompt,
                 const std::vector<std::string>& images, const std::vector<std::string>& audios,
                 int max_tokens, float temperature, int top_k, uint64_t seed) {
    const runtime_model m = runtime_model::from_checkpoint(load_checkpoint_file(ckpt_path));
    sample s;
    if (!prompt.empty()) {
        mm_segment seg;
        seg.kind = modality::text;
        seg.tokens = m.vocab.encode(prompt);
        if (seg.tokens.empty()) throw std::runtime_error("prompt contained no tokens");
        s.segments.push_back(std::move(seg));
    }
    for (const auto& arg : images) {
        mm_segment seg;
        seg.kind = modality::image;
        seg.img = load_image_arg(arg);
        s.segments.push_back(std::move(seg));
    }
    for (const auto& path : audios) {
        mm_segment seg;
        seg.kind = modality::audio;
        seg.audio = read_pcm16_file(path);
        if (seg.audio.empty()) throw std::runtime_error("empty audio file: " + path);
        s.segments.push_back(std::move(seg));
    }
    if (s.segments.empty()) throw std::runtime_error("generate needs a prompt, image, or audio input");

    generation_config gc;
    gc.max_new_tokens = max_tokens;
    gc.temperature = temperature;
    gc.top_k = top_k;
    gc.seed = seed;
    bool first = true;
    const generation_result r = generate(m, s, gc, [&](int tok) {
        std::cout << (first ? "" : " ") << m.vocab.word(tok) << std::flush;
        first = false;
    });
    std::cout << "\n";
    std::cout << "ttft_ms=" << r.metrics.ttft_ms << " tokens_per_sec=" << r.metrics.tokens_per_sec
              << " prefill_tokens=" << r.metrics.prefill_tokens
              << " decode_tokens=" << r.metrics.decode_tokens << "\n";
    if (r.reason == stop_reason::context_overflow) {
        std::cerr << "error: generate: context overflow after " << r.tokens.size()
                  << " tokens\n";
        return 1;
    }
    return 0;
}

int cmd_bench(const std::string& ckpt_path, int prompt_tokens, int decode_tokens, int reps,
              const std::string& baseline_path) {
    const runtime_model m = runtime_model::from_checkpoint(load_checkpoint_file(ckpt_path));
    bench_workload wl{prompt_tokens, decode_tokens};
    const bench_report r = bench_model(m, wl, reps, ckpt_path);
    std::cout << r.to_text();
    if (!baseline_path.empty()) {
        const runtime_model base =
            runtime_model::from_checkpoint(load_checkpoint_file(baseline_path));
        const bench_report rb = bench_model(base, wl, reps, baseline_path);
        std::cout << "baseline_model " << rb.model << "\n";
        std::cout << "baseline_tokens_per_sec_median " << rb.tokens_per_sec_median << "\n";
        std::cout << "throughput_ratio_vs_baseline "
                  << (r.tokens_per_sec_median / rb.tokens_per_sec_median) << "\n";
    }
    return 0;
}

int cmd_inspect(const std::string& ckpt_path) {
    const checkpoint_data ckpt = load_checkpoint_file(ckpt_path);
    std::printf("%-32s %-6s %-16s %5s %12s\n", "name", "dtype", "shape", "bits", "bytes");
    for (const auto& [name, t] : ckpt.tensors) {
        const char* dtype =
            t.dtype == dtype_f32 ? "f32" : (t.dtype == dtype_int8 ? "int8" : "int4");
        std::printf("%-32s %-6s %-16s %5d %12llu\n", name.c_str(), dtype,
                    shape_str(t.dims()).c_str(), t.bits(),
                    static_cast<unsigned long long>(t.data_len()));
    }
    const double avg = ckpt.average_bits();
    const int group = ckpt.meta.kind == "f32" ? 0 : 32;
    const auto est =
        estimate_size_bytes(static_cast<uint64_t>(ckpt.total_params()), avg, group);
    std::printf("total_params %lld\n", static_cast<long long>(ckpt.total_params()));
    std::printf("avg_bits %.4f\n", avg);
    std::printf("predicted_file_size %llu\n", static_cast<unsigned long long>(est.total()));
    std::printf("actual_file_size %zu\n", read_file_bytes(ckpt_path).size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"eagle: toy multi-modal small language model pipeline"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP thread count (0 = library default)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string task, out, ckpt, plan_path, calib, config_path, init_ckpt, log_path;
    int count = 100;
    uint64_t seed = 0;
    synth->add_option("--task", task, "color_grid | tone_digits | interleaved")->required();
    synth->add_option("--count", count)->required();
    synth->add_option("--seed", seed, "seed of the first sample");
    synth->add_option("--out", out)->required();

    auto* train = app.add_subcommand("train", "two-stage pre-training");
    int stage = 1;
    std::vector<std::string> data_paths;
    train->add_option("--stage", stage)->check(CLI::IsMember({1, 2}))->required();
    train->add_option("--data", data_paths, "dataset file(s)")->required();
    train->add_option("--config", config_path, "pipeline config JSON");
    train->add_option("--init", init_ckpt, "initial checkpoint (required for stage 2)");
    train->add_option("--out", out)->required();
    train->add_option("--log", log_path, "metrics log file");

    auto* plan = app.add_subcommand("plan", "mixed-precision bit allocation");
    double target_bits = 5.5;
    int calib_count = 256;
    plan->add_option("--ckpt", ckpt)->required();
    plan->add_option("--calib", calib, "calibration dataset")->required();
    plan->add_option("--target-bits", target_bits);
    plan->add_option("--calib-count", calib_count, "calibration samples used (default 256)");
    plan->add_option("--out", out)->required();

    auto* quantize = app.add_subcommand("quantize", "pack weights per plan");
    quantize->add_option("--ckpt", ckpt)->required();
    quantize->add_option("--plan", plan_path)->required();
    quantize->add_option("--out", out)->required();

    auto* qat = app.add_subcommand("qat", "quantization-aware fine-tuning");
    std::string mode = "full";
    qat->add_option("--ckpt", ckpt)->required();
    qat->add_option("--plan", plan_path)->required();
    qat->add_option("--mode", mode, "full | lora")->required();
    qat->add_option("--data", data_paths)->required();
    qat->add_option("--config", config_path);
    qat->add_option("--out", out)->required();
    qat->add_option("--log", log_path);

    auto* generate_cmd = app.add_subcommand("generate", "autoregressive generation");
    std::string prompt;
    std::vector<std::string> images, audios;
    int max_tokens = 32, top_k = 1;
    float temperature = 0.0f;
    generate_cmd->add_option("--ckpt", ckpt)->required();
    generate_cmd->add_option("--prompt", prompt, "text prompt (closed vocabulary)");
    generate_cmd->add_option("--image", images, "png file, or raw rgb as path:HxW");
    generate_cmd->add_option("--audio", audios, "raw 16-bit pcm mono 16 kHz");
    generate_cmd->add_option("--max-tokens", max_tokens);
    generate_cmd->add_option("--temperature", temperature);
    generate_cmd->add_option("--top-k", top_k);
    generate_cmd->add_option("--seed", seed);

    auto* bench_cmd = app.add_subcommand("bench", "edge-performance measurement");
    int prompt_tokens = 64, decode_tokens = 32, reps = 5;
    std::string baseline;
    bench_cmd->add_option("--ckpt", ckpt)->required();
    bench_cmd->add_option("--prompt-tokens", prompt_tokens);
    bench_cmd->add_option("--decode-tokens", decode_tokens);
    bench_cmd->add_option("--reps", reps);
    bench_cmd->add_option("--baseline-ckpt", baseline, "also bench this checkpoint and report the ratio");

    auto* inspect = app.add_subcommand("inspect", "checkpoint tensor table");
    inspect->add_option("--ckpt", ckpt)->required();

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (*synth) return cmd_synth(task, count, seed, out);
        if (*train) return cmd_train(stage, data_paths, config_path, init_ckpt, out, log_path);
        if (*plan) return cmd_plan(ckpt, calib, target_bits, calib_count, out);
        if (*quantize) return cmd_quantize(ckpt, plan_path, out);
        if (*qat) return cmd_qat(ckpt, plan_path, mode, data_paths, config_path, out, log_path);
        if (*generate_cmd)
            return cmd_generate(ckpt, prompt, images, audios, max_tokens, temperature, top_k, seed);
        if (*bench_cmd) return cmd_bench(ckpt, prompt_tokens, decode_tokens, reps, baseline);
        if (*inspect) return cmd_inspect(ckpt);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& c : msg)
            if (c == '\n') c = ' ';
        std::cerr << "error: " << msg << "\n";
        return 1;
    }
    return 0;
}
