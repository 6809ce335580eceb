#include "eagle/checkpoint.hpp"

#include <cstring>

#include "json.hpp"

#include "eagle/errors.hpp"
#include "eagle/image_io.hpp"

namespace eagle {

int64_t stored_tensor::numel() const {
    return dtype == dtype_f32 ? f32.numel() : q.numel();
}

uint64_t stored_tensor::data_len() const {
    if (dtype == dtype_f32) return static_cast<uint64_t>(f32.numel()) * 4;
    return static_cast<uint64_t>(q.scales.size()) * 4 + static_cast<uint64_t>(q.packed.size());
}

std::string checkpoint_meta::to_json() const {
    nlohmann::json j;
    j["model"] = nlohmann::json::parse(model.to_json());
    j["kind"] = kind;
    if (kind != "f32") {
        j["target_avg_bits"] = target_avg_bits;
        j["achieved_avg_bits"] = achieved_avg_bits;
    }
    if (lora.enabled()) {
        j["lora"]["rank"] = lora.rank;
        j["lora"]["alpha"] = lora.alpha;
        j["lora"]["targets"] = lora.targets;
    }
    return j.dump();
}

checkpoint_meta checkpoint_meta::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    checkpoint_meta m;
    m.model = eagle_config::from_json(j.at("model").dump());
    m.kind = j.value("kind", std::string("f32"));
    m.target_avg_bits = j.value("target_avg_bits", 0.0);
    m.achieved_avg_bits = j.value("achieved_avg_bits", 0.0);
    if (j.contains("lora")) {
        m.lora.rank = j["lora"].value("rank", 0);
        m.lora.alpha = j["lora"].value("alpha", 0.0f);
        m.lora.targets = j["lora"].value("targets", std::vector<std::string>{});
    }
    return m;
}

double checkpoint_data::average_bits() const {
    double weighted = 0.0;
    int64_t total = 0;
    for (const auto& [name, t] : tensors) {
        weighted += static_cast<double>(t.bits()) * static_cast<double>(t.numel());
        total += t.numel();
    }
    return weighted / static_cast<double>(total);
}

int64_t checkpoint_data::total_params() const {
    int64_t total = 0;
    for (const auto& [name, t] : tensors) total += t.numel();
    return total;
}

namespace {

template <typename T>
void put(std::string& buf, T v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct byte_reader {
    const uint8_t* p;
    size_t len;
    size_t pos = 0;

    template <typename T>
    T get(const char* what) {
        if (pos + sizeof(T) > len)
            throw format_error(std::string("checkpoint: truncated while reading ") + what,
                               static_cast<int64_t>(pos));
        T v;
        std::memcpy(&v, p + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    const uint8_t* bytes(size_t n, const char* what) {
        if (pos + n > len)
            throw format_error(std::string("checkpoint: truncated while reading ") + what,
                               static_cast<int64_t>(pos));
        const uint8_t* q = p + pos;
        pos += n;
        return q;
    }
};

uint64_t align64(uint64_t x) { return (x + 63) & ~uint64_t(63); }

}  // namespace

void save_checkpoint(const std::string& path, const checkpoint_data& ckpt) {
    const std::string config = ckpt.meta.to_json();

    // table size: per tensor 2 + name + 1 + 1 + 8*ndim + 4 + 8 + 8
    uint64_t table_bytes = 0;
    for (const auto& [name, t] : ckpt.tensors)
        table_bytes += 2 + name.size() + 1 + 1 + 8 * t.dims().size() + 4 + 8 + 8;
    const uint64_t header_end = 4 + 4 + 8 + config.size() + 4 + table_bytes;
    const uint64_t data_start = align64(header_end);

    std::string buf;
    buf.reserve(data_start);
    buf += "EGLT";
    put(buf, static_cast<uint32_t>(1));
    put(buf, static_cast<uint64_t>(config.size()));
    buf += config;
    put(buf, static_cast<uint32_t>(ckpt.tensors.size()));
    uint64_t offset = data_start;
    for (const auto& [name, t] : ckpt.tensors) {
        put(buf, static_cast<uint16_t>(name.size()));
        buf += name;
        put(buf, static_cast<uint8_t>(t.dtype));
        put(buf, static_cast<uint8_t>(t.dims().size()));
        for (int64_t d : t.dims()) put(buf, static_cast<uint64_t>(d));
        put(buf, static_cast<uint32_t>(t.dtype == dtype_f32 ? 0 : t.q.spec.group_size));
        put(buf, offset);
        put(buf, t.data_len());
        offset += t.data_len();
    }
    buf.resize(data_start, '\0');
    for (const auto& [name, t] : ckpt.tensors) {
        if (t.dtype == dtype_f32) {
            buf.append(reinterpret_cast<const char*>(t.f32.data.data()), t.f32.data.size() * 4);
        } else {
            buf.append(reinterpret_cast<const char*>(t.q.scales.data()), t.q.scales.size() * 4);
            buf.append(reinterpret_cast<const char*>(t.q.packed.data()), t.q.packed.size());
        }
    }
    write_file_atomic(path, buf.data(), buf.size());
}

checkpoint_data load_checkpoint_file(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    byte_reader r{bytes.data(), bytes.size(), 0};

    const uint8_t* magic = r.bytes(4, "magic");
    if (std::memcmp(magic, "EGLT", 4) != 0) throw format_error("checkpoint: bad magic", 0);
    const uint32_t version = r.get<uint32_t>("version");
    if (version != 1)
        throw format_error("checkpoint: unsupported version " + std::to_string(version), 4);
    const uint64_t config_len = r.get<uint64_t>("config length");
    if (config_len > bytes.size())
        throw format_error("checkpoint: config length " + std::to_string(config_len) +
                               " exceeds file size",
                           static_cast<int64_t>(r.pos) - 8);
    const uint8_t* cfg_bytes = r.bytes(config_len, "config");

    checkpoint_data ckpt;
    try {
        ckpt.meta = checkpoint_meta::from_json(
            std::string(reinterpret_cast<const char*>(cfg_bytes), config_len));
    } catch (const std::exception& e) {
        throw format_error(std::string("checkpoint: bad config JSON: ") + e.what(), 16);
    }

    const uint32_t tensor_count = r.get<uint32_t>("tensor count");
    struct entry {
        std::string name;
        uint8_t dtype;
        std::vector<int64_t> dims;
        uint32_t group_size;
        uint64_t data_offset, data_len;
        size_t table_pos;
    };
    std::vector<entry> entries;
    for (uint32_t i = 0; i < tensor_count; ++i) {
        entry e;
        e.table_pos = r.pos;
        const uint16_t name_len = r.get<uint16_t>("tensor name length");
        const uint8_t* name = r.bytes(name_len, "tensor name");
        e.name.assign(reinterpret_cast<const char*>(name), name_len);
        e.dtype = r.get<uint8_t>("dtype");
        if (e.dtype > dtype_int4)
            throw format_error("checkpoint: unknown dtype " + std::to_string(e.dtype) +
                                   " for tensor '" + e.name + "'",
                               static_cast<int64_t>(r.pos) - 1);
        const uint8_t ndim = r.get<uint8_t>("ndim");
        if (ndim == 0 || ndim > 8)
            throw format_error("checkpoint: bad ndim for tensor '" + e.name + "'",
                               static_cast<int64_t>(r.pos) - 1);
        for (uint8_t d = 0; d < ndim; ++d) {
            const uint64_t dim = r.get<uint64_t>("dim");
            if (dim == 0 || dim > (uint64_t(1) << 40))
                throw format_error("checkpoint: bad dimension for tensor '" + e.name + "'",
                                   static_cast<int64_t>(r.pos) - 8);
            e.dims.push_back(static_cast<int64_t>(dim));
        }
        e.group_size = r.get<uint32_t>("group size");
        e.data_offset = r.get<uint64_t>("data offset");
        e.data_len = r.get<uint64_t>("data length");
        entries.push_back(std::move(e));
    }

    for (const auto& e : entries) {
        if (ckpt.tensors.count(e.name))
            throw format_error("checkpoint: duplicate tensor '" + e.name + "'",
                               static_cast<int64_t>(e.table_pos));
        if (e.data_offset + e.data_len > bytes.size())
            throw format_error("checkpoint: data for tensor '" + e.name +
                                   "' extends past end of file",
                               static_cast<int64_t>(e.data_offset));
        stored_tensor st;
        st.dtype = e.dtype;
        int64_t numel = 1;
        for (int64_t d : e.dims) numel *= d;
        if (e.dtype == dtype_f32) {
            if (e.group_size != 0)
                throw format_error("checkpoint: f32 tensor '" + e.name + "' with nonzero group size",
                                   static_cast<int64_t>(e.table_pos));
            if (e.data_len != static_cast<uint64_t>(numel) * 4)
                throw format_error("checkpoint: tensor '" + e.name + "' data length " +
                                       std::to_string(e.data_len) + " does not match shape (want " +
                                       std::to_string(numel * 4) + ")",
                                   static_cast<int64_t>(e.data_offset));
            st.f32 = tensor(e.dims);
            std::memcpy(st.f32.data.data(), bytes.data() + e.data_offset, e.data_len);
        } else {
            quantized_tensor q;
            q.spec.bits = e.dtype == dtype_int8 ? 8 : 4;
            q.spec.group_size = static_cast<int>(e.group_size);
            q.shape = e.dims;
            try {
                q.spec.validate();
            } catch (const std::exception& ex) {
                throw format_error("checkpoint: tensor '" + e.name + "': " + ex.what(),
                                   static_cast<int64_t>(e.table_pos));
            }
            const uint64_t scale_bytes = static_cast<uint64_t>(q.num_groups()) * 4;
            const uint64_t code_bytes = static_cast<uint64_t>(q.packed_bytes());
            if (e.data_len != scale_bytes + code_bytes)
                throw format_error("checkpoint: tensor '" + e.name + "' data length " +
                                       std::to_string(e.data_len) + " does not match shape (want " +
                                       std::to_string(scale_bytes + code_bytes) + ")",
                                   static_cast<int64_t>(e.data_offset));
            q.scales.resize(static_cast<size_t>(q.num_groups()));
            std::memcpy(q.scales.data(), bytes.data() + e.data_offset, scale_bytes);
            q.packed.resize(static_cast<size_t>(code_bytes));
            std::memcpy(q.packed.data(), bytes.data() + e.data_offset + scale_bytes, code_bytes);
            q.validate();
            st.q = std::move(q);
        }
        ckpt.tensors.emplace(e.name, std::move(st));
    }
    return ckpt;
}

checkpoint_data checkpoint_from_weights(const model_weights& w) {
    checkpoint_data ckpt;
    ckpt.meta.model = w.cfg;
    ckpt.meta.kind = "f32";
    for (const auto& [name, t] : w.tensors) {
        stored_tensor st;
        st.dtype = dtype_f32;
        st.f32 = t;
        ckpt.tensors.emplace(name, std::move(st));
    }
    return ckpt;
}

checkpoint_data quantize_checkpoint(const model_weights& w, const quant_plan& plan) {
    checkpoint_data ckpt;
    ckpt.meta.model = w.cfg;
    ckpt.meta.kind = "quantized";
    ckpt.meta.target_avg_bits = plan.target_avg_bits;
    ckpt.meta.achieved_avg_bits = plan.achieved_avg_bits;
    for (const auto& [name, t] : w.tensors) {
        auto it = plan.assignments.find(name);
        if (it == plan.assignments.end())
            throw std::invalid_argument("quantize_checkpoint: plan is missing tensor '" + name + "'");
        stored_tensor st;
        st.dtype = it->second.bits == 8 ? dtype_int8 : dtype_int4;
        st.q = quantize(t, it->second);
        ckpt.tensors.emplace(name, std::move(st));
    }
    return ckpt;
}

model_weights weights_from_checkpoint(const checkpoint_data& ckpt) {
    model_weights w;
    w.cfg = ckpt.meta.model;
    for (const auto& [name, st] : ckpt.tensors) {
        if (name.find(".lora_") != std::string::npos) continue;
        w.tensors.emplace(name, st.dtype == dtype_f32 ? st.f32 : dequantize(st.q));
    }
    return w;
}

}  // namespace eagle
