#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "eagle/config.hpp"
#include "eagle/tensor.hpp"

namespace eagle {

enum class init_kind { fan_in_gaussian, small_gaussian, ones };

struct tensor_spec {
    std::string name;
    std::vector<int64_t> shape;
    init_kind init;
};

// The full parameter inventory for a config; single source of truth for
// initialization, checkpoints and the runtime.
std::vector<tensor_spec> tensor_specs(const eagle_config& cfg);

struct model_weights {
    eagle_config cfg;
    std::map<std::string, tensor> tensors; // name-sorted, deterministic order

    tensor& at(const std::string& name);
    const tensor& at(const std::string& name) const;
    int64_t total_params() const;
};

model_weights init_weights(const eagle_config& cfg, uint64_t seed);

std::map<std::string, int64_t> param_counts(const model_weights& w);

// Embedding and final-norm gains stay int8 in any mixed plan.
std::set<std::string> forced_int8_tensors(const eagle_config& cfg);

// FNV-1a over the raw float bytes; used by freeze-contract checks.
uint64_t tensor_bytes_hash(const tensor& t);
uint64_t weights_hash(const model_weights& w, const std::set<std::string>& subset = {});

// Parameter-name groups for the training stages.
std::set<std::string> projector_tensor_names(const eagle_config& cfg);

}  // namespace eagle
