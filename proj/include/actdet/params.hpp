#pragma once

#include <map>
#include <string>

#include "actdet/config.hpp"
#include "actdet/graph.hpp"
#include "actdet/tensor.hpp"

namespace actdet {

// Named parameter set. std::map keeps iteration order deterministic.
struct ParamStore {
    std::map<std::string, Tensor> tensors;

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return tensors.count(name) > 0; }
    void zero_grads();
    NodeId node(Graph& g, const std::string& name) { return g.param(at(name)); }
};

// Builds every parameter the configured model needs. Uniform fan-in init for
// weights, zero biases, LayerNorm gain 1 / bias 0.
ParamStore init_params(const ModelConfig& cfg, uint64_t seed);

struct OptState {
    std::map<std::string, Tensor> momentum;  // same shapes as params
    int64_t step = 0;
};

// Versioned binary checkpoint: header (magic, version, config hash), then
// named little-endian float64 tensors for params and optimizer state.
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ParamStore& params, const OptState& opt);
void load_checkpoint(const std::string& path, const ModelConfig& cfg,
                     ParamStore& params, OptState& opt);

}  // namespace actdet
