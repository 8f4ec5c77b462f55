#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsc/ops.hpp"
#include "tsc/tensor.hpp"

namespace tsc {

enum class LayerKind {
    dense,
    conv,
    batchnorm,
    relu,
    dropout,
    gap,
    add_shortcut,
    softmax_head,
};

const char* layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

/// One layer of an ordered network description. Parameterized kinds carry a
/// slot prefix; the parameters themselves live in a ParameterSet.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int units = 0;       // dense: output features
    int filters = 0;     // conv: output channels
    int kernel = 0;      // conv: kernel size
    double rate = 0.0;   // dropout
    std::string slot;    // parameter slot prefix; empty for parameterless layers
    int from = -1;       // add_shortcut: source layer index, -1 = network input
    bool projection = false;  // add_shortcut: 1x1 conv + batchnorm on the source
};

/// Ordered layer list plus input geometry. Built once, then immutable.
struct NetworkSpec {
    std::string name;  // mlp | fcn | resnet
    std::size_t input_len = 0;
    std::size_t classes = 0;
    bool conv_input = false;  // input reshaped to [B,1,T] before the first layer
    std::vector<LayerSpec> layers;

    /// Walks the layer list checking ranks, channel counts and shortcut
    /// operand shapes. Throws ShapeError on any inconsistency.
    void validate() const;

    /// Index of the global-average-pooling layer, if the spec has one.
    std::optional<std::size_t> gap_index() const;
};

using SlotMap = std::map<std::string, Tensor>;

/// Learnable parameters plus batchnorm running statistics, keyed by slot id.
struct ParameterSet {
    SlotMap values;   // weights, biases, gammas, betas
    SlotMap running;  // <slot>.mean / <slot>.var per batchnorm
};

NetworkSpec build_mlp(std::size_t input_len, std::size_t classes);
NetworkSpec build_fcn(std::size_t input_len, std::size_t classes);
NetworkSpec build_resnet(std::size_t input_len, std::size_t classes);

// Reduced-width variants; {0,0,0} means the standard filter counts
// ({128,256,128} for the FCN, {64,128,128} per residual block).
NetworkSpec build_fcn(std::size_t input_len, std::size_t classes, std::array<int, 3> filters);
NetworkSpec build_resnet(std::size_t input_len, std::size_t classes, std::array<int, 3> filters);

/// Glorot-uniform weights, zero biases, unit gammas, from a seeded engine.
ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed);

std::size_t parameter_count(const ParameterSet& params);

struct LayerCache {
    ops::BatchNormCache bn;
    Tensor dropout_mask;
    Tensor proj_conv_out;       // shortcut projection conv output (pre-batchnorm)
    ops::BatchNormCache proj_bn;
};

struct ForwardCache {
    Mode mode = Mode::infer;
    Tensor input;                 // network input after any reshape
    std::vector<Tensor> outputs;  // one per layer
    std::vector<LayerCache> aux;
};

/// Runs the network, returning logits [B,classes]. Train mode updates
/// batchnorm running statistics in place and consumes rng for dropout;
/// infer mode leaves params untouched and never reads rng.
Tensor forward(const NetworkSpec& spec, ParameterSet& params, const Tensor& input,
               Mode mode, Rng& rng, ForwardCache* cache = nullptr);

/// Backpropagates grad_logits through a train-mode cache. Returns gradients
/// keyed exactly like params.values.
SlotMap backward(const NetworkSpec& spec, const ParameterSet& params,
                 const ForwardCache& cache, const Tensor& grad_logits);

}  // namespace tsc
