#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prbgan/autodiff.hpp"
#include "prbgan/rng.hpp"
#include "prbgan/tensor.hpp"

namespace prbgan::nn {

enum class Activation { leaky_relu, sigmoid, linear };

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::linear;
    double slope = 0.2;    // leaky_relu only, must lie in (0,1)
    bool maskable = false; // unit dropout on this layer's outputs
};

// Throws ConfigError if dims are zero, the chain does not connect, or a
// leaky slope is outside (0,1).
void validate(const std::vector<LayerSpec>& spec);

// The variational parameters W of one network: per-layer weight [in x out]
// and bias [out], held as autodiff leaves so gradients accumulate across
// the MC samples of a training step.
struct Mlp {
    std::vector<LayerSpec> spec;
    std::vector<autodiff::NodePtr> weights;
    std::vector<autodiff::NodePtr> biases;

    std::size_t num_layers() const { return spec.size(); }
    std::size_t in_dim() const { return spec.front().in_dim; }
    std::size_t out_dim() const { return spec.back().out_dim; }

    // w0, b0, w1, b1, ... — the canonical parameter order used everywhere
    // (optimizer state, checkpoints, gradient collection).
    std::vector<autodiff::NodePtr> parameters() const;
    void zero_grads();

    // Deep copy whose leaves do not require gradients; used as the frozen
    // opponent network inside a training step.
    Mlp clone_frozen() const;
};

// Weights uniform in +-sqrt(6/(in+out)), biases zero. Deterministic per seed.
Mlp xavier_init(const std::vector<LayerSpec>& spec, std::uint64_t seed);

// One Bernoulli keep/drop vector per layer; an empty tensor stands for the
// implicit all-ones mask of a non-maskable layer. A mask set is one sampled
// network from the dropout variational family.
struct DropoutMaskSet {
    std::vector<Tensor> unit_masks;

    static DropoutMaskSet all_ones(const std::vector<LayerSpec>& spec);
    bool layer_masked(std::size_t layer) const { return !unit_masks[layer].empty(); }
};

// Each maskable unit kept independently with probability 1-p. p in [0,1);
// an all-drop network is degenerate and rejected.
DropoutMaskSet sample_mask_set(const std::vector<LayerSpec>& spec, double p, rng::Stream& rng);
// Per-layer drop probabilities (one entry per layer; entries for
// non-maskable layers are ignored).
DropoutMaskSet sample_mask_set(const std::vector<LayerSpec>& spec,
                               std::span<const double> p_per_layer, rng::Stream& rng);

// Graph forward through every layer; element i of the result is the
// (masked) activation of layer i, the last being the network output
// (raw logits, no output nonlinearity beyond the layer's own activation).
std::vector<autodiff::NodePtr> forward_layers(const Mlp& params, const DropoutMaskSet& masks,
                                              const autodiff::NodePtr& input);
autodiff::NodePtr forward(const Mlp& params, const DropoutMaskSet& masks,
                          const autodiff::NodePtr& input);

// Same arithmetic without graph bookkeeping, for networks that are frozen
// within a step. Matches the graph forward bitwise.
std::vector<Tensor> forward_layers_value(const Mlp& params, const DropoutMaskSet& masks,
                                         const Tensor& input);
Tensor forward_value(const Mlp& params, const DropoutMaskSet& masks, const Tensor& input);

enum class OptKind { sgd, adam };

struct OptimizerState {
    OptKind kind = OptKind::adam;
    double learning_rate = 2e-4;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<Tensor> m; // adam first moments, aligned with the parameter list
    std::vector<Tensor> v; // adam second moments
    long step_count = 0;

    static OptimizerState sgd(double lr, double weight_decay = 0.0);
    static OptimizerState adam(double lr, double weight_decay = 0.0, double beta1 = 0.9,
                               double beta2 = 0.999, double eps = 1e-8);
    void validate() const;
};

// One descent step on (loss + weight_decay * ||W||^2); adam uses
// bias-corrected moments. A non-finite gradient aborts the whole step with
// NumericError before any parameter or moment changes.
void apply_update(std::span<const autodiff::NodePtr> params, const std::vector<Tensor>& grads,
                  OptimizerState& opt);
void apply_update(Mlp& params, const std::vector<Tensor>& grads, OptimizerState& opt);

// --- checkpoint file ------------------------------------------------------
// Binary format: 8-byte magic "PRBGAN01", then per tensor: u32 rank,
// u64 extents, raw little-endian float64 payload. Tensors run to EOF.
void save_checkpoint(const std::string& path, const std::vector<Tensor>& tensors);
std::vector<Tensor> load_checkpoint(const std::string& path);

// Parameter convenience wrappers in canonical order; load shape-checks
// against the Mlp's spec.
void save_params(const std::string& path, const Mlp& params);
void load_params(const std::string& path, Mlp& params);

} // namespace prbgan::nn
