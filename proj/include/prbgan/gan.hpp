#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prbgan/nn.hpp"
#include "prbgan/rng.hpp"
#include "prbgan/synthdata.hpp"
#include "prbgan/tensor.hpp"

namespace prbgan::gan {

enum class Variant { vanilla_ns, vanilla_ls, prb, prb_v1, prb_v2, swgan, prb_swgan };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct GanConfig {
    double p = 0.4;       // drop probability
    int n_mc = 20;        // MC samples N per training step
    int batch = 64;       // B
    int latent_dim = 1;
    double b1 = 0.3;       // uncertainty bias of the weighted score
    double b2 = 0.3;       // variance-reward bias
    double lambda_var = 1.0;
    Variant variant = Variant::prb;
    int n_projections = 16; // |Omega| for sliced variants
    int m_slice = 4;        // M mask samples for prb_swgan

    nn::OptKind opt_kind = nn::OptKind::adam;
    double learning_rate = 2e-4;
    double weight_decay = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    synthdata::LatentPrior latent_prior = synthdata::LatentPrior::uniform;
    std::uint64_t seed = 1;
    std::vector<double> p_per_layer; // optional per-layer override, empty = uniform p

    // Fixed affine standardization of the data coordinates: the networks see
    // (x - shift) / scale and the generator's outputs map back through the
    // inverse. Empty = identity. The experiment runner fills these from the
    // mixture's analytic moments so raw-scale data does not park every
    // first-layer hinge outside the support.
    std::vector<double> data_shift;
    std::vector<double> data_scale;

    void validate() const;

    // Which networks carry dropout under each variant.
    bool gen_uses_dropout() const { return variant == Variant::prb; }
    bool disc_uses_dropout() const {
        return variant == Variant::prb || variant == Variant::prb_v1 ||
               variant == Variant::prb_v2 || variant == Variant::prb_swgan;
    }
    bool has_uncertainty_head() const {
        return variant == Variant::prb_v1 || variant == Variant::prb_v2;
    }
    bool is_sliced() const { return variant == Variant::swgan || variant == Variant::prb_swgan; }
};

// Architecture of the two MLPs: in -> hidden x hidden_layers (leaky relu,
// maskable) -> out (linear).
struct NetSpec {
    std::size_t data_dim = 1;
    std::size_t hidden = 600;
    std::size_t hidden_layers = 3; // 4 fully connected layers total
    double leaky_slope = 0.2;
};

std::vector<nn::LayerSpec> generator_layers(const NetSpec& net, std::size_t latent_dim);
std::vector<nn::LayerSpec> discriminator_layers(const NetSpec& net);

// One discriminator evaluation on a batch: per-row logit, optional per-row
// nonnegative uncertainty (softplus head off the penultimate layer), and
// the penultimate features used by the sliced objectives.
struct DiscOutput {
    autodiff::NodePtr logit;       // [B x 1]
    autodiff::NodePtr uncertainty; // [B x 1], null when the head is absent
    autodiff::NodePtr features;    // [B x F]
};

struct StepReport {
    double disc_loss = 0.0;
    double gen_loss = 0.0;
    double mean_logit_real = 0.0;
    double mean_logit_fake = 0.0;
    double score_set_variance = 0.0;
    double uncertainty_mean = 0.0;
    double grad_norm_disc = 0.0;
    double grad_norm_gen = 0.0;
};

// Both networks plus optimizer state. The discriminator's optimizer covers
// the logit chain and (when present) the uncertainty head.
struct GanModel {
    GanConfig cfg;
    nn::Mlp gen;
    nn::Mlp disc;
    nn::Mlp u_head; // single linear layer, empty unless the variant uses it
    nn::OptimizerState gen_opt;
    nn::OptimizerState disc_opt;

    static GanModel build(const GanConfig& cfg, const NetSpec& net);
    bool has_u_head() const { return !u_head.spec.empty(); }
};

// Evaluates the discriminator (graph form). u_head may be null.
DiscOutput disc_forward(const nn::Mlp& disc, const nn::Mlp* u_head,
                        const nn::DropoutMaskSet& masks, const autodiff::NodePtr& input);

// logit / (uncertainty + b1); softens confident scores as uncertainty grows.
autodiff::NodePtr weighted_logit(const autodiff::NodePtr& logit,
                                 const autodiff::NodePtr& uncertainty, double b1);

// Per-MC-sample losses (minimized): the negated paper objectives. The
// discriminator loss is BCE over the 2B scored rows (squared error for the
// LS variant, weighted scores plus uncertainty penalty for v1/v2); the
// generator loss is the non-saturating BCE towards 1.
autodiff::NodePtr disc_sample_loss(const DiscOutput& real, const DiscOutput& fake,
                                   const GanConfig& cfg);
autodiff::NodePtr gen_sample_loss(const DiscOutput& fake, const GanConfig& cfg);

// Mean over the N sampled discriminators of [BCE of weighted logits against
// (real -> 1, fake -> 0) plus the mean uncertainty penalty over the scored
// rows]. Lists must have length cfg.n_mc.
autodiff::NodePtr disc_loss_v1(const std::vector<DiscOutput>& outputs_real,
                               const std::vector<DiscOutput>& outputs_fake,
                               const GanConfig& cfg);

// (1/N) sum of BCE(weighted logits -> 1) minus the variance reward
// lambda * var_n / (mean_n^2 + b2), statistics taken across the N sampled
// discriminators per generated point and averaged over the batch. Outputs
// without an uncertainty head use raw logits throughout.
autodiff::NodePtr gen_loss_v2(const std::vector<DiscOutput>& fake_outputs, const GanConfig& cfg);

// Sliced 2-Wasserstein discrepancy between two feature sets: project both
// onto each unit column of projections, sort, pair order statistics, mean
// the squared gaps over all n*k pairs.
autodiff::NodePtr sliced_w_node(const autodiff::NodePtr& features_real,
                                const autodiff::NodePtr& features_fake,
                                const Tensor& projections);
double sliced_w_distance(const Tensor& features_real, const Tensor& features_fake,
                         const Tensor& projections, int* non_unit_warnings = nullptr);

// [d x k] projections with i.i.d. Gaussian entries normalized to unit
// columns; resampled every step by the sliced training paths.
Tensor sample_projections(std::size_t dim, std::size_t k, rng::Stream& rng);

// Mean of sliced_w_distance over cfg.m_slice mask-sampled discriminator
// feature maps; each mask set is applied to the real and fake batches
// alike. Streams derive from `seed` via stream_tag, so single samples can
// be replayed.
double prb_sliced_w_distance(const GanModel& model, const Tensor& batch_real,
                             std::uint64_t seed);

// Stream-derivation tags; public so tests can replay any single MC sample.
namespace stream_tag {
inline constexpr std::uint64_t noise = 1;
inline constexpr std::uint64_t gen_mask = 2;
inline constexpr std::uint64_t disc_mask = 3;
inline constexpr std::uint64_t projections = 4;
inline constexpr std::uint64_t real_batch = 5;
inline constexpr std::uint64_t eval_noise = 6;
inline constexpr std::uint64_t eval_mask = 7;
inline constexpr std::uint64_t gen_init = 8;
inline constexpr std::uint64_t disc_init = 9;
inline constexpr std::uint64_t disc_phase = 10;
inline constexpr std::uint64_t gen_phase = 11;
inline constexpr std::uint64_t u_head_init = 12;
inline constexpr std::uint64_t real_ref = 13;
} // namespace stream_tag

// One discriminator update: one generator mask set, N fresh discriminator
// mask sets, per-sample loss backward accumulation, single optimizer step
// on the gradient mean. Generator parameters are untouched.
StepReport disc_step(GanModel& model, const Tensor& batch_real, std::uint64_t step_index,
                     std::uint64_t substep = 0);

// Mirror image: one frozen discriminator, N generator samples (or, for the
// uncertainty variants and sliced variants, N or M discriminator samples
// against one deterministic generator). batch_real feeds the sliced
// objectives only. The noise batch is shared with the disc_step of the same
// (step_index, substep), mirroring the single per-iteration draw of the
// training algorithm.
StepReport gen_step(GanModel& model, const Tensor& batch_real, std::uint64_t step_index,
                    std::uint64_t substep = 0);

// Posterior-predictive generation: z ~ latent prior, one mask set per chunk
// of cfg.batch rows (MC sampling, never weight averaging). Samples come back
// in raw data coordinates.
Tensor generate(const GanModel& model, std::size_t n, std::uint64_t seed);

// The standardization maps (identity when the config leaves them empty).
Tensor to_net_space(const GanConfig& cfg, const Tensor& data);
Tensor to_data_space(const GanConfig& cfg, const Tensor& net_out);

} // namespace prbgan::gan
