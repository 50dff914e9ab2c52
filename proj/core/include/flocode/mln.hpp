#pragma once

#include <string>
#include <vector>

#include "flocode/attention.hpp"
#include "flocode/params.hpp"

namespace flocode {

/// Per-sample Gaussian-mixture logit parameters over the predicate classes:
/// one (mean, variance) pair per mixture and class, plus mixture weights
/// shared across classes.
struct MixtureParams {
    ad::VarPtr mu;     // [K, C] unbounded means
    ad::VarPtr sigma;  // [K, C] variances in (0, 1)
    ad::VarPtr pi;     // [1, K] positive, sums to 1
};

struct MlnConfig {
    int mixtures = 6;     // K
    int num_classes = 26; // C
    int embed_dim = 66;   // width of the predicate embedding z
};
void validate(const MlnConfig& cfg);

struct KmclConfig {
    double tau = 0.1;               // contrastive temperature
    std::string overlap = "jaccard";  // positive-pair weighting scheme
};
void validate(const KmclConfig& cfg);

void init_mln_params(ParamStore& store, Rng& rng, const std::string& prefix,
                     const MlnConfig& cfg);

/// Three projections of one embedding row z [1, embed_dim]: means stay raw,
/// variances pass through a sigmoid, weights through a softmax over mixtures.
MixtureParams mixture_heads(ParamContext& ctx, const std::string& prefix,
                            const MlnConfig& cfg, const ad::VarPtr& z);

/// Constructs MixtureParams from fixed tensors, validating the invariants.
/// Intended for tests and closed-form checks.
MixtureParams mixture_from_values(const Tensor& mu, const Tensor& sigma, const Tensor& pi);

/// Spread of the mixture means around their weighted average, summed over
/// classes. Zero iff every class's means coincide.
ad::VarPtr epistemic(const MixtureParams& mp);

/// Weighted average of the mixture variances, summed over classes.
ad::VarPtr aleatoric(const MixtureParams& mp);

/// Mean over the batch of the variance-attenuated sigmoidal cross-entropy:
/// each mixture's BCE against the multi-hot labels is divided by its
/// predicted variance and weighted by pi. Probabilities are clamped to
/// [1e-12, 1 - 1e-12] before the logs.
ad::VarPtr mal_loss(const std::vector<MixtureParams>& batch,
                    const std::vector<std::vector<int>>& labels, int num_classes);

/// Bhattacharyya-style similarity of two samples' mixtures for one class:
/// product over mixtures of a variance-agreement factor times a Gaussian
/// overlap of the means. Always in (0, 1], 1 iff identical parameters.
ad::VarPtr kernel_similarity(const MixtureParams& a, const MixtureParams& b, int class_p);

/// Multi-label contrastive loss over the batch: anchors pull samples that
/// share labels together, weighting positives by label-set overlap,
/// normalizing each anchor by its positive count and the whole sum by the
/// batch size. Anchors with no positives contribute zero. Batch must have
/// at least two samples.
ad::VarPtr kmcl_loss(const std::vector<MixtureParams>& batch,
                     const std::vector<std::vector<int>>& labels, int num_classes,
                     const KmclConfig& cfg);

/// Inference scores per class: pi-weighted mean of mu / sigma, so a mixture
/// with high predicted variance contributes less.
Tensor predict_scores(const MixtureParams& mp);

}  // namespace flocode
