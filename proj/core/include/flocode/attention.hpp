#pragma once

#include <functional>
#include <string>
#include <vector>

#include "flocode/autodiff.hpp"
#include "flocode/params.hpp"
#include "flocode/rng.hpp"
#include "flocode/tensor.hpp"

namespace flocode {

/// Fixed sinusoidal position table [max_len, d]: even columns sin, odd
/// columns cos, angular frequency 10000^(-2i/d).
Tensor sinusoidal_embedding(int max_len, int d);

// Attention masks: shape [Lq, Lk], 1 = may attend, 0 = blocked. Blocked
// cells receive a large negative additive constant before the softmax, so
// they come out exactly zero and perturbations behind the mask cannot leak.

/// Token-index causal mask: position q attends to positions k <= q.
Tensor causal_mask(int len);

/// Causal mask further restricted to a frame window: k <= q and
/// |frames[q] - frames[k]| <= window - 1.
Tensor causal_window_mask(const std::vector<int>& frames, int window);

/// Symmetric frame-window mask for cross-attention:
/// |query_frames[q] - key_frames[k]| <= window - 1.
Tensor window_mask(const std::vector<int>& query_frames,
                   const std::vector<int>& key_frames, int window);

/// Inverted dropout. Identity when rate == 0 or rng == nullptr, so
/// deterministic paths never consume random numbers.
struct DropoutState {
    double rate = 0.0;
    Rng* rng = nullptr;
};
ad::VarPtr apply_dropout(const ad::VarPtr& x, const DropoutState& drop);

/// Observes or rewrites one head's post-softmax attention rows [Lq, Lk].
/// Returning the input unchanged makes the hook a pure observer.
using AttentionHook = std::function<ad::VarPtr(const ad::VarPtr& rows, int head)>;

// Parameter registration. Layer forward functions read dimensions back from
// the stored tensors, so the prefix is the single source of truth.
void init_attention_params(ParamStore& store, Rng& rng, const std::string& prefix,
                           int model_dim);
void init_encoder_layer_params(ParamStore& store, Rng& rng, const std::string& prefix,
                               int model_dim, int ffn_dim);
void init_decoder_layer_params(ParamStore& store, Rng& rng, const std::string& prefix,
                               int model_dim, int ffn_dim);
void init_linear_params(ParamStore& store, Rng& rng, const std::string& prefix,
                        int in_dim, int out_dim);

/// y = x W + b with W = prefix.w [in,out], b = prefix.b [1,out].
ad::VarPtr linear(ParamContext& ctx, const std::string& prefix, const ad::VarPtr& x);

/// Scaled dot-product multi-head attention. queries [Lq,d], keys_values
/// [Lk,d], mask [Lq,Lk] with every row containing at least one 1.
ad::VarPtr multi_head_attention(ParamContext& ctx, const std::string& prefix,
                                const ad::VarPtr& queries, const ad::VarPtr& keys_values,
                                const Tensor& mask, int heads,
                                const AttentionHook& hook = nullptr);

/// Post-norm transformer encoder layer:
/// x -> masked MHA -> +res -> LN -> FFN (GELU) -> +res -> LN.
ad::VarPtr encoder_layer(ParamContext& ctx, const std::string& prefix, const ad::VarPtr& x,
                         const Tensor& mask, int heads, const DropoutState& drop = {},
                         const AttentionHook& hook = nullptr);

/// Post-norm transformer decoder layer: masked self-attention, then
/// cross-attention over memory (hook applies to the cross weights), then FFN.
ad::VarPtr decoder_layer(ParamContext& ctx, const std::string& prefix, const ad::VarPtr& x,
                         const ad::VarPtr& memory, const Tensor& self_mask,
                         const Tensor& cross_mask, int heads, const DropoutState& drop = {},
                         const AttentionHook& cross_hook = nullptr);

}  // namespace flocode
