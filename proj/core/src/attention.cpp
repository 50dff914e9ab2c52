#include "flocode/attention.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace flocode {

Tensor sinusoidal_embedding(int max_len, int d) {
    if (max_len < 1 || d < 1) throw std::invalid_argument("sinusoidal_embedding: non-positive size");
    std::vector<double> table(static_cast<size_t>(max_len) * static_cast<size_t>(d));
    for (int pos = 0; pos < max_len; ++pos) {
        for (int i = 0; i < d; ++i) {
            const double freq = std::pow(10000.0, -2.0 * (i / 2) / static_cast<double>(d));
            const double angle = pos * freq;
            table[static_cast<size_t>(pos) * d + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return Tensor::from_data({max_len, d}, std::move(table));
}

Tensor causal_mask(int len) {
    if (len < 1) throw std::invalid_argument("causal_mask: non-positive length");
    std::vector<double> m(static_cast<size_t>(len) * static_cast<size_t>(len), 0.0);
    for (int q = 0; q < len; ++q)
        for (int k = 0; k <= q; ++k) m[static_cast<size_t>(q) * len + k] = 1.0;
    return Tensor::from_data({len, len}, std::move(m));
}

Tensor causal_window_mask(const std::vector<int>& frames, int window) {
    if (window < 1) throw std::invalid_argument("causal_window_mask: window must be >= 1");
    const int len = static_cast<int>(frames.size());
    if (len < 1) throw std::invalid_argument("causal_window_mask: empty sequence");
    std::vector<double> m(static_cast<size_t>(len) * static_cast<size_t>(len), 0.0);
    for (int q = 0; q < len; ++q)
        for (int k = 0; k <= q; ++k)
            if (std::abs(frames[static_cast<size_t>(q)] - frames[static_cast<size_t>(k)]) <= window - 1)
                m[static_cast<size_t>(q) * len + k] = 1.0;
    return Tensor::from_data({len, len}, std::move(m));
}

Tensor window_mask(const std::vector<int>& query_frames,
                   const std::vector<int>& key_frames, int window) {
    if (window < 1) throw std::invalid_argument("window_mask: window must be >= 1");
    const int lq = static_cast<int>(query_frames.size());
    const int lk = static_cast<int>(key_frames.size());
    if (lq < 1 || lk < 1) throw std::invalid_argument("window_mask: empty sequence");
    std::vector<double> m(static_cast<size_t>(lq) * static_cast<size_t>(lk), 0.0);
    for (int q = 0; q < lq; ++q)
        for (int k = 0; k < lk; ++k)
            if (std::abs(query_frames[static_cast<size_t>(q)] - key_frames[static_cast<size_t>(k)]) <= window - 1)
                m[static_cast<size_t>(q) * lk + k] = 1.0;
    return Tensor::from_data({lq, lk}, std::move(m));
}

ad::VarPtr apply_dropout(const ad::VarPtr& x, const DropoutState& drop) {
    if (drop.rate == 0.0 || drop.rng == nullptr) return x;
    if (drop.rate < 0.0 || drop.rate >= 1.0)
        throw std::invalid_argument("apply_dropout: rate must be in [0, 1)");
    const double keep = 1.0 - drop.rate;
    std::vector<double> mask(static_cast<size_t>(x->value.numel()));
    for (auto& v : mask) v = (drop.rng->uniform() < keep) ? 1.0 / keep : 0.0;
    return ad::mul(x, ad::constant(Tensor::from_data(x->value.shape(), std::move(mask))));
}

void init_attention_params(ParamStore& store, Rng& rng, const std::string& prefix,
                           int model_dim) {
    for (const char* leaf : {"wq", "wk", "wv", "wo"})
        store.insert(prefix + "." + leaf, xavier_uniform(rng, model_dim, model_dim, {model_dim, model_dim}));
    // No key bias: a constant shift of every key cancels in the softmax, so
    // such a parameter would be untrainable dead weight.
    for (const char* leaf : {"bq", "bv", "bo"})
        store.insert(prefix + "." + leaf, Tensor::zeros({1, model_dim}));
}

namespace {

void init_layer_norm_params(ParamStore& store, const std::string& prefix, int model_dim) {
    store.insert(prefix + ".gain", Tensor::full({1, model_dim}, 1.0));
    store.insert(prefix + ".bias", Tensor::zeros({1, model_dim}));
}

void init_ffn_params(ParamStore& store, Rng& rng, const std::string& prefix,
                     int model_dim, int ffn_dim) {
    store.insert(prefix + ".w1", xavier_uniform(rng, model_dim, ffn_dim, {model_dim, ffn_dim}));
    store.insert(prefix + ".b1", Tensor::zeros({1, ffn_dim}));
    store.insert(prefix + ".w2", xavier_uniform(rng, ffn_dim, model_dim, {ffn_dim, model_dim}));
    store.insert(prefix + ".b2", Tensor::zeros({1, model_dim}));
}

ad::VarPtr feed_forward(ParamContext& ctx, const std::string& prefix, const ad::VarPtr& x) {
    auto hidden = ad::gelu(ad::add_rowvec(ad::matmul(x, ctx[prefix + ".w1"]), ctx[prefix + ".b1"]));
    return ad::add_rowvec(ad::matmul(hidden, ctx[prefix + ".w2"]), ctx[prefix + ".b2"]);
}

ad::VarPtr layer_norm_sub(ParamContext& ctx, const std::string& prefix, const ad::VarPtr& x) {
    return ad::layer_norm(x, ctx[prefix + ".gain"], ctx[prefix + ".bias"]);
}

void validate_mask(const Tensor& mask, int lq, int lk) {
    if (mask.ndim() != 2 || mask.dim(0) != lq || mask.dim(1) != lk)
        throw std::invalid_argument("multi_head_attention: mask shape mismatch");
    const double* m = mask.data();
    for (int q = 0; q < lq; ++q) {
        bool any = false;
        for (int k = 0; k < lk; ++k) any = any || (m[static_cast<size_t>(q) * lk + k] != 0.0);
        if (!any) throw std::invalid_argument("multi_head_attention: mask row fully blocked");
    }
}

}  // namespace

void init_encoder_layer_params(ParamStore& store, Rng& rng, const std::string& prefix,
                               int model_dim, int ffn_dim) {
    init_attention_params(store, rng, prefix + ".attn", model_dim);
    init_layer_norm_params(store, prefix + ".ln1", model_dim);
    init_ffn_params(store, rng, prefix + ".ffn", model_dim, ffn_dim);
    init_layer_norm_params(store, prefix + ".ln2", model_dim);
}

void init_decoder_layer_params(ParamStore& store, Rng& rng, const std::string& prefix,
                               int model_dim, int ffn_dim) {
    init_attention_params(store, rng, prefix + ".self", model_dim);
    init_layer_norm_params(store, prefix + ".ln1", model_dim);
    init_attention_params(store, rng, prefix + ".cross", model_dim);
    init_layer_norm_params(store, prefix + ".ln2", model_dim);
    init_ffn_params(store, rng, prefix + ".ffn", model_dim, ffn_dim);
    init_layer_norm_params(store, prefix + ".ln3", model_dim);
}

void init_linear_params(ParamStore& store, Rng& rng, const std::string& prefix,
                        int in_dim, int out_dim) {
    store.insert(prefix + ".w", xavier_uniform(rng, in_dim, out_dim, {in_dim, out_dim}));
    store.insert(prefix + ".b", Tensor::zeros({1, out_dim}));
}

ad::VarPtr linear(ParamContext& ctx, const std::string& prefix, const ad::VarPtr& x) {
    return ad::add_rowvec(ad::matmul(x, ctx[prefix + ".w"]), ctx[prefix + ".b"]);
}

ad::VarPtr multi_head_attention(ParamContext& ctx, const std::string& prefix,
                                const ad::VarPtr& queries, const ad::VarPtr& keys_values,
                                const Tensor& mask, int heads,
                                const AttentionHook& hook) {
    const int lq = queries->value.dim(0);
    const int lk = keys_values->value.dim(0);
    const int d = queries->value.dim(1);
    if (keys_values->value.dim(1) != d)
        throw std::invalid_argument("multi_head_attention: query/key dim mismatch");
    if (heads < 1 || d % heads != 0)
        throw std::invalid_argument("multi_head_attention: model dim not divisible by heads");
    validate_mask(mask, lq, lk);
    const int dk = d / heads;

    auto q = ad::add_rowvec(ad::matmul(queries, ctx[prefix + ".wq"]), ctx[prefix + ".bq"]);
    auto k = ad::matmul(keys_values, ctx[prefix + ".wk"]);
    auto v = ad::add_rowvec(ad::matmul(keys_values, ctx[prefix + ".wv"]), ctx[prefix + ".bv"]);

    ad::VarPtr merged;
    for (int h = 0; h < heads; ++h) {
        auto qh = ad::slice_cols(q, h * dk, dk);
        auto kh = ad::slice_cols(k, h * dk, dk);
        auto vh = ad::slice_cols(v, h * dk, dk);
        auto scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dk)));
        auto weights = ad::softmax_rows(ad::masked_fill(scores, mask));
        if (hook) {
            weights = hook(weights, h);
            if (!weights || weights->value.dim(0) != lq || weights->value.dim(1) != lk)
                throw std::invalid_argument("multi_head_attention: hook changed weight shape");
        }
        auto head_out = ad::matmul(weights, vh);
        merged = merged ? ad::concat_cols(merged, head_out) : head_out;
    }
    return ad::add_rowvec(ad::matmul(merged, ctx[prefix + ".wo"]), ctx[prefix + ".bo"]);
}

ad::VarPtr encoder_layer(ParamContext& ctx, const std::string& prefix, const ad::VarPtr& x,
                         const Tensor& mask, int heads, const DropoutState& drop,
                         const AttentionHook& hook) {
    auto attn = multi_head_attention(ctx, prefix + ".attn", x, x, mask, heads, hook);
    auto normed = layer_norm_sub(ctx, prefix + ".ln1", ad::add(x, apply_dropout(attn, drop)));
    auto ffn = feed_forward(ctx, prefix + ".ffn", normed);
    return layer_norm_sub(ctx, prefix + ".ln2", ad::add(normed, apply_dropout(ffn, drop)));
}

ad::VarPtr decoder_layer(ParamContext& ctx, const std::string& prefix, const ad::VarPtr& x,
                         const ad::VarPtr& memory, const Tensor& self_mask,
                         const Tensor& cross_mask, int heads, const DropoutState& drop,
                         const AttentionHook& cross_hook) {
    auto self_attn = multi_head_attention(ctx, prefix + ".self", x, x, self_mask, heads);
    auto h1 = layer_norm_sub(ctx, prefix + ".ln1", ad::add(x, apply_dropout(self_attn, drop)));
    auto cross = multi_head_attention(ctx, prefix + ".cross", h1, memory, cross_mask, heads, cross_hook);
    auto h2 = layer_norm_sub(ctx, prefix + ".ln2", ad::add(h1, apply_dropout(cross, drop)));
    auto ffn = feed_forward(ctx, prefix + ".ffn", h2);
    return layer_norm_sub(ctx, prefix + ".ln3", ad::add(h2, apply_dropout(ffn, drop)));
}

}  // namespace flocode
