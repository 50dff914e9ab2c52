#include "flocode/mln.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "flocode/tensor_ops.hpp"

namespace flocode {

void validate(const MlnConfig& cfg) {
    if (cfg.mixtures < 1) throw std::invalid_argument("MlnConfig: mixtures must be >= 1");
    if (cfg.num_classes < 1) throw std::invalid_argument("MlnConfig: num_classes must be >= 1");
    if (cfg.embed_dim < 1) throw std::invalid_argument("MlnConfig: embed_dim must be >= 1");
}

void validate(const KmclConfig& cfg) {
    if (!(cfg.tau > 0.0)) throw std::invalid_argument("KmclConfig: tau must be positive");
    if (cfg.overlap != "jaccard")
        throw std::invalid_argument("KmclConfig: unknown overlap scheme '" + cfg.overlap + "'");
}

void init_mln_params(ParamStore& store, Rng& rng, const std::string& prefix,
                     const MlnConfig& cfg) {
    validate(cfg);
    init_linear_params(store, rng, prefix + ".mu", cfg.embed_dim, cfg.mixtures * cfg.num_classes);
    init_linear_params(store, rng, prefix + ".sigma", cfg.embed_dim, cfg.mixtures * cfg.num_classes);
    init_linear_params(store, rng, prefix + ".pi", cfg.embed_dim, cfg.mixtures);
}

MixtureParams mixture_heads(ParamContext& ctx, const std::string& prefix,
                            const MlnConfig& cfg, const ad::VarPtr& z) {
    validate(cfg);
    if (z->value.ndim() != 2 || z->value.dim(0) != 1 || z->value.dim(1) != cfg.embed_dim)
        throw std::invalid_argument("mixture_heads: embedding must be [1, embed_dim]");
    MixtureParams mp;
    mp.mu = ad::reshape(linear(ctx, prefix + ".mu", z), {cfg.mixtures, cfg.num_classes});
    mp.sigma = ad::sigmoid(ad::reshape(linear(ctx, prefix + ".sigma", z),
                                       {cfg.mixtures, cfg.num_classes}));
    mp.pi = ad::softmax_rows(linear(ctx, prefix + ".pi", z));
    return mp;
}

MixtureParams mixture_from_values(const Tensor& mu, const Tensor& sigma, const Tensor& pi) {
    if (mu.ndim() != 2 || sigma.ndim() != 2 || mu.shape() != sigma.shape())
        throw std::invalid_argument("mixture_from_values: mu and sigma must be [K, C]");
    const int k = mu.dim(0);
    if (pi.ndim() != 2 || pi.dim(0) != 1 || pi.dim(1) != k)
        throw std::invalid_argument("mixture_from_values: pi must be [1, K]");
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        if (!(pi(0, i) > 0.0)) throw std::invalid_argument("mixture_from_values: pi entries must be positive");
        total += pi(0, i);
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("mixture_from_values: pi must sum to 1");
    for (int i = 0; i < sigma.numel(); ++i)
        if (!(sigma.data()[i] > 0.0 && sigma.data()[i] < 1.0))
            throw std::invalid_argument("mixture_from_values: sigma entries must lie in (0, 1)");
    return {ad::constant(mu), ad::constant(sigma), ad::constant(pi)};
}

ad::VarPtr epistemic(const MixtureParams& mp) {
    auto mean = ad::matmul(mp.pi, mp.mu);                    // [1, C]
    auto dev = ad::add_rowvec(mp.mu, ad::neg(mean));         // [K, C]
    return ad::sum(ad::matmul(mp.pi, ad::square(dev)));      // [1, 1]
}

ad::VarPtr aleatoric(const MixtureParams& mp) {
    return ad::sum(ad::matmul(mp.pi, mp.sigma));
}

namespace {

Tensor multi_hot(const std::vector<int>& labels, int rows, int num_classes) {
    std::vector<double> y(static_cast<size_t>(rows) * static_cast<size_t>(num_classes), 0.0);
    for (int p : labels) {
        if (p < 0 || p >= num_classes) throw std::invalid_argument("label index out of range");
        for (int r = 0; r < rows; ++r) y[static_cast<size_t>(r) * num_classes + p] = 1.0;
    }
    return Tensor::from_data({rows, num_classes}, std::move(y));
}

}  // namespace

ad::VarPtr mal_loss(const std::vector<MixtureParams>& batch,
                    const std::vector<std::vector<int>>& labels, int num_classes) {
    if (batch.empty()) throw std::invalid_argument("mal_loss: empty batch");
    if (labels.size() != batch.size())
        throw std::invalid_argument("mal_loss: one label set per sample required");
    std::vector<ad::VarPtr> per_sample;
    per_sample.reserve(batch.size());
    for (size_t n = 0; n < batch.size(); ++n) {
        const auto& mp = batch[n];
        const int k = mp.mu->value.dim(0);
        if (mp.mu->value.dim(1) != num_classes)
            throw std::invalid_argument("mal_loss: class count mismatch");
        Tensor y = multi_hot(labels[n], k, num_classes);
        auto prob = ad::clamp(ad::sigmoid(mp.mu), 1e-12, 1.0 - 1e-12);
        auto bce = ad::neg(ad::add(ad::mul(ad::constant(y), ad::log(prob)),
                                   ad::mul(ad::constant(ops::add_scalar(ops::neg(y), 1.0)),
                                           ad::log(ad::add_scalar(ad::neg(prob), 1.0)))));
        per_sample.push_back(ad::sum(ad::matmul(mp.pi, ad::div(bce, mp.sigma))));
    }
    return ad::scale(ad::add_many(per_sample), 1.0 / static_cast<double>(batch.size()));
}

ad::VarPtr kernel_similarity(const MixtureParams& a, const MixtureParams& b, int class_p) {
    const int k = a.mu->value.dim(0);
    if (b.mu->value.dim(0) != k || a.mu->value.dim(1) != b.mu->value.dim(1))
        throw std::invalid_argument("kernel_similarity: mixture shapes differ");
    if (class_p < 0 || class_p >= a.mu->value.dim(1))
        throw std::invalid_argument("kernel_similarity: class index out of range");
    for (int i = 0; i < k; ++i)
        if (!(a.sigma->value(i, class_p) > 0.0) || !(b.sigma->value(i, class_p) > 0.0))
            throw std::invalid_argument("kernel_similarity: zero variance");

    auto sn = ad::slice_cols(a.sigma, class_p, 1);  // [K, 1]
    auto si = ad::slice_cols(b.sigma, class_p, 1);
    auto mn = ad::slice_cols(a.mu, class_p, 1);
    auto mi = ad::slice_cols(b.mu, class_p, 1);

    auto var_sum = ad::add(ad::square(sn), ad::square(si));
    // Product over mixtures via a log-sum: ratio >= 1 always, so safe.
    auto ratio = ad::div(var_sum, ad::scale(ad::mul(sn, si), 2.0));
    auto agreement = ad::exp(ad::scale(ad::sum(ad::log(ratio)), -0.5));
    auto overlap = ad::exp(ad::scale(ad::sum(ad::div(ad::square(ad::sub(mn, mi)), var_sum)), -0.25));
    return ad::mul(agreement, overlap);
}

namespace {

std::vector<int> shared_labels(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    for (int p : a)
        if (std::count(b.begin(), b.end(), p) && !std::count(out.begin(), out.end(), p))
            out.push_back(p);
    return out;
}

double jaccard(const std::vector<int>& a, const std::vector<int>& b) {
    std::set<int> uni(a.begin(), a.end());
    uni.insert(b.begin(), b.end());
    if (uni.empty()) return 0.0;
    return static_cast<double>(shared_labels(a, b).size()) / static_cast<double>(uni.size());
}

}  // namespace

ad::VarPtr kmcl_loss(const std::vector<MixtureParams>& batch,
                     const std::vector<std::vector<int>>& labels, int num_classes,
                     const KmclConfig& cfg) {
    validate(cfg);
    const int n_samples = static_cast<int>(batch.size());
    if (n_samples < 2) throw std::invalid_argument("kmcl_loss: batch must hold at least 2 samples");
    if (labels.size() != batch.size())
        throw std::invalid_argument("kmcl_loss: one label set per sample required");
    for (const auto& set : labels)
        for (int p : set)
            if (p < 0 || p >= num_classes) throw std::invalid_argument("kmcl_loss: label out of range");

    // Similarities are symmetric; memoize on (low, high, class).
    std::map<std::tuple<int, int, int>, ad::VarPtr> rho;
    auto rho_at = [&](int a, int b, int p) {
        auto key = std::make_tuple(std::min(a, b), std::max(a, b), p);
        auto it = rho.find(key);
        if (it == rho.end())
            it = rho.emplace(key, kernel_similarity(batch[static_cast<size_t>(a)],
                                                    batch[static_cast<size_t>(b)], p)).first;
        return it->second;
    };

    std::vector<ad::VarPtr> anchor_terms;
    for (int n = 0; n < n_samples; ++n) {
        std::vector<int> positives;
        for (int m = 0; m < n_samples; ++m)
            if (m != n && !shared_labels(labels[static_cast<size_t>(n)], labels[static_cast<size_t>(m)]).empty())
                positives.push_back(m);
        if (positives.empty()) continue;

        // Denominators depend only on (anchor, class); build each once.
        std::map<int, ad::VarPtr> log_denominator;
        std::vector<ad::VarPtr> pair_terms;
        for (int m : positives) {
            const auto shared = shared_labels(labels[static_cast<size_t>(n)], labels[static_cast<size_t>(m)]);
            const double weight = jaccard(labels[static_cast<size_t>(n)], labels[static_cast<size_t>(m)]);
            std::vector<ad::VarPtr> label_terms;
            for (int p : shared) {
                auto denom_it = log_denominator.find(p);
                if (denom_it == log_denominator.end()) {
                    std::vector<ad::VarPtr> exps;
                    for (int i = 0; i < n_samples; ++i)
                        if (i != n) exps.push_back(ad::exp(ad::scale(rho_at(n, i, p), 1.0 / cfg.tau)));
                    denom_it = log_denominator.emplace(p, ad::log(ad::add_many(exps))).first;
                }
                label_terms.push_back(ad::sub(ad::scale(rho_at(n, m, p), 1.0 / cfg.tau),
                                              denom_it->second));
            }
            pair_terms.push_back(ad::scale(ad::add_many(label_terms), weight));
        }
        anchor_terms.push_back(ad::scale(ad::add_many(pair_terms),
                                         -1.0 / static_cast<double>(positives.size())));
    }
    if (anchor_terms.empty()) return ad::constant(Tensor::from_data({1, 1}, {0.0}));
    return ad::scale(ad::add_many(anchor_terms), 1.0 / static_cast<double>(n_samples));
}

Tensor predict_scores(const MixtureParams& mp) {
    const Tensor& mu = mp.mu->value;
    const Tensor& sigma = mp.sigma->value;
    const Tensor& pi = mp.pi->value;
    const int k = mu.dim(0), c = mu.dim(1);
    std::vector<double> scores(static_cast<size_t>(c), 0.0);
    for (int p = 0; p < c; ++p)
        for (int i = 0; i < k; ++i)
            scores[static_cast<size_t>(p)] += pi(0, i) * mu(i, p) / sigma(i, p);
    return Tensor::from_data({c}, std::move(scores));
}

}  // namespace flocode
