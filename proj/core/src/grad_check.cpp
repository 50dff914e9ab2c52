#include "flocode/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flocode {

namespace {

double eval_objective(ParamStore& store,
                      const std::function<ad::VarPtr(ParamContext&)>& build) {
    ParamContext ctx(store);
    ad::VarPtr out = build(ctx);
    if (out->value.numel() != 1)
        throw std::invalid_argument("check_gradients: objective must be scalar");
    const double v = out->value.item();
    if (!std::isfinite(v))
        throw std::runtime_error("check_gradients: non-finite objective value");
    return v;
}

}  // namespace

GradReport check_gradients(ParamStore& store,
                           const std::function<ad::VarPtr(ParamContext&)>& build,
                           double eps, int max_probes_per_param, Rng* probe_rng,
                           const std::string& param_prefix) {
    if (eps <= 0.0) throw std::invalid_argument("check_gradients: eps must be positive");

    ParamContext base_ctx(store);
    ad::VarPtr objective = build(base_ctx);
    if (objective->value.numel() != 1)
        throw std::invalid_argument("check_gradients: objective must be scalar");
    ad::backward(objective);
    const std::map<std::string, Tensor> analytic = base_ctx.grads();

    GradReport report;
    for (const auto& [name, grad] : analytic) {
        if (!param_prefix.empty() && name.rfind(param_prefix, 0) != 0) continue;
        const Tensor& value = store.get(name);
        const int n = value.numel();

        std::vector<int> probe_indices;
        if (max_probes_per_param < 0 || max_probes_per_param >= n) {
            probe_indices.resize(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) probe_indices[static_cast<size_t>(i)] = i;
        } else {
            if (probe_rng == nullptr)
                throw std::invalid_argument("check_gradients: sampled probes need an rng");
            for (int i = 0; i < max_probes_per_param; ++i)
                probe_indices.push_back(probe_rng->uniform_int(0, n - 1));
            std::sort(probe_indices.begin(), probe_indices.end());
            probe_indices.erase(std::unique(probe_indices.begin(), probe_indices.end()),
                                probe_indices.end());
        }

        for (int idx : probe_indices) {
            std::vector<double> bumped(value.data(), value.data() + n);
            const double original = bumped[static_cast<size_t>(idx)];

            bumped[static_cast<size_t>(idx)] = original + eps;
            store.set(name, Tensor::from_data(value.shape(), bumped));
            const double f_plus = eval_objective(store, build);

            bumped[static_cast<size_t>(idx)] = original - eps;
            store.set(name, Tensor::from_data(value.shape(), bumped));
            const double f_minus = eval_objective(store, build);

            bumped[static_cast<size_t>(idx)] = original;
            store.set(name, Tensor::from_data(value.shape(), bumped));

            const double numeric = (f_plus - f_minus) / (2.0 * eps);
            const double a = grad.data()[idx];
            const double rel = std::fabs(a - numeric) /
                               std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            ++report.probes;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = name;
                report.worst_index = idx;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace flocode
