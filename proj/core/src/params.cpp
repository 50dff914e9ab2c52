#include "flocode/params.hpp"

#include <cmath>
#include <stdexcept>

namespace flocode {

void ParamStore::insert(const std::string& name, Tensor value) {
    if (params_.count(name))
        throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    params_.emplace(name, std::move(value));
}

bool ParamStore::has(const std::string& name) const { return params_.count(name) > 0; }

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end())
        throw std::invalid_argument("ParamStore: unknown parameter '" + name + "'");
    return it->second;
}

void ParamStore::set(const std::string& name, Tensor value) {
    auto it = params_.find(name);
    if (it == params_.end())
        throw std::invalid_argument("ParamStore: unknown parameter '" + name + "'");
    if (!it->second.same_shape(value))
        throw std::invalid_argument("ParamStore: shape mismatch assigning '" + name + "'");
    it->second = std::move(value);
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, _] : params_) out.push_back(name);
    return out;
}

ad::VarPtr ParamContext::operator[](const std::string& name) {
    auto it = leaves_.find(name);
    if (it != leaves_.end()) return it->second;
    ad::VarPtr v = ad::leaf(store_.get(name), /*requires_grad=*/true);
    leaves_.emplace(name, v);
    return v;
}

std::map<std::string, Tensor> ParamContext::grads() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, var] : leaves_) out.emplace(name, var->grad_tensor());
    return out;
}

Tensor xavier_uniform(Rng& rng, int fan_in, int fan_out, const std::vector<int>& shape) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : data) x = rng.uniform(-bound, bound);
    return Tensor::from_data(shape, data);
}

Tensor normal_init(Rng& rng, double sigma, const std::vector<int>& shape) {
    std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
    for (auto& x : data) x = rng.normal(0.0, sigma);
    return Tensor::from_data(shape, data);
}

}  // namespace flocode
