#pragma once

#include <map>
#include <string>
#include <vector>

#include "flocode/autodiff.hpp"
#include "flocode/rng.hpp"
#include "flocode/tensor.hpp"

namespace flocode {

/// Named parameter collection. std::map keeps iteration in lexicographic
/// name order, which fixes update order and serialization layout.
class ParamStore {
public:
    void insert(const std::string& name, Tensor value);
    bool has(const std::string& name) const;
    const Tensor& get(const std::string& name) const;
    void set(const std::string& name, Tensor value);  // shape must match
    std::vector<std::string> names() const;
    size_t size() const { return params_.size(); }

    std::map<std::string, Tensor>::const_iterator begin() const { return params_.begin(); }
    std::map<std::string, Tensor>::const_iterator end() const { return params_.end(); }

private:
    std::map<std::string, Tensor> params_;
};

/// Per-graph view of a ParamStore: hands out one differentiation leaf per
/// parameter and remembers which were touched so gradients can be read back.
class ParamContext {
public:
    explicit ParamContext(const ParamStore& store) : store_(store) {}

    ad::VarPtr operator[](const std::string& name);
    const std::map<std::string, ad::VarPtr>& touched() const { return leaves_; }
    /// Gradient tensors for every touched parameter (zeros if never reached).
    std::map<std::string, Tensor> grads() const;

private:
    const ParamStore& store_;
    std::map<std::string, ad::VarPtr> leaves_;
};

Tensor xavier_uniform(Rng& rng, int fan_in, int fan_out, const std::vector<int>& shape);
Tensor normal_init(Rng& rng, double sigma, const std::vector<int>& shape);

}  // namespace flocode
