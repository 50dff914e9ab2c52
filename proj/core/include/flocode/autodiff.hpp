#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "flocode/tensor.hpp"

namespace flocode::ad {

struct Var;
using VarPtr = std::shared_ptr<Var>;

/// Node in a reverse-mode differentiation graph. Graphs are built per
/// training step and discarded; single-threaded by contract.
struct Var {
    Tensor value;
    std::vector<double> grad;  // sized lazily on first accumulation
    bool requires_grad = false;
    std::vector<VarPtr> parents;
    std::function<void(Var&)> backprop;  // pulls this->grad into parents

    std::vector<double>& grad_buf();
    Tensor grad_tensor() const;
};

VarPtr constant(Tensor v);
VarPtr leaf(Tensor v, bool requires_grad = true);

/// Runs reverse accumulation from a scalar root (numel == 1).
void backward(const VarPtr& root);

// --- arithmetic ---
VarPtr add(const VarPtr& a, const VarPtr& b);
VarPtr sub(const VarPtr& a, const VarPtr& b);
VarPtr mul(const VarPtr& a, const VarPtr& b);
VarPtr div(const VarPtr& a, const VarPtr& b);
VarPtr scale(const VarPtr& a, double s);
VarPtr add_scalar(const VarPtr& a, double s);
VarPtr neg(const VarPtr& a);
/// Sum of same-shaped vars as one n-ary node (keeps graphs shallow).
VarPtr add_many(const std::vector<VarPtr>& xs);

// --- structure ---
VarPtr matmul(const VarPtr& a, const VarPtr& b);
VarPtr transpose(const VarPtr& a);
VarPtr concat_cols(const VarPtr& a, const VarPtr& b);
VarPtr concat_rows(const VarPtr& a, const VarPtr& b);
VarPtr slice_cols(const VarPtr& a, int start, int len);
VarPtr slice_rows(const VarPtr& a, int start, int len);
VarPtr row(const VarPtr& a, int i);
VarPtr reshape(const VarPtr& a, std::vector<int> shape);
VarPtr stack_rows(const std::vector<VarPtr>& rows);  // each [1,n] -> [m,n]
VarPtr add_rowvec(const VarPtr& x, const VarPtr& b);  // b is [1,n], broadcast over rows

// --- nonlinearities / normalizations ---
VarPtr softmax_rows(const VarPtr& a);
VarPtr sigmoid(const VarPtr& a);
VarPtr relu(const VarPtr& a);
VarPtr gelu(const VarPtr& a);
VarPtr layer_norm(const VarPtr& x, const VarPtr& gain, const VarPtr& bias, double eps = 1e-5);
VarPtr l2_normalize_rows(const VarPtr& a);
VarPtr masked_fill(const VarPtr& x, const Tensor& mask);

// --- pointwise analytic ---
VarPtr exp(const VarPtr& a);
VarPtr log(const VarPtr& a);
VarPtr sqrt(const VarPtr& a);
VarPtr square(const VarPtr& a);
/// Clamp with pass-through gradient strictly inside (lo, hi), zero outside.
VarPtr clamp(const VarPtr& a, double lo, double hi);

// --- reductions ---
VarPtr sum(const VarPtr& a);    // [1,1]
VarPtr mean(const VarPtr& a);   // [1,1]
VarPtr rowsum(const VarPtr& a); // [m,1]
VarPtr div_rows(const VarPtr& x, const VarPtr& s);  // divide row i by s(i,0)
VarPtr dot(const VarPtr& a, const VarPtr& b);       // [1,1]

}  // namespace flocode::ad
