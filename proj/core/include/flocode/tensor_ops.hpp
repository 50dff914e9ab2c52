#pragma once

#include "flocode/tensor.hpp"

namespace flocode::ops {

// Additive mask value used instead of -inf before softmax. Keeps exp() at
// exactly 0 without producing NaN from inf-inf.
inline constexpr double kMaskFill = -1e30;

Tensor matmul(const Tensor& a, const Tensor& b);   // [m,k] x [k,n] -> [m,n]
Tensor transpose(const Tensor& a);                 // [m,n] -> [n,m]
Tensor concat(const Tensor& a, const Tensor& b, int axis);  // 1-D or 2-D
Tensor softmax_rows(const Tensor& a);              // per-row softmax on last axis
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);                      // tanh approximation
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
/// Normalizes x (or each row of a 2-D x) to unit L2 norm. Zero vectors are an
/// error: the caller is expected to guard them (see object_loss).
Tensor l2_normalize(const Tensor& a);
/// Layer norm over the last axis with learnable gain/bias (pass 1s/0s for plain).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
/// Adds kMaskFill to every position where mask == 0. mask shape matches x.
Tensor masked_fill(const Tensor& x, const Tensor& mask);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor neg(const Tensor& a);
double sum(const Tensor& a);
double mean(const Tensor& a);
double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);

}  // namespace flocode::ops
