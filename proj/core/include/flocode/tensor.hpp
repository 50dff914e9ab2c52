#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace flocode {

/// Dense row-major tensor of doubles. Tensors are immutable values: every
/// operation returns a fresh tensor, so sharing across threads is safe.
/// Construction rejects non-finite values; NaN/Inf never propagates silently.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);
    /// Takes ownership of `data`; length must equal product(shape).
    static Tensor from_data(std::vector<int> shape, std::vector<double> data);
    /// Same as from_data but skips the finite check (trusted internal paths).
    static Tensor from_data_unchecked(std::vector<int> shape, std::vector<double> data);

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const;
    int numel() const { return data_ ? static_cast<int>(data_->size()) : 0; }
    bool empty() const { return numel() == 0; }

    /// Contiguous row-major storage; valid while this tensor (or a copy) lives.
    const double* data() const;

    // Element access (bounds unchecked beyond debug asserts; hot paths).
    double operator()(int i) const { return (*data_)[static_cast<std::size_t>(i)]; }
    double operator()(int i, int j) const {
        return (*data_)[static_cast<std::size_t>(i) * shape_[1] + j];
    }
    double operator()(int i, int j, int k) const {
        return (*data_)[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    /// Scalar value of a one-element tensor.
    double item() const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    /// Throws if any element is NaN or Inf; `where` names the operation.
    void check_finite(const char* where) const;

    /// Exact elementwise equality (shape and bits).
    bool equals(const Tensor& other) const;

private:
    std::vector<int> shape_;
    std::shared_ptr<const std::vector<double>> data_;
};

int shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

}  // namespace flocode
