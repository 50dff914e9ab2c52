#include "flocode/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace flocode {

int shape_numel(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("tensor: negative dimension in shape " + shape_to_string(shape));
        n *= d;
    }
    if (n > (1ll << 31) - 1) throw std::invalid_argument("tensor: shape too large " + shape_to_string(shape));
    return static_cast<int>(n);
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape) {
    std::size_t n = static_cast<std::size_t>(shape_numel(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<const std::vector<double>>(n, 0.0);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("tensor: full() with non-finite value");
    std::size_t n = static_cast<std::size_t>(shape_numel(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<const std::vector<double>>(n, value);
    return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data) {
    Tensor t = from_data_unchecked(std::move(shape), std::move(data));
    t.check_finite("from_data");
    return t;
}

Tensor Tensor::from_data_unchecked(std::vector<int> shape, std::vector<double> data) {
    std::size_t n = static_cast<std::size_t>(shape_numel(shape));
    if (n != data.size()) {
        throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_to_string(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<const std::vector<double>>(std::move(data));
    return t;
}

int Tensor::dim(int i) const {
    if (i < 0 || i >= ndim()) throw std::out_of_range("tensor: dim index out of range");
    return shape_[static_cast<std::size_t>(i)];
}

const double* Tensor::data() const { return data_ ? data_->data() : nullptr; }

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("tensor: item() on tensor with shape " + shape_str());
    return (*data_)[0];
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

void Tensor::check_finite(const char* where) const {
    if (!data_) return;
    for (double v : *data_) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string("non-finite value in ") + where);
        }
    }
}

bool Tensor::equals(const Tensor& other) const {
    if (shape_ != other.shape_) return false;
    const double* a = data();
    const double* b = other.data();
    for (int i = 0; i < numel(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

}  // namespace flocode
