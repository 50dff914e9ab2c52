#include "flocode/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flocode::ops {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument("ops: " + msg);
}

std::pair<int, int> rows_cols(const Tensor& a) {
    if (a.ndim() == 1) return {1, a.dim(0)};
    if (a.ndim() == 2) return {a.dim(0), a.dim(1)};
    throw std::invalid_argument("ops: expected 1-D or 2-D tensor, got " + a.shape_str());
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2, "matmul expects 2-D tensors, got " + a.shape_str() + " and " + b.shape_str());
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    require(k == k2, "matmul inner dims differ: " + a.shape_str() + " vs " + b.shape_str());
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = ad[static_cast<std::size_t>(i) * k + p];
            if (av == 0.0) continue;
            const std::size_t brow = static_cast<std::size_t>(p) * n;
            const std::size_t orow = static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) out[orow + j] += av * bd[brow + j];
        }
    }
    Tensor t = Tensor::from_data_unchecked({m, n}, std::move(out));
    t.check_finite("matmul");
    return t;
}

Tensor transpose(const Tensor& a) {
    require(a.ndim() == 2, "transpose expects 2-D tensor");
    const int m = a.dim(0), n = a.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    const auto& ad = a.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j) * m + i] = ad[static_cast<std::size_t>(i) * n + j];
    return Tensor::from_data_unchecked({n, m}, std::move(out));
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    if (a.ndim() == 1 && b.ndim() == 1) {
        require(axis == 0, "concat axis out of range for 1-D tensors");
        std::vector<double> out;
        out.reserve(a.numel() + b.numel());
        out.insert(out.end(), a.data(), a.data() + a.numel());
        out.insert(out.end(), b.data(), b.data() + b.numel());
        return Tensor::from_data_unchecked({static_cast<int>(out.size())}, std::move(out));
    }
    require(a.ndim() == 2 && b.ndim() == 2, "concat expects matching 1-D or 2-D tensors");
    if (axis == 0) {
        require(a.dim(1) == b.dim(1), "concat axis 0 needs equal column counts");
        std::vector<double> out;
        out.reserve(a.numel() + b.numel());
        out.insert(out.end(), a.data(), a.data() + a.numel());
        out.insert(out.end(), b.data(), b.data() + b.numel());
        return Tensor::from_data_unchecked({a.dim(0) + b.dim(0), a.dim(1)}, std::move(out));
    }
    require(axis == 1, "concat axis out of range");
    require(a.dim(0) == b.dim(0), "concat axis 1 needs equal row counts");
    const int m = a.dim(0), na = a.dim(1), nb = b.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m) * (na + nb));
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (int i = 0; i < m; ++i) {
        std::copy_n(ad + static_cast<std::size_t>(i) * na, na,
                    out.begin() + static_cast<std::size_t>(i) * (na + nb));
        std::copy_n(bd + static_cast<std::size_t>(i) * nb, nb,
                    out.begin() + static_cast<std::size_t>(i) * (na + nb) + na);
    }
    return Tensor::from_data_unchecked({m, na + nb}, std::move(out));
}

Tensor softmax_rows(const Tensor& a) {
    auto [m, n] = rows_cols(a);
    require(n >= 1, "softmax on empty rows");
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (int i = 0; i < m; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * n;
        double mx = ad[off];
        for (int j = 1; j < n; ++j) mx = std::max(mx, ad[off + j]);
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
            out[off + j] = std::exp(ad[off + j] - mx);
            denom += out[off + j];
        }
        for (int j = 0; j < n; ++j) out[off + j] /= denom;
    }
    Tensor t = Tensor::from_data_unchecked(a.shape(), std::move(out));
    t.check_finite("softmax_rows");
    return t;
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = ad[i];
        out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    return Tensor::from_data_unchecked(a.shape(), std::move(out));
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] > 0.0 ? ad[i] : 0.0;
    return Tensor::from_data_unchecked(a.shape(), std::move(out));
}

Tensor gelu(const Tensor& a) {
    static const double kC = std::sqrt(2.0 / M_PI);
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = ad[i];
        out[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + 0.044715 * x * x * x)));
    }
    return Tensor::from_data_unchecked(a.shape(), std::move(out));
}

Tensor add(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "add shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
    Tensor t = Tensor::from_data_unchecked(a.shape(), std::move(out));
    t.check_finite("add");
    return t;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "sub shape mismatch");
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
    Tensor t = Tensor::from_data_unchecked(a.shape(), std::move(out));
    t.check_finite("sub");
    return t;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require(a.same_shape(b), "mul shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
    Tensor t = Tensor::from_data_unchecked(a.shape(), std::move(out));
    t.check_finite("mul");
    return t;
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * s;
    Tensor t = Tensor::from_data_unchecked(a.shape(), std::move(out));
    t.check_finite("scale");
    return t;
}

Tensor add_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + s;
    Tensor t = Tensor::from_data_unchecked(a.shape(), std::move(out));
    t.check_finite("add_scalar");
    return t;
}

Tensor l2_normalize(const Tensor& a) {
    auto [m, n] = rows_cols(a);
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (int i = 0; i < m; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * n;
        double sq = 0.0;
        for (int j = 0; j < n; ++j) sq += ad[off + j] * ad[off + j];
        if (sq == 0.0) throw std::invalid_argument("ops: l2_normalize on zero vector");
        const double inv = 1.0 / std::sqrt(sq);
        for (int j = 0; j < n; ++j) out[off + j] = ad[off + j] * inv;
    }
    return Tensor::from_data_unchecked(a.shape(), std::move(out));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    auto [m, n] = rows_cols(x);
    require(gain.numel() == static_cast<std::size_t>(n) && bias.numel() == static_cast<std::size_t>(n),
            "layer_norm gain/bias size mismatch");
    std::vector<double> out(x.numel());
    const auto& xd = x.data();
    const auto& gd = gain.data();
    const auto& bd = bias.data();
    for (int i = 0; i < m; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * n;
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += xd[off + j];
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = xd[off + j] - mu;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < n; ++j) out[off + j] = (xd[off + j] - mu) * inv * gd[j] + bd[j];
    }
    return Tensor::from_data_unchecked(x.shape(), std::move(out));
}

Tensor masked_fill(const Tensor& x, const Tensor& mask) {
    require(x.same_shape(mask), "masked_fill shape mismatch");
    std::vector<double> out(x.numel());
    const auto& xd = x.data();
    const auto& md = mask.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = md[i] != 0.0 ? xd[i] : xd[i] + kMaskFill;
    return Tensor::from_data_unchecked(x.shape(), std::move(out));
}

Tensor exp(const Tensor& a) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(ad[i]);
    Tensor t = Tensor::from_data_unchecked(a.shape(), std::move(out));
    t.check_finite("exp");
    return t;
}

Tensor log(const Tensor& a) {
    std::vector<double> out(a.numel());
    const auto& ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(ad[i]);
    Tensor t = Tensor::from_data_unchecked(a.shape(), std::move(out));
    t.check_finite("log");
    return t;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

double sum(const Tensor& a) {
    double s = 0.0;
    for (int i = 0; i < a.numel(); ++i) s += a.data()[i];
    return s;
}

double mean(const Tensor& a) {
    if (a.numel() == 0) throw std::invalid_argument("ops: mean of empty tensor");
    return sum(a) / static_cast<double>(a.numel());
}

double dot(const Tensor& a, const Tensor& b) {
    require(a.numel() == b.numel(), "dot size mismatch");
    const auto& ad = a.data();
    const auto& bd = b.data();
    double s = 0.0;
    for (int i = 0; i < a.numel(); ++i) s += ad[i] * bd[i];
    return s;
}

double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

}  // namespace flocode::ops
