#include "flocode/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "flocode/tensor_ops.hpp"

namespace flocode::ad {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Shapes are treated as row matrices when 1-D, mirroring flocode::ops.
std::pair<int, int> rows_cols(const Tensor& t) {
    require(t.ndim() == 1 || t.ndim() == 2, "ad: expected 1-D or 2-D tensor");
    if (t.ndim() == 1) return {1, t.dim(0)};
    return {t.dim(0), t.dim(1)};
}

VarPtr make_node(Tensor value, std::vector<VarPtr> parents,
                 std::function<void(Var&)> backprop) {
    auto v = std::make_shared<Var>();
    v->value = std::move(value);
    v->parents = std::move(parents);
    for (const auto& p : v->parents)
        if (p->requires_grad) v->requires_grad = true;
    if (v->requires_grad) v->backprop = std::move(backprop);
    return v;
}

}  // namespace

std::vector<double>& Var::grad_buf() {
    if (grad.size() != static_cast<size_t>(value.numel()))
        grad.assign(static_cast<size_t>(value.numel()), 0.0);
    return grad;
}

Tensor Var::grad_tensor() const {
    if (grad.empty()) return Tensor::zeros(value.shape());
    return Tensor::from_data_unchecked(value.shape(), grad);
}

VarPtr constant(Tensor v) {
    auto node = std::make_shared<Var>();
    node->value = std::move(v);
    node->requires_grad = false;
    return node;
}

VarPtr leaf(Tensor v, bool requires_grad) {
    auto node = std::make_shared<Var>();
    node->value = std::move(v);
    node->requires_grad = requires_grad;
    return node;
}

void backward(const VarPtr& root) {
    require(root != nullptr, "backward: null root");
    require(root->value.numel() == 1, "backward: root must be scalar");
    if (!root->requires_grad)
        throw std::runtime_error("backward: root does not depend on any leaf");

    // Iterative post-order topological sort over the requires_grad subgraph.
    std::vector<Var*> order;
    std::unordered_set<Var*> visited;
    std::vector<std::pair<Var*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Var* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->grad_buf()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Var* node = *it;
        if (node->backprop && !node->grad.empty()) node->backprop(*node);
    }
}

// ---------------------------------------------------------------------------
// arithmetic

VarPtr add(const VarPtr& a, const VarPtr& b) {
    Tensor out = ops::add(a->value, b->value);
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        if (a->requires_grad) {
            auto& ga = a->grad_buf();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
        }
        if (b->requires_grad) {
            auto& gb = b->grad_buf();
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i];
        }
    });
}

VarPtr sub(const VarPtr& a, const VarPtr& b) {
    Tensor out = ops::sub(a->value, b->value);
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        if (a->requires_grad) {
            auto& ga = a->grad_buf();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
        }
        if (b->requires_grad) {
            auto& gb = b->grad_buf();
            for (size_t i = 0; i < gb.size(); ++i) gb[i] -= self.grad[i];
        }
    });
}

VarPtr mul(const VarPtr& a, const VarPtr& b) {
    Tensor out = ops::mul(a->value, b->value);
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        const double* av = a->value.data();
        const double* bv = b->value.data();
        if (a->requires_grad) {
            auto& ga = a->grad_buf();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * bv[i];
        }
        if (b->requires_grad) {
            auto& gb = b->grad_buf();
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * av[i];
        }
    });
}

VarPtr div(const VarPtr& a, const VarPtr& b) {
    require(a->value.same_shape(b->value), "div: shape mismatch");
    const int n = a->value.numel();
    std::vector<double> out(static_cast<size_t>(n));
    const double* av = a->value.data();
    const double* bv = b->value.data();
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = av[i] / bv[i];
    Tensor t = Tensor::from_data(a->value.shape(), out);
    return make_node(std::move(t), {a, b}, [a, b](Var& self) {
        const double* av2 = a->value.data();
        const double* bv2 = b->value.data();
        if (a->requires_grad) {
            auto& ga = a->grad_buf();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] / bv2[i];
        }
        if (b->requires_grad) {
            auto& gb = b->grad_buf();
            for (size_t i = 0; i < gb.size(); ++i)
                gb[i] -= self.grad[i] * av2[i] / (bv2[i] * bv2[i]);
        }
    });
}

VarPtr scale(const VarPtr& a, double s) {
    Tensor out = ops::scale(a->value, s);
    return make_node(std::move(out), {a}, [a, s](Var& self) {
        auto& ga = a->grad_buf();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * s;
    });
}

VarPtr add_scalar(const VarPtr& a, double s) {
    Tensor out = ops::add_scalar(a->value, s);
    return make_node(std::move(out), {a}, [a](Var& self) {
        auto& ga = a->grad_buf();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    });
}

VarPtr neg(const VarPtr& a) { return scale(a, -1.0); }

VarPtr add_many(const std::vector<VarPtr>& xs) {
    require(!xs.empty(), "add_many: empty operand list");
    std::vector<double> acc(static_cast<size_t>(xs[0]->value.numel()), 0.0);
    for (const auto& x : xs) {
        require(x->value.same_shape(xs[0]->value), "add_many: shape mismatch");
        const double* xv = x->value.data();
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += xv[i];
    }
    Tensor out = Tensor::from_data(xs[0]->value.shape(), acc);
    return make_node(std::move(out), xs, [](Var& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            auto& gp = p->grad_buf();
            for (size_t i = 0; i < gp.size(); ++i) gp[i] += self.grad[i];
        }
    });
}

// ---------------------------------------------------------------------------
// structure

VarPtr matmul(const VarPtr& a, const VarPtr& b) {
    Tensor out = ops::matmul(a->value, b->value);
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        auto [m, k] = rows_cols(a->value);
        auto [k2, n] = rows_cols(b->value);
        (void)k2;
        const double* av = a->value.data();
        const double* bv = b->value.data();
        const double* g = self.grad.data();
        if (a->requires_grad) {  // dA = dY * B^T
            auto& ga = a->grad_buf();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gij = g[i * n + j];
                    if (gij == 0.0) continue;
                    for (int p = 0; p < k; ++p) ga[static_cast<size_t>(i * k + p)] += gij * bv[p * n + j];
                }
        }
        if (b->requires_grad) {  // dB = A^T * dY
            auto& gb = b->grad_buf();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    const double aip = av[i * k + p];
                    if (aip == 0.0) continue;
                    for (int j = 0; j < n; ++j) gb[static_cast<size_t>(p * n + j)] += aip * g[i * n + j];
                }
        }
    });
}

VarPtr transpose(const VarPtr& a) {
    Tensor out = ops::transpose(a->value);
    return make_node(std::move(out), {a}, [a](Var& self) {
        auto [m, n] = rows_cols(a->value);
        auto& ga = a->grad_buf();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) ga[static_cast<size_t>(i * n + j)] += self.grad[static_cast<size_t>(j * m + i)];
    });
}

VarPtr concat_cols(const VarPtr& a, const VarPtr& b) {
    Tensor out = ops::concat(a->value, b->value, 1);
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        auto [m, na] = rows_cols(a->value);
        auto [m2, nb] = rows_cols(b->value);
        (void)m2;
        const int n = na + nb;
        if (a->requires_grad) {
            auto& ga = a->grad_buf();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < na; ++j) ga[static_cast<size_t>(i * na + j)] += self.grad[static_cast<size_t>(i * n + j)];
        }
        if (b->requires_grad) {
            auto& gb = b->grad_buf();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < nb; ++j)
                    gb[static_cast<size_t>(i * nb + j)] += self.grad[static_cast<size_t>(i * n + na + j)];
        }
    });
}

VarPtr concat_rows(const VarPtr& a, const VarPtr& b) {
    Tensor out = ops::concat(a->value, b->value, 0);
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        const int na = a->value.numel();
        if (a->requires_grad) {
            auto& ga = a->grad_buf();
            for (int i = 0; i < na; ++i) ga[static_cast<size_t>(i)] += self.grad[static_cast<size_t>(i)];
        }
        if (b->requires_grad) {
            auto& gb = b->grad_buf();
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[static_cast<size_t>(na) + i];
        }
    });
}

VarPtr slice_cols(const VarPtr& a, int start, int len) {
    auto [m, n] = rows_cols(a->value);
    require(start >= 0 && len > 0 && start + len <= n, "slice_cols: out of range");
    std::vector<double> out(static_cast<size_t>(m) * len);
    const double* av = a->value.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < len; ++j) out[static_cast<size_t>(i * len + j)] = av[i * n + start + j];
    Tensor t = Tensor::from_data_unchecked({m, len}, out);
    return make_node(std::move(t), {a}, [a, start, len](Var& self) {
        auto [m2, n2] = rows_cols(a->value);
        auto& ga = a->grad_buf();
        for (int i = 0; i < m2; ++i)
            for (int j = 0; j < len; ++j)
                ga[static_cast<size_t>(i * n2 + start + j)] += self.grad[static_cast<size_t>(i * len + j)];
    });
}

VarPtr slice_rows(const VarPtr& a, int start, int len) {
    auto [m, n] = rows_cols(a->value);
    require(start >= 0 && len > 0 && start + len <= m, "slice_rows: out of range");
    std::vector<double> out(static_cast<size_t>(len) * n);
    const double* av = a->value.data();
    std::copy(av + start * n, av + (start + len) * n, out.begin());
    Tensor t = Tensor::from_data_unchecked({len, n}, out);
    return make_node(std::move(t), {a}, [a, start, len](Var& self) {
        auto [m2, n2] = rows_cols(a->value);
        (void)m2;
        auto& ga = a->grad_buf();
        for (int i = 0; i < len * n2; ++i) ga[static_cast<size_t>(start * n2 + i)] += self.grad[static_cast<size_t>(i)];
    });
}

VarPtr row(const VarPtr& a, int i) { return slice_rows(a, i, 1); }

VarPtr reshape(const VarPtr& a, std::vector<int> shape) {
    require(shape_numel(shape) == a->value.numel(), "reshape: element count mismatch");
    std::vector<double> data(a->value.data(), a->value.data() + a->value.numel());
    Tensor t = Tensor::from_data_unchecked(shape, data);
    return make_node(std::move(t), {a}, [a](Var& self) {
        auto& ga = a->grad_buf();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    });
}

VarPtr stack_rows(const std::vector<VarPtr>& rows) {
    require(!rows.empty(), "stack_rows: empty row list");
    const int n = rows[0]->value.numel();
    std::vector<double> out;
    out.reserve(static_cast<size_t>(rows.size()) * n);
    for (const auto& r : rows) {
        require(r->value.numel() == n, "stack_rows: row width mismatch");
        out.insert(out.end(), r->value.data(), r->value.data() + n);
    }
    Tensor t = Tensor::from_data_unchecked({static_cast<int>(rows.size()), n}, out);
    return make_node(std::move(t), rows, [n](Var& self) {
        for (size_t r = 0; r < self.parents.size(); ++r) {
            auto& p = self.parents[r];
            if (!p->requires_grad) continue;
            auto& gp = p->grad_buf();
            for (int j = 0; j < n; ++j) gp[static_cast<size_t>(j)] += self.grad[r * n + j];
        }
    });
}

VarPtr add_rowvec(const VarPtr& x, const VarPtr& b) {
    auto [m, n] = rows_cols(x->value);
    require(b->value.numel() == n, "add_rowvec: width mismatch");
    std::vector<double> out(static_cast<size_t>(m) * n);
    const double* xv = x->value.data();
    const double* bv = b->value.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(i * n + j)] = xv[i * n + j] + bv[j];
    Tensor t = Tensor::from_data(x->value.shape(), out);
    return make_node(std::move(t), {x, b}, [x, b](Var& self) {
        auto [m2, n2] = rows_cols(x->value);
        if (x->requires_grad) {
            auto& gx = x->grad_buf();
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
        }
        if (b->requires_grad) {
            auto& gb = b->grad_buf();
            for (int i = 0; i < m2; ++i)
                for (int j = 0; j < n2; ++j) gb[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(i * n2 + j)];
        }
    });
}

// ---------------------------------------------------------------------------
// nonlinearities / normalizations

VarPtr softmax_rows(const VarPtr& a) {
    Tensor out = ops::softmax_rows(a->value);
    VarPtr node = make_node(out, {a}, nullptr);
    Tensor y = node->value;
    node->backprop = [a, y](Var& self) {
        auto [m, n] = rows_cols(y);
        const double* yv = y.data();
        auto& ga = a->grad_buf();
        for (int i = 0; i < m; ++i) {
            double dotv = 0.0;
            for (int j = 0; j < n; ++j) dotv += self.grad[static_cast<size_t>(i * n + j)] * yv[i * n + j];
            for (int j = 0; j < n; ++j)
                ga[static_cast<size_t>(i * n + j)] +=
                    yv[i * n + j] * (self.grad[static_cast<size_t>(i * n + j)] - dotv);
        }
    };
    if (!node->requires_grad) node->backprop = nullptr;
    return node;
}

VarPtr sigmoid(const VarPtr& a) {
    Tensor out = ops::sigmoid(a->value);
    VarPtr node = make_node(out, {a}, nullptr);
    Tensor y = node->value;
    node->backprop = [a, y](Var& self) {
        const double* yv = y.data();
        auto& ga = a->grad_buf();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * yv[i] * (1.0 - yv[i]);
    };
    if (!node->requires_grad) node->backprop = nullptr;
    return node;
}

VarPtr relu(const VarPtr& a) {
    Tensor out = ops::relu(a->value);
    return make_node(std::move(out), {a}, [a](Var& self) {
        const double* av = a->value.data();
        auto& ga = a->grad_buf();
        for (size_t i = 0; i < ga.size(); ++i)
            if (av[i] > 0.0) ga[i] += self.grad[i];
    });
}

VarPtr gelu(const VarPtr& a) {
    Tensor out = ops::gelu(a->value);
    return make_node(std::move(out), {a}, [a](Var& self) {
        constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
        constexpr double kA = 0.044715;
        const double* av = a->value.data();
        auto& ga = a->grad_buf();
        for (size_t i = 0; i < ga.size(); ++i) {
            const double x = av[i];
            const double u = kC * (x + kA * x * x * x);
            const double t = std::tanh(u);
            const double du = kC * (1.0 + 3.0 * kA * x * x);
            ga[i] += self.grad[i] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
        }
    });
}

VarPtr layer_norm(const VarPtr& x, const VarPtr& gain, const VarPtr& bias, double eps) {
    Tensor out = ops::layer_norm(x->value, gain->value, bias->value, eps);
    return make_node(std::move(out), {x, gain, bias}, [x, gain, bias, eps](Var& self) {
        auto [m, n] = rows_cols(x->value);
        const double* xv = x->value.data();
        const double* gv = gain->value.data();
        for (int i = 0; i < m; ++i) {
            double mu = 0.0;
            for (int j = 0; j < n; ++j) mu += xv[i * n + j];
            mu /= n;
            double var = 0.0;
            for (int j = 0; j < n; ++j) {
                const double d = xv[i * n + j] - mu;
                var += d * d;
            }
            var /= n;
            const double inv = 1.0 / std::sqrt(var + eps);

            // xhat_j and upstream-through-gain dxhat_j for this row
            double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
            std::vector<double> xhat(static_cast<size_t>(n)), dxhat(static_cast<size_t>(n));
            for (int j = 0; j < n; ++j) {
                xhat[static_cast<size_t>(j)] = (xv[i * n + j] - mu) * inv;
                dxhat[static_cast<size_t>(j)] = self.grad[static_cast<size_t>(i * n + j)] * gv[j];
                mean_dxhat += dxhat[static_cast<size_t>(j)];
                mean_dxhat_xhat += dxhat[static_cast<size_t>(j)] * xhat[static_cast<size_t>(j)];
            }
            mean_dxhat /= n;
            mean_dxhat_xhat /= n;

            if (x->requires_grad) {
                auto& gx = x->grad_buf();
                for (int j = 0; j < n; ++j)
                    gx[static_cast<size_t>(i * n + j)] +=
                        inv * (dxhat[static_cast<size_t>(j)] - mean_dxhat -
                               xhat[static_cast<size_t>(j)] * mean_dxhat_xhat);
            }
            if (gain->requires_grad) {
                auto& gg = gain->grad_buf();
                for (int j = 0; j < n; ++j)
                    gg[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(i * n + j)] * xhat[static_cast<size_t>(j)];
            }
            if (bias->requires_grad) {
                auto& gb = bias->grad_buf();
                for (int j = 0; j < n; ++j) gb[static_cast<size_t>(j)] += self.grad[static_cast<size_t>(i * n + j)];
            }
        }
    });
}

VarPtr l2_normalize_rows(const VarPtr& a) {
    Tensor out = ops::l2_normalize(a->value);
    VarPtr node = make_node(out, {a}, nullptr);
    Tensor y = node->value;
    node->backprop = [a, y](Var& self) {
        auto [m, n] = rows_cols(a->value);
        const double* av = a->value.data();
        const double* yv = y.data();
        auto& ga = a->grad_buf();
        for (int i = 0; i < m; ++i) {
            double norm = 0.0;
            for (int j = 0; j < n; ++j) norm += av[i * n + j] * av[i * n + j];
            norm = std::sqrt(norm);
            double gy = 0.0;
            for (int j = 0; j < n; ++j) gy += self.grad[static_cast<size_t>(i * n + j)] * yv[i * n + j];
            for (int j = 0; j < n; ++j)
                ga[static_cast<size_t>(i * n + j)] +=
                    (self.grad[static_cast<size_t>(i * n + j)] - yv[i * n + j] * gy) / norm;
        }
    };
    if (!node->requires_grad) node->backprop = nullptr;
    return node;
}

VarPtr masked_fill(const VarPtr& x, const Tensor& mask) {
    Tensor out = ops::masked_fill(x->value, mask);
    // Additive constant: gradient passes through untouched.
    return make_node(std::move(out), {x}, [x](Var& self) {
        auto& gx = x->grad_buf();
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    });
}

// ---------------------------------------------------------------------------
// pointwise analytic

VarPtr exp(const VarPtr& a) {
    Tensor out = ops::exp(a->value);
    VarPtr node = make_node(out, {a}, nullptr);
    Tensor y = node->value;
    node->backprop = [a, y](Var& self) {
        const double* yv = y.data();
        auto& ga = a->grad_buf();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * yv[i];
    };
    if (!node->requires_grad) node->backprop = nullptr;
    return node;
}

VarPtr log(const VarPtr& a) {
    Tensor out = ops::log(a->value);
    return make_node(std::move(out), {a}, [a](Var& self) {
        const double* av = a->value.data();
        auto& ga = a->grad_buf();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] / av[i];
    });
}

VarPtr sqrt(const VarPtr& a) {
    const int n = a->value.numel();
    std::vector<double> out(static_cast<size_t>(n));
    const double* av = a->value.data();
    for (int i = 0; i < n; ++i) {
        require(av[i] >= 0.0, "sqrt: negative input");
        out[static_cast<size_t>(i)] = std::sqrt(av[i]);
    }
    Tensor t = Tensor::from_data(a->value.shape(), out);
    VarPtr node = make_node(t, {a}, nullptr);
    Tensor y = node->value;
    node->backprop = [a, y](Var& self) {
        const double* yv = y.data();
        auto& ga = a->grad_buf();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * 0.5 / yv[i];
    };
    if (!node->requires_grad) node->backprop = nullptr;
    return node;
}

VarPtr square(const VarPtr& a) { return mul(a, a); }

VarPtr clamp(const VarPtr& a, double lo, double hi) {
    require(lo < hi, "clamp: lo must be < hi");
    const int n = a->value.numel();
    std::vector<double> out(static_cast<size_t>(n));
    const double* av = a->value.data();
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = std::min(std::max(av[i], lo), hi);
    Tensor t = Tensor::from_data(a->value.shape(), out);
    return make_node(std::move(t), {a}, [a, lo, hi](Var& self) {
        const double* av2 = a->value.data();
        auto& ga = a->grad_buf();
        for (size_t i = 0; i < ga.size(); ++i)
            if (av2[i] > lo && av2[i] < hi) ga[i] += self.grad[i];
    });
}

// ---------------------------------------------------------------------------
// reductions

VarPtr sum(const VarPtr& a) {
    Tensor out = Tensor::scalar(ops::sum(a->value));
    return make_node(std::move(out), {a}, [a](Var& self) {
        const double g = self.grad[0];
        auto& ga = a->grad_buf();
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

VarPtr mean(const VarPtr& a) { return scale(sum(a), 1.0 / a->value.numel()); }

VarPtr rowsum(const VarPtr& a) {
    auto [m, n] = rows_cols(a->value);
    std::vector<double> out(static_cast<size_t>(m), 0.0);
    const double* av = a->value.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(i)] += av[i * n + j];
    Tensor t = Tensor::from_data({m, 1}, out);
    return make_node(std::move(t), {a}, [a](Var& self) {
        auto [m2, n2] = rows_cols(a->value);
        auto& ga = a->grad_buf();
        for (int i = 0; i < m2; ++i)
            for (int j = 0; j < n2; ++j) ga[static_cast<size_t>(i * n2 + j)] += self.grad[static_cast<size_t>(i)];
    });
}

VarPtr div_rows(const VarPtr& x, const VarPtr& s) {
    auto [m, n] = rows_cols(x->value);
    require(s->value.numel() == m, "div_rows: divisor length mismatch");
    std::vector<double> out(static_cast<size_t>(m) * n);
    const double* xv = x->value.data();
    const double* sv = s->value.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(i * n + j)] = xv[i * n + j] / sv[i];
    Tensor t = Tensor::from_data(x->value.shape(), out);
    return make_node(std::move(t), {x, s}, [x, s](Var& self) {
        auto [m2, n2] = rows_cols(x->value);
        const double* xv2 = x->value.data();
        const double* sv2 = s->value.data();
        if (x->requires_grad) {
            auto& gx = x->grad_buf();
            for (int i = 0; i < m2; ++i)
                for (int j = 0; j < n2; ++j)
                    gx[static_cast<size_t>(i * n2 + j)] += self.grad[static_cast<size_t>(i * n2 + j)] / sv2[i];
        }
        if (s->requires_grad) {
            auto& gs = s->grad_buf();
            for (int i = 0; i < m2; ++i) {
                double acc = 0.0;
                for (int j = 0; j < n2; ++j)
                    acc += self.grad[static_cast<size_t>(i * n2 + j)] * xv2[i * n2 + j];
                gs[static_cast<size_t>(i)] -= acc / (sv2[i] * sv2[i]);
            }
        }
    });
}

VarPtr dot(const VarPtr& a, const VarPtr& b) { return sum(mul(a, b)); }

}  // namespace flocode::ad
