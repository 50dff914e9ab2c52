#include "flocode/optim.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "flocode/serialize.hpp"

namespace flocode {

void AdamWConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in [0,1)");
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be non-negative");
}

AdamW::AdamW(AdamWConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void AdamW::set_group_lr(const std::string& prefix, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("group learning rate must be positive");
    group_lrs_[prefix] = lr;
}

double AdamW::lr_for(const std::string& name) const {
    size_t best_len = 0;
    double lr = cfg_.lr;
    for (const auto& [prefix, group_lr] : group_lrs_) {
        if (name.rfind(prefix, 0) == 0 && prefix.size() >= best_len) {
            best_len = prefix.size();
            lr = group_lr;
        }
    }
    return lr;
}

long AdamW::step_count(const std::string& name) const {
    auto it = slots_.find(name);
    return it == slots_.end() ? 0 : it->second.t;
}

void AdamW::step(ParamStore& store, const std::map<std::string, Tensor>& grads) {
    for (const auto& [name, grad] : grads) {
        if (!store.has(name)) throw std::invalid_argument("gradient for unknown parameter: " + name);
        const Tensor& theta = store.get(name);
        if (theta.shape() != grad.shape())
            throw std::invalid_argument("gradient shape mismatch for parameter: " + name);

        auto it = slots_.find(name);
        if (it == slots_.end())
            it = slots_.emplace(name, Slot{Tensor::zeros(theta.shape()), Tensor::zeros(theta.shape()), 0}).first;
        Slot& slot = it->second;
        slot.t += 1;

        const double lr = lr_for(name);
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(slot.t));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(slot.t));

        const int n = theta.numel();
        std::vector<double> m_new(static_cast<size_t>(n));
        std::vector<double> v_new(static_cast<size_t>(n));
        std::vector<double> theta_new(static_cast<size_t>(n));
        const double* g = grad.data();
        const double* m = slot.m.data();
        const double* v = slot.v.data();
        const double* th = theta.data();
        for (int i = 0; i < n; ++i) {
            const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            m_new[static_cast<size_t>(i)] = mi;
            v_new[static_cast<size_t>(i)] = vi;
            const double m_hat = mi / bc1;
            const double v_hat = vi / bc2;
            theta_new[static_cast<size_t>(i)] =
                th[i] - lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * th[i]);
        }
        slot.m = Tensor::from_data(theta.shape(), std::move(m_new));
        slot.v = Tensor::from_data(theta.shape(), std::move(v_new));
        store.set(name, Tensor::from_data(theta.shape(), std::move(theta_new)));
    }
}

void AdamW::save(std::ostream& os) const {
    io::write_f64(os, cfg_.lr);
    io::write_f64(os, cfg_.beta1);
    io::write_f64(os, cfg_.beta2);
    io::write_f64(os, cfg_.eps);
    io::write_f64(os, cfg_.weight_decay);
    io::write_u32(os, static_cast<uint32_t>(group_lrs_.size()));
    for (const auto& [prefix, lr] : group_lrs_) {
        io::write_string(os, prefix);
        io::write_f64(os, lr);
    }
    io::write_u32(os, static_cast<uint32_t>(slots_.size()));
    for (const auto& [name, slot] : slots_) {
        io::write_string(os, name);
        io::write_i64(os, slot.t);
        io::write_tensor(os, slot.m);
        io::write_tensor(os, slot.v);
    }
}

AdamW AdamW::load(std::istream& is) {
    AdamWConfig cfg;
    cfg.lr = io::read_f64(is);
    cfg.beta1 = io::read_f64(is);
    cfg.beta2 = io::read_f64(is);
    cfg.eps = io::read_f64(is);
    cfg.weight_decay = io::read_f64(is);
    AdamW opt(cfg);
    uint32_t n_groups = io::read_u32(is);
    for (uint32_t i = 0; i < n_groups; ++i) {
        std::string prefix = io::read_string(is);
        opt.group_lrs_[prefix] = io::read_f64(is);
    }
    uint32_t n_slots = io::read_u32(is);
    for (uint32_t i = 0; i < n_slots; ++i) {
        std::string name = io::read_string(is);
        Slot slot;
        slot.t = io::read_i64(is);
        slot.m = io::read_tensor(is);
        slot.v = io::read_tensor(is);
        opt.slots_.emplace(std::move(name), std::move(slot));
    }
    return opt;
}

PlateauScheduler::PlateauScheduler(double factor, int patience)
    : factor_(factor), patience_(patience), best_(0.0) {
    if (!(factor > 0.0 && factor < 1.0)) throw std::invalid_argument("plateau factor must lie in (0,1)");
    if (patience < 1) throw std::invalid_argument("plateau patience must be at least 1");
}

bool PlateauScheduler::observe(double metric) {
    if (!std::isfinite(metric)) throw std::invalid_argument("plateau metric must be finite");
    if (!seen_any_ || metric > best_) {
        best_ = metric;
        seen_any_ = true;
        bad_epochs_ = 0;
        return false;
    }
    bad_epochs_ += 1;
    if (bad_epochs_ >= patience_) {
        bad_epochs_ = 0;
        return true;
    }
    return false;
}

void PlateauScheduler::save(std::ostream& os) const {
    io::write_f64(os, factor_);
    io::write_i64(os, patience_);
    io::write_f64(os, best_);
    io::write_i64(os, bad_epochs_);
    io::write_u32(os, seen_any_ ? 1u : 0u);
}

PlateauScheduler PlateauScheduler::load(std::istream& is) {
    double factor = io::read_f64(is);
    int patience = static_cast<int>(io::read_i64(is));
    PlateauScheduler sched(factor, patience);
    sched.best_ = io::read_f64(is);
    sched.bad_epochs_ = static_cast<int>(io::read_i64(is));
    sched.seen_any_ = io::read_u32(is) != 0;
    return sched;
}

}  // namespace flocode
