#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "flocode/params.hpp"
#include "flocode/tensor.hpp"

namespace flocode {

struct AdamWConfig {
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    void validate() const;
};

/// Adaptive-moment optimizer with decoupled weight decay. Parameters can be
/// assigned to named groups by prefix; the longest matching prefix decides a
/// parameter's learning rate, everything else uses the base rate. Moment
/// estimates and per-parameter step counts are created lazily on first use
/// and round-trip bit-exactly through save/load.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {});

    /// Registers (or retunes) a prefix group, e.g. set_group_lr("relrep.", 1e-5).
    void set_group_lr(const std::string& prefix, double lr);
    /// Learning rate a parameter with this name would receive right now.
    double lr_for(const std::string& name) const;
    const std::map<std::string, double>& groups() const { return group_lrs_; }

    /// Applies one update using the supplied gradients. Names must exist in
    /// the store and shapes must match; parameters without a gradient entry
    /// are left untouched (no decay either, so "not part of this step").
    void step(ParamStore& store, const std::map<std::string, Tensor>& grads);

    const AdamWConfig& config() const { return cfg_; }
    long step_count(const std::string& name) const;

    void save(std::ostream& os) const;
    static AdamW load(std::istream& is);

private:
    struct Slot {
        Tensor m;
        Tensor v;
        long t = 0;
    };
    AdamWConfig cfg_;
    std::map<std::string, double> group_lrs_;
    std::map<std::string, Slot> slots_;
};

/// Reduce-on-plateau policy for a higher-is-better validation metric: after
/// `patience` consecutive epochs without strict improvement the caller is
/// told to scale the learning rate by `factor`, and the bad-epoch counter
/// restarts while the best-seen value is kept.
class PlateauScheduler {
public:
    PlateauScheduler(double factor = 0.5, int patience = 3);

    /// Feed one epoch's metric; returns true when the rate should be reduced.
    bool observe(double metric);

    double factor() const { return factor_; }
    int patience() const { return patience_; }
    double best() const { return best_; }
    int bad_epochs() const { return bad_epochs_; }

    void save(std::ostream& os) const;
    static PlateauScheduler load(std::istream& is);

private:
    double factor_;
    int patience_;
    double best_;
    int bad_epochs_ = 0;
    bool seen_any_ = false;
};

}  // namespace flocode
