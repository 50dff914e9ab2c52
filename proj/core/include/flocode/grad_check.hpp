#pragma once

#include <functional>
#include <string>

#include "flocode/params.hpp"

namespace flocode {

struct GradReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    int worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
    long probes = 0;
};

/// Compares reverse-mode gradients of a scalar objective against central
/// differences. `build` must construct the full graph from the store's
/// current values each call. Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8);
/// non-finite probe values abort with an exception. When `param_prefix` is
/// non-empty, only parameters whose names start with it are probed.
GradReport check_gradients(ParamStore& store,
                           const std::function<ad::VarPtr(ParamContext&)>& build,
                           double eps = 1e-5,
                           int max_probes_per_param = -1,
                           Rng* probe_rng = nullptr,
                           const std::string& param_prefix = "");

}  // namespace flocode
