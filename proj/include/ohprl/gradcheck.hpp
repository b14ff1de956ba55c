#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ohprl/nets.hpp"

namespace ohprl {

/// Scalar loss evaluated over a list of parameter sets.
using ParamLoss = std::function<double(std::span<const ParamSet>)>;

struct GradCheckReport {
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    std::size_t entries_checked = 0;
    std::size_t worst_param_set = 0;
    std::size_t worst_entry = 0;
};

/// Compares analytic gradients against central finite differences, entry by
/// entry over every parameter set. Relative error uses
/// |g - fd| / max(|g|, |fd|, floor) so entries that are zero in both don't blow up.
GradCheckReport check_gradients(std::vector<ParamSet> params, std::span<const Gradient> analytic,
                                const ParamLoss& loss, double step = 1e-5, double floor = 1e-6);

}  // namespace ohprl
