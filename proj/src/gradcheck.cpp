#include "ohprl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ohprl/errors.hpp"

namespace ohprl {

namespace {

// Visits every scalar of a ParamSet together with its analytic counterpart.
template <typename Fn>
void for_each_entry(ParamSet& p, const Gradient& g, Fn&& fn) {
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        auto& w = p.layers[k].weight;
        for (Eigen::Index i = 0; i < w.size(); ++i) fn(w.data()[i], g.weight[k].data()[i]);
        auto& b = p.layers[k].bias;
        for (Eigen::Index i = 0; i < b.size(); ++i) fn(b.data()[i], g.bias[k].data()[i]);
    }
}

}  // namespace

GradCheckReport check_gradients(std::vector<ParamSet> params, std::span<const Gradient> analytic,
                                const ParamLoss& loss, double step, double floor) {
    if (params.size() != analytic.size()) throw ShapeError("one gradient per parameter set is required");
    GradCheckReport report;
    for (std::size_t s = 0; s < params.size(); ++s) {
        std::size_t entry = 0;
        for_each_entry(params[s], analytic[s], [&](double& value, double grad) {
            const double saved = value;
            value = saved + step;
            const double plus = loss(params);
            value = saved - step;
            const double minus = loss(params);
            value = saved;
            const double fd = (plus - minus) / (2.0 * step);
            const double abs_err = std::abs(fd - grad);
            const double rel_err = abs_err / std::max({std::abs(fd), std::abs(grad), floor});
            if (rel_err > report.max_relative_error) {
                report.max_relative_error = rel_err;
                report.worst_param_set = s;
                report.worst_entry = entry;
            }
            report.max_absolute_error = std::max(report.max_absolute_error, abs_err);
            ++report.entries_checked;
            ++entry;
        });
    }
    return report;
}

}  // namespace ohprl
