#pragma once

// Independent reference computations for the test suite. Everything here is
// written with plain loops and std:: math so it shares no code path with the
// Eigen-based implementation it checks.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "ohprl/nets.hpp"

namespace oracle {

using ohprl::Activation;
using ohprl::Gradient;
using ohprl::Head;
using ohprl::ParamSet;

inline std::vector<double> dense(const ParamSet& p, std::vector<double> x) {
    for (const auto& layer : p.layers) {
        std::vector<double> y(static_cast<std::size_t>(layer.weight.rows()));
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            double acc = layer.bias(r);
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) acc += layer.weight(r, c) * x[c];
            y[r] = layer.activation == Activation::Tanh ? std::tanh(acc) : acc;
        }
        x = std::move(y);
    }
    return x;
}

inline std::vector<double> to_std(const ohprl::Vector& v) { return {v.data(), v.data() + v.size()}; }

inline double critic(const ParamSet& q, const ohprl::Vector& s, const ohprl::Vector& a) {
    std::vector<double> x = to_std(s);
    for (Eigen::Index i = 0; i < a.size(); ++i) x.push_back(a(i));
    return dense(q, x)[0];
}

inline double gate(const ParamSet& g, const ohprl::Vector& s) {
    return 1.0 / (1.0 + std::exp(-dense(g, to_std(s))[0]));
}

struct Sample {
    std::vector<double> action;
    double log_prob = 0.0;
};

inline Sample policy(const ParamSet& p, const ohprl::Vector& s, const ohprl::Vector& noise) {
    const std::vector<double> raw = dense(p, to_std(s));
    const std::size_t d = raw.size() / 2;
    Sample out;
    for (std::size_t i = 0; i < d; ++i) {
        const double ls = std::clamp(raw[d + i], ohprl::kLogStdMin, ohprl::kLogStdMax);
        const double u = raw[i] + std::exp(ls) * noise(static_cast<Eigen::Index>(i));
        const double a = std::tanh(u);
        const double z = (u - raw[i]) / std::exp(ls);
        out.log_prob += -0.5 * z * z - ls - 0.5 * std::log(2.0 * std::numbers::pi) -
                        std::log(1.0 - a * a + ohprl::kTanhEpsilon);
        out.action.push_back(a);
    }
    return out;
}

/// Visits every scalar parameter of a ParamSet in (layer, weight then bias) order.
template <typename Fn>
void for_each_scalar(ParamSet& p, Fn&& fn) {
    for (auto& layer : p.layers) {
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) fn(layer.weight.data()[i]);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) fn(layer.bias.data()[i]);
    }
}

inline std::vector<double> flatten(const Gradient& g) {
    std::vector<double> out;
    for (std::size_t k = 0; k < g.weight.size(); ++k) {
        out.insert(out.end(), g.weight[k].data(), g.weight[k].data() + g.weight[k].size());
        out.insert(out.end(), g.bias[k].data(), g.bias[k].data() + g.bias[k].size());
    }
    return out;
}

/// Central differences of loss() with respect to every scalar of *target.
inline std::vector<double> finite_difference(ParamSet& target, const std::function<double()>& loss,
                                             double h = 1e-5) {
    std::vector<double> out;
    for_each_scalar(target, [&](double& v) {
        const double saved = v;
        v = saved + h;
        const double plus = loss();
        v = saved - h;
        const double minus = loss();
        v = saved;
        out.push_back((plus - minus) / (2.0 * h));
    });
    return out;
}

/// max |g - fd| / max(|g|, |fd|, floor) over all entries.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

/// Upper-tail probability of a chi-square variable, via the regularized
/// incomplete gamma series (fine for the small degrees of freedom used here).
inline double chi_square_survival(double x, int dof) {
    const double a = 0.5 * dof;
    const double z = 0.5 * x;
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 500; ++n) {
        term *= z / (a + n);
        sum += term;
        if (term < sum * 1e-15) break;
    }
    const double lower = std::exp(-z + a * std::log(z) - std::lgamma(a)) * sum;
    return 1.0 - lower;
}

}  // namespace oracle
