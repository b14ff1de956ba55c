#include "ohprl/nets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ohprl/errors.hpp"
#include "ohprl/rng.hpp"

namespace ohprl {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

bool finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, std::string_view stage) {
    if (!finite(m)) throw NumericalError(std::string(stage));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Eigen::Index action_dim_of(const ParamSet& policy) {
    if (policy.head != Head::Policy) throw ShapeError("expected a policy head");
    const auto out = policy.output_dim();
    if (out % 2 != 0) throw ShapeError("policy output width must be even");
    return out / 2;
}

}  // namespace

std::string_view to_string(Head head) {
    switch (head) {
        case Head::Policy: return "policy";
        case Head::Critic: return "critic";
        case Head::Gate: return "gate";
    }
    return "critic";
}

Head head_from_string(std::string_view name) {
    if (name == "policy") return Head::Policy;
    if (name == "critic") return Head::Critic;
    if (name == "gate") return Head::Gate;
    throw ConfigError("unknown head tag: " + std::string(name));
}

std::string_view to_string(Activation act) {
    return act == Activation::Tanh ? "tanh" : "linear";
}

Activation activation_from_string(std::string_view name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "linear") return Activation::Linear;
    throw ConfigError("unknown activation: " + std::string(name));
}

// ---------------------------------------------------------------------------

Eigen::Index ParamSet::input_dim() const {
    return layers.empty() ? 0 : layers.front().weight.cols();
}

Eigen::Index ParamSet::output_dim() const {
    return layers.empty() ? 0 : layers.back().weight.rows();
}

std::size_t ParamSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

bool ParamSet::all_finite() const {
    return std::all_of(layers.begin(), layers.end(), [](const Layer& l) {
        return l.weight.allFinite() && l.bias.allFinite();
    });
}

std::vector<int> ParamSet::widths() const {
    std::vector<int> w;
    if (layers.empty()) return w;
    w.push_back(static_cast<int>(layers.front().weight.cols()));
    for (const auto& l : layers) w.push_back(static_cast<int>(l.weight.rows()));
    return w;
}

Gradient Gradient::zeros_like(const ParamSet& params) {
    Gradient g;
    g.weight.reserve(params.layers.size());
    g.bias.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
        g.bias.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
}

double Gradient::squared_norm() const {
    double s = 0.0;
    for (const auto& w : weight) s += w.squaredNorm();
    for (const auto& b : bias) s += b.squaredNorm();
    return s;
}

double Gradient::norm() const { return std::sqrt(squared_norm()); }

bool Gradient::all_finite() const {
    return std::all_of(weight.begin(), weight.end(), [](const Matrix& m) { return m.allFinite(); }) &&
           std::all_of(bias.begin(), bias.end(), [](const Vector& v) { return v.allFinite(); });
}

Gradient& Gradient::operator+=(const Gradient& other) {
    if (other.weight.size() != weight.size()) throw ShapeError("gradient layer count mismatch");
    for (std::size_t k = 0; k < weight.size(); ++k) {
        weight[k] += other.weight[k];
        bias[k] += other.bias[k];
    }
    return *this;
}

Gradient& Gradient::operator*=(double scale) {
    for (auto& w : weight) w *= scale;
    for (auto& b : bias) b *= scale;
    return *this;
}

// ---------------------------------------------------------------------------

ParamSet init_params(std::span<const int> widths, Head head, std::uint64_t seed) {
    if (widths.size() < 2) throw ConfigError("layer spec needs at least an input and an output width");
    for (int w : widths) {
        if (w <= 0) throw ConfigError("zero-width layer in layer spec");
    }
    if (head == Head::Policy && widths.back() % 2 != 0) {
        throw ConfigError("policy output width must be 2 * action_dim");
    }
    if ((head == Head::Critic || head == Head::Gate) && widths.back() != 1) {
        throw ConfigError("critic and gate heads have a single output");
    }

    Rng rng(seed);
    ParamSet p;
    p.head = head;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
        const int in = widths[k];
        const int out = widths[k + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Layer layer;
        layer.weight.resize(out, in);
        for (int c = 0; c < in; ++c) {
            for (int r = 0; r < out; ++r) layer.weight(r, c) = uniform(rng, -bound, bound);
        }
        layer.bias = Vector::Zero(out);
        layer.activation = (k + 2 == widths.size()) ? Activation::Linear : Activation::Tanh;
        p.layers.push_back(std::move(layer));
    }
    return p;
}

namespace {

// Eigen evaluates tanh on doubles one scalar at a time; exp is vectorized.
// |z| > 20 already rounds to +-1.
void hidden_tanh(Matrix& z) {
    const auto e = (2.0 * z.array().max(-20.0).min(20.0)).exp();
    z.array() = 1.0 - 2.0 / (e + 1.0);
}

}  // namespace

Matrix forward_raw(const ParamSet& params, const Matrix& inputs, ForwardCache* cache) {
    if (params.layers.empty()) throw ShapeError("empty parameter set");
    if (inputs.rows() != params.input_dim()) {
        throw ShapeError("input width " + std::to_string(inputs.rows()) + " does not match network input " +
                         std::to_string(params.input_dim()));
    }
    if (cache != nullptr) {
        cache->activations.clear();
        cache->activations.reserve(params.layers.size() + 1);
        cache->activations.push_back(inputs);
    }
    Matrix x = inputs;
    for (const auto& layer : params.layers) {
        Matrix z = layer.weight * x;
        z.colwise() += layer.bias;
        if (layer.activation == Activation::Tanh) hidden_tanh(z);
        x = std::move(z);
        if (cache != nullptr) cache->activations.push_back(x);
    }
    return x;
}

Matrix backward_raw(const ParamSet& params, const ForwardCache& cache, const Matrix& d_raw,
                    Gradient* grad) {
    if (cache.activations.size() != params.layers.size() + 1) {
        throw ShapeError("forward cache does not match parameter set");
    }
    Matrix delta = d_raw;
    for (std::size_t k = params.layers.size(); k-- > 0;) {
        const auto& layer = params.layers[k];
        if (layer.activation == Activation::Tanh) {
            const auto& y = cache.activations[k + 1];
            delta = (delta.array() * (1.0 - y.array().square())).matrix();
        }
        if (grad != nullptr) {
            grad->weight[k].noalias() += delta * cache.activations[k].transpose();
            grad->bias[k] += delta.rowwise().sum();
        }
        delta = layer.weight.transpose() * delta;
    }
    return delta;
}

Matrix apply_head(Head head, const Matrix& raw) {
    switch (head) {
        case Head::Critic: return raw;
        case Head::Gate: return raw.unaryExpr([](double v) { return sigmoid(v); });
        case Head::Policy: {
            Matrix out = raw;
            const auto d = raw.rows() / 2;
            out.bottomRows(d) = raw.bottomRows(d).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
            return out;
        }
    }
    return raw;
}

Matrix head_backward(Head head, const Matrix& raw, const Matrix& head_out, const Matrix& d_out) {
    switch (head) {
        case Head::Critic: return d_out;
        case Head::Gate: return (d_out.array() * head_out.array() * (1.0 - head_out.array())).matrix();
        case Head::Policy: {
            Matrix d = d_out;
            const auto dim = raw.rows() / 2;
            for (Eigen::Index c = 0; c < raw.cols(); ++c) {
                for (Eigen::Index r = dim; r < 2 * dim; ++r) {
                    const double v = raw(r, c);
                    if (!(v > kLogStdMin && v < kLogStdMax)) d(r, c) = 0.0;
                }
            }
            return d;
        }
    }
    return d_out;
}

Vector forward(const ParamSet& params, const Vector& x) {
    return forward_batch(params, x).col(0);
}

Matrix forward_batch(const ParamSet& params, const Matrix& inputs) {
    return apply_head(params.head, forward_raw(params, inputs));
}

ValueAndGrad value_and_grad(const ParamSet& params, const Matrix& inputs, const OutputLoss& loss,
                            std::string_view stage) {
    if (!finite(inputs)) throw NumericalError(std::string(stage) + ".inputs");
    ForwardCache cache;
    const Matrix raw = forward_raw(params, inputs, &cache);
    require_finite(raw, std::string(stage) + ".forward");
    const Matrix out = apply_head(params.head, raw);
    Matrix d_out = Matrix::Zero(out.rows(), out.cols());
    ValueAndGrad result;
    result.loss = loss(out, d_out);
    if (!std::isfinite(result.loss)) throw NumericalError(std::string(stage) + ".loss");
    if (d_out.rows() != out.rows() || d_out.cols() != out.cols()) {
        throw ShapeError("loss gradient has the wrong shape");
    }
    result.grad = Gradient::zeros_like(params);
    backward_raw(params, cache, head_backward(params.head, raw, out, d_out), &result.grad);
    if (!result.grad.all_finite()) throw NumericalError(std::string(stage) + ".backward");
    return result;
}

// ---------------------------------------------------------------------------

PolicyBatch policy_sample_batch(const ParamSet& policy, const Matrix& states, const Matrix& noise) {
    const auto d = action_dim_of(policy);
    if (noise.rows() != d || noise.cols() != states.cols()) throw ShapeError("noise shape mismatch");
    PolicyBatch b;
    b.raw = forward_raw(policy, states, &b.cache);
    b.mean = b.raw.topRows(d);
    b.log_std = b.raw.bottomRows(d).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    b.noise = noise;
    b.pre_squash = b.mean + (b.log_std.array().exp() * noise.array()).matrix();
    b.action = b.pre_squash.array().tanh().matrix();
    const auto n = states.cols();
    b.log_prob.resize(n);
    for (Eigen::Index c = 0; c < n; ++c) {
        double lp = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const double a = b.action(i, c);
            lp += -0.5 * noise(i, c) * noise(i, c) - b.log_std(i, c) - kHalfLog2Pi -
                  std::log(1.0 - a * a + kTanhEpsilon);
        }
        b.log_prob(c) = lp;
    }
    return b;
}

PolicyOutput policy_sample(const ParamSet& policy, const Vector& state, const Vector& noise) {
    const PolicyBatch b = policy_sample_batch(policy, state, noise);
    PolicyOutput out;
    out.mean = b.mean.col(0);
    out.log_std = b.log_std.col(0);
    out.pre_squash = b.pre_squash.col(0);
    out.action = b.action.col(0);
    out.log_prob = b.log_prob(0);
    return out;
}

Vector policy_mean_action(const ParamSet& policy, const Vector& state) {
    const auto d = action_dim_of(policy);
    const Matrix raw = forward_raw(policy, state);
    return raw.topRows(d).col(0).array().tanh().matrix();
}

void policy_backward(const ParamSet& policy, const PolicyBatch& batch, const Matrix& d_action,
                     const Vector& d_log_prob, Gradient& grad) {
    const auto d = batch.mean.rows();
    const auto n = batch.mean.cols();
    Matrix d_raw(2 * d, n);
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index i = 0; i < d; ++i) {
            const double a = batch.action(i, c);
            const double one_minus = 1.0 - a * a;
            const double dlp_du = 2.0 * a * one_minus / (one_minus + kTanhEpsilon);
            const double d_u = d_action(i, c) * one_minus + d_log_prob(c) * dlp_du;
            const double std_dev = std::exp(batch.log_std(i, c));
            d_raw(i, c) = d_u;
            double d_ls = d_u * std_dev * batch.noise(i, c) - d_log_prob(c);
            const double raw_ls = batch.raw(d + i, c);
            if (!(raw_ls > kLogStdMin && raw_ls < kLogStdMax)) d_ls = 0.0;
            d_raw(d + i, c) = d_ls;
        }
    }
    backward_raw(policy, batch.cache, d_raw, &grad);
}

// ---------------------------------------------------------------------------

Matrix critic_input(const Matrix& states, const Matrix& actions) {
    if (states.cols() != actions.cols()) throw ShapeError("state/action batch size mismatch");
    Matrix x(states.rows() + actions.rows(), states.cols());
    x.topRows(states.rows()) = states;
    x.bottomRows(actions.rows()) = actions;
    return x;
}

Vector q_batch(const ParamSet& critic, const Matrix& states, const Matrix& actions, ForwardCache* cache) {
    if (critic.head != Head::Critic) throw ShapeError("expected a critic head");
    return forward_raw(critic, critic_input(states, actions), cache).row(0).transpose();
}

double q_value(const CriticPair& critics, const Vector& state, const Vector& action, Reduce reduce) {
    const double q1 = q_batch(critics.first, state, action)(0);
    if (reduce == Reduce::First) return q1;
    const double q2 = q_batch(critics.second, state, action)(0);
    return std::min(q1, q2);
}

double gate_value(const ParamSet& gate, const Vector& state) {
    return gate_batch(gate, state)(0);
}

Vector gate_batch(const ParamSet& gate, const Matrix& states, ForwardCache* cache) {
    if (gate.head != Head::Gate) throw ShapeError("expected a gate head");
    const Matrix raw = forward_raw(gate, states, cache);
    return apply_head(Head::Gate, raw).row(0).transpose();
}

// ---------------------------------------------------------------------------

bool same_manifest(const ParamSet& a, const ParamSet& b) {
    if (a.head != b.head || a.layers.size() != b.layers.size()) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        const auto& la = a.layers[k];
        const auto& lb = b.layers[k];
        if (la.weight.rows() != lb.weight.rows() || la.weight.cols() != lb.weight.cols() ||
            la.activation != lb.activation) {
            return false;
        }
    }
    return true;
}

ParamSet polyak_update(const ParamSet& target, const ParamSet& online, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("polyak tau must lie in [0, 1]");
    if (!same_manifest(target, online)) throw ConfigError("polyak update on mismatched manifests");
    ParamSet out = target;
    for (std::size_t k = 0; k < out.layers.size(); ++k) {
        out.layers[k].weight = (1.0 - tau) * target.layers[k].weight + tau * online.layers[k].weight;
        out.layers[k].bias = (1.0 - tau) * target.layers[k].bias + tau * online.layers[k].bias;
    }
    out.version = target.version + 1;
    return out;
}

double max_abs_difference(const ParamSet& a, const ParamSet& b) {
    if (!same_manifest(a, b)) throw ShapeError("manifest mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
        m = std::max(m, (a.layers[k].weight - b.layers[k].weight).cwiseAbs().maxCoeff());
        m = std::max(m, (a.layers[k].bias - b.layers[k].bias).cwiseAbs().maxCoeff());
    }
    return m;
}

Adam::Adam(const ParamSet& params, AdamConfig config)
    : config_(config), m_(Gradient::zeros_like(params)), v_(Gradient::zeros_like(params)) {}

ParamSet Adam::step(const ParamSet& params, const Gradient& grad, std::string_view stage) {
    if (!grad.all_finite()) throw NumericalError(std::string(stage));
    if (m_.weight.size() != params.layers.size()) throw ShapeError("optimizer state does not match parameters");
    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double lr = config_.learning_rate;
    const double eps = config_.epsilon;

    ParamSet out = params;
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
    };
    for (std::size_t k = 0; k < out.layers.size(); ++k) {
        update(out.layers[k].weight, m_.weight[k], v_.weight[k], grad.weight[k]);
        update(out.layers[k].bias, m_.bias[k], v_.bias[k], grad.bias[k]);
    }
    if (!out.all_finite()) throw NumericalError(std::string(stage));
    out.version = params.version + 1;
    return out;
}

}  // namespace ohprl
