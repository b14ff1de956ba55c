#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace ohprl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Tanh, Linear };

/// What the final layer output means.
///   Policy: 2*d rows, [mean; log_std] with log_std clamped.
///   Critic: one linear scalar.
///   Gate:   one scalar passed through a sigmoid.
enum class Head { Policy, Critic, Gate };

std::string_view to_string(Head head);
Head head_from_string(std::string_view name);
std::string_view to_string(Activation act);
Activation activation_from_string(std::string_view name);

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kTanhEpsilon = 1e-6;

struct Layer {
    Matrix weight;  // [out x in]
    Vector bias;    // [out]
    Activation activation = Activation::Tanh;
};

/// Parameters of one dense network plus its head tag. Treated as an immutable
/// value once published; updates produce a new version.
struct ParamSet {
    std::vector<Layer> layers;
    Head head = Head::Critic;
    std::uint64_t version = 0;

    Eigen::Index input_dim() const;
    Eigen::Index output_dim() const;
    std::size_t parameter_count() const;
    bool all_finite() const;
    /// Widths [in, h1, ..., out].
    std::vector<int> widths() const;
};

/// Same-shaped container for a gradient (or any per-parameter array).
struct Gradient {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;

    static Gradient zeros_like(const ParamSet& params);
    double squared_norm() const;
    double norm() const;
    bool all_finite() const;
    Gradient& operator+=(const Gradient& other);
    Gradient& operator*=(double scale);
};

/// Hidden layers use tanh, the output layer is linear; the head decides the
/// final transform. Weights are uniform in +-1/sqrt(fan_in), biases zero.
/// Throws ConfigError for fewer than two widths or any non-positive width.
ParamSet init_params(std::span<const int> widths, Head head, std::uint64_t seed);

/// Per-layer activations recorded during a batched forward pass.
/// activations[0] is the input, activations[k] the output of layer k.
struct ForwardCache {
    std::vector<Matrix> activations;
};

/// Raw network output (before the head transform) for a batch stored column-wise.
Matrix forward_raw(const ParamSet& params, const Matrix& inputs, ForwardCache* cache = nullptr);

/// Backpropagates d(loss)/d(raw output) through the layers, accumulating into
/// grad when non-null. Returns d(loss)/d(inputs).
Matrix backward_raw(const ParamSet& params, const ForwardCache& cache, const Matrix& d_raw,
                    Gradient* grad);

/// Applies the head transform to a raw output batch.
Matrix apply_head(Head head, const Matrix& raw);

/// Chains d(loss)/d(head output) back to d(loss)/d(raw output).
Matrix head_backward(Head head, const Matrix& raw, const Matrix& head_out, const Matrix& d_out);

/// Single-input evaluation with the head applied. Throws ShapeError on width mismatch.
Vector forward(const ParamSet& params, const Vector& x);

/// Batched evaluation with the head applied.
Matrix forward_batch(const ParamSet& params, const Matrix& inputs);

/// Loss on a batch of head outputs; must fill d_output with d(loss)/d(output).
using OutputLoss = std::function<double(const Matrix& output, Matrix& d_output)>;

struct ValueAndGrad {
    double loss = 0.0;
    Gradient grad;
};

/// Reverse-mode gradient of a loss of one network's head output.
/// Throws NumericalError naming `stage` if anything non-finite appears.
ValueAndGrad value_and_grad(const ParamSet& params, const Matrix& inputs, const OutputLoss& loss,
                            std::string_view stage = "value_and_grad");

// ---------------------------------------------------------------------------
// Tanh-squashed Gaussian policy

struct PolicyOutput {
    Vector mean;
    Vector log_std;
    Vector pre_squash;
    Vector action;
    double log_prob = 0.0;
};

/// u = mean + exp(log_std) * noise, a = tanh(u); log_prob includes the
/// change-of-variables correction with a 1e-6 stabilizer.
PolicyOutput policy_sample(const ParamSet& policy, const Vector& state, const Vector& noise);

/// Deterministic action tanh(mean).
Vector policy_mean_action(const ParamSet& policy, const Vector& state);

/// Batched policy evaluation; keeps what the backward pass needs.
struct PolicyBatch {
    ForwardCache cache;
    Matrix raw;       // [2d x n] before clamping
    Matrix mean;      // [d x n]
    Matrix log_std;   // [d x n] clamped
    Matrix noise;     // [d x n]
    Matrix pre_squash;
    Matrix action;
    Vector log_prob;  // [n]
};

PolicyBatch policy_sample_batch(const ParamSet& policy, const Matrix& states, const Matrix& noise);

/// Accumulates d(loss)/d(phi) given d(loss)/d(action) [d x n] and
/// d(loss)/d(log_prob) [n]. Noise is held fixed (reparameterization).
void policy_backward(const ParamSet& policy, const PolicyBatch& batch, const Matrix& d_action,
                     const Vector& d_log_prob, Gradient& grad);

// ---------------------------------------------------------------------------
// Twin critics

struct CriticPair {
    ParamSet first;
    ParamSet second;
};

enum class Reduce { Min, First };

/// Q(s, a) with the two heads reduced by min, or head one only.
double q_value(const CriticPair& critics, const Vector& state, const Vector& action, Reduce reduce);

/// Stacks states over actions column-wise: [s; a].
Matrix critic_input(const Matrix& states, const Matrix& actions);

/// Row vector of Q values for one head over a batch.
Vector q_batch(const ParamSet& critic, const Matrix& states, const Matrix& actions,
               ForwardCache* cache = nullptr);

// ---------------------------------------------------------------------------
// Gate

double gate_value(const ParamSet& gate, const Vector& state);
Vector gate_batch(const ParamSet& gate, const Matrix& states, ForwardCache* cache = nullptr);

// ---------------------------------------------------------------------------
// Parameter updates

/// target' = (1 - tau) * target + tau * online, with the version bumped.
/// Throws ConfigError if the manifests differ or tau is outside [0, 1].
ParamSet polyak_update(const ParamSet& target, const ParamSet& online, double tau);

/// Max absolute entry-wise difference between two same-shaped ParamSets.
double max_abs_difference(const ParamSet& a, const ParamSet& b);

bool same_manifest(const ParamSet& a, const ParamSet& b);

struct AdamConfig {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with per-parameter second-moment scaling. Each step returns a new
/// ParamSet with the version bumped; the input is left untouched.
class Adam {
public:
    Adam() = default;
    Adam(const ParamSet& params, AdamConfig config);

    ParamSet step(const ParamSet& params, const Gradient& grad, std::string_view stage);

    std::uint64_t steps_taken() const { return t_; }

private:
    AdamConfig config_;
    Gradient m_;
    Gradient v_;
    std::uint64_t t_ = 0;
};

}  // namespace ohprl
