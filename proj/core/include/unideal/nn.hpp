#pragma once

#include <functional>
#include <span>
#include <vector>

#include "unideal/matrix.hpp"
#include "unideal/rng.hpp"

namespace unideal {

enum class Activation { kRelu, kIdentity };

// One fully connected layer: y = act(W x + b), W is out_dim x in_dim.
struct DenseLayer {
  Matrix weights;
  std::vector<double> biases;
  Activation activation = Activation::kIdentity;

  std::size_t in_dim() const { return weights.cols(); }
  std::size_t out_dim() const { return weights.rows(); }
};

// A training batch: inputs are B x in_dim, labels are class indices in [0, C).
struct Batch {
  Matrix inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

void validate_batch(const Batch& batch, int class_count);

struct LayerGrad {
  Matrix weights;
  std::vector<double> biases;
};

// Per-layer gradients, shape-matched to the owning layer sequence.
using GradientSet = std::vector<LayerGrad>;

// Uniform init in +-sqrt(6 / (fan_in + fan_out)), biases zero. Weights are
// drawn row-major so fixed-seed fixtures stay stable.
DenseLayer make_dense_layer(std::size_t in_dim, std::size_t out_dim, Activation act,
                            Rng& rng);

std::size_t param_count(const std::vector<DenseLayer>& layers);

// Numerically stabilized (max-subtracted) softmax.
std::vector<double> softmax(std::span<const double> logits);
Matrix softmax_rows(const Matrix& logits);

// KL(p || q) = sum p_i ln(p_i / q_i), with 0 * ln(0/q) = 0 and q floored at
// 1e-12 so underflowed softmax outputs cannot blow the loss up.
double kl_divergence(std::span<const double> p, std::span<const double> q);

struct CrossEntropyResult {
  double loss = 0.0;     // batch mean of -ln softmax(logits)[label]
  Matrix logit_grad;     // (softmax - one_hot) / B per row
};

CrossEntropyResult cross_entropy_loss(const Matrix& logits, const std::vector<int>& labels);

// activations[0] is the input, activations[i + 1] the output of layer i.
std::vector<Matrix> forward_layers(const std::vector<DenseLayer>& layers,
                                   const Matrix& input);

struct BackwardResult {
  GradientSet grads;
  Matrix input_grad;  // gradient wrt the layer-chain input, for chaining blocks
};

BackwardResult backward_layers(const std::vector<DenseLayer>& layers,
                               const std::vector<Matrix>& activations,
                               const Matrix& output_grad);

struct ForwardBackwardResult {
  std::vector<Matrix> activations;
  GradientSet grads;
  Matrix input_grad;
};

// Exact analytic backpropagation of the composed chain under the supplied
// gradient at the chain output.
ForwardBackwardResult forward_backward(const std::vector<DenseLayer>& layers,
                                       const Matrix& input,
                                       const Matrix& loss_grad_at_output);

// p <- p - lr * g for every parameter.
void sgd_step(std::vector<DenseLayer>& layers, const GradientSet& grads, double lr);

GradientSet zero_gradients(const std::vector<DenseLayer>& layers);

// Central-difference check of `analytic` against `loss_eval`, which must be a
// deterministic function of `params`. Returns the max over coordinates of
// |analytic - numeric| / max(1, |numeric|).
double finite_diff_check(const std::function<double()>& loss_eval,
                         std::vector<DenseLayer>& params, const GradientSet& analytic,
                         double epsilon);

}  // namespace unideal
