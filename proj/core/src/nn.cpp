#include "unideal/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace unideal {

namespace {

constexpr double kKlFloor = 1e-12;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// log(sum exp(x_i)) with max subtraction; exact for the CE loss path.
double log_sum_exp(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

void validate_batch(const Batch& batch, int class_count) {
  if (batch.labels.empty() || batch.inputs.rows() != batch.labels.size()) {
    throw ShapeError("batch rows and label count must match and be >= 1");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= class_count) {
      throw InvalidInputError("label out of range: " + std::to_string(y));
    }
  }
  if (!all_finite(batch.inputs.data())) {
    throw InvalidInputError("batch inputs contain non-finite values");
  }
}

DenseLayer make_dense_layer(std::size_t in_dim, std::size_t out_dim, Activation act,
                            Rng& rng) {
  DenseLayer layer;
  layer.weights = Matrix(out_dim, in_dim);
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  for (auto& w : layer.weights.data()) {
    w = rng.uniform(-limit, limit);
  }
  layer.biases.assign(out_dim, 0.0);
  layer.activation = act;
  return layer;
}

std::size_t param_count(const std::vector<DenseLayer>& layers) {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    n += layer.weights.size() + layer.biases.size();
  }
  return n;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) {
    throw InvalidInputError("softmax of empty vector");
  }
  if (!all_finite(logits)) {
    throw InvalidInputError("softmax input contains non-finite values");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (auto& p : out) p /= z;
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto p = softmax(logits.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ShapeError("kl_divergence: length mismatch");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      kl += p[i] * std::log(p[i] / std::max(q[i], kKlFloor));
    }
  }
  return kl;
}

CrossEntropyResult cross_entropy_loss(const Matrix& logits, const std::vector<int>& labels) {
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  if (batch == 0 || batch != labels.size()) {
    throw ShapeError("cross_entropy_loss: logit rows and label count must match");
  }
  CrossEntropyResult result;
  result.logit_grad = Matrix(batch, classes);
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidInputError("cross_entropy_loss: label out of range: " + std::to_string(y));
    }
    const auto row = logits.row(r);
    total += log_sum_exp(row) - row[static_cast<std::size_t>(y)];
    const auto probs = softmax(row);
    auto grad = result.logit_grad.row(r);
    for (std::size_t c = 0; c < classes; ++c) {
      grad[c] = probs[c] / static_cast<double>(batch);
    }
    grad[static_cast<std::size_t>(y)] -= 1.0 / static_cast<double>(batch);
  }
  result.loss = total / static_cast<double>(batch);
  return result;
}

std::vector<Matrix> forward_layers(const std::vector<DenseLayer>& layers,
                                   const Matrix& input) {
  std::vector<Matrix> acts;
  acts.reserve(layers.size() + 1);
  acts.push_back(input);
  for (const auto& layer : layers) {
    const Matrix& x = acts.back();
    if (x.cols() != layer.in_dim()) {
      throw ShapeError("forward: input width " + std::to_string(x.cols()) +
                       " != layer in_dim " + std::to_string(layer.in_dim()));
    }
    Matrix y(x.rows(), layer.out_dim());
    for (std::size_t b = 0; b < x.rows(); ++b) {
      const auto xr = x.row(b);
      auto yr = y.row(b);
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        double acc = layer.biases[o];
        const auto wr = layer.weights.row(o);
        for (std::size_t i = 0; i < layer.in_dim(); ++i) {
          acc += wr[i] * xr[i];
        }
        yr[o] = layer.activation == Activation::kRelu ? std::max(acc, 0.0) : acc;
      }
    }
    acts.push_back(std::move(y));
  }
  return acts;
}

BackwardResult backward_layers(const std::vector<DenseLayer>& layers,
                               const std::vector<Matrix>& activations,
                               const Matrix& output_grad) {
  if (activations.size() != layers.size() + 1) {
    throw ShapeError("backward: activation count must be layer count + 1");
  }
  if (!layers.empty() && !output_grad.same_shape(activations.back())) {
    throw ShapeError("backward: output gradient shape mismatch");
  }
  BackwardResult result;
  result.grads = zero_gradients(layers);
  Matrix delta = output_grad;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& layer = layers[li];
    const Matrix& in = activations[li];
    const Matrix& out = activations[li + 1];
    // ReLU derivative at exactly 0 is 0: the mask is out > 0.
    if (layer.activation == Activation::kRelu) {
      for (std::size_t b = 0; b < delta.rows(); ++b) {
        for (std::size_t o = 0; o < delta.cols(); ++o) {
          if (!(out(b, o) > 0.0)) delta(b, o) = 0.0;
        }
      }
    }
    auto& grad = result.grads[li];
    for (std::size_t b = 0; b < delta.rows(); ++b) {
      const auto dr = delta.row(b);
      const auto xr = in.row(b);
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        auto gw = grad.weights.row(o);
        for (std::size_t i = 0; i < layer.in_dim(); ++i) {
          gw[i] += d * xr[i];
        }
        grad.biases[o] += d;
      }
    }
    Matrix prev(delta.rows(), layer.in_dim());
    for (std::size_t b = 0; b < delta.rows(); ++b) {
      const auto dr = delta.row(b);
      auto pr = prev.row(b);
      for (std::size_t o = 0; o < layer.out_dim(); ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        const auto wr = layer.weights.row(o);
        for (std::size_t i = 0; i < layer.in_dim(); ++i) {
          pr[i] += d * wr[i];
        }
      }
    }
    delta = std::move(prev);
  }
  result.input_grad = std::move(delta);
  return result;
}

ForwardBackwardResult forward_backward(const std::vector<DenseLayer>& layers,
                                       const Matrix& input,
                                       const Matrix& loss_grad_at_output) {
  ForwardBackwardResult result;
  result.activations = forward_layers(layers, input);
  auto back = backward_layers(layers, result.activations, loss_grad_at_output);
  result.grads = std::move(back.grads);
  result.input_grad = std::move(back.input_grad);
  return result;
}

void sgd_step(std::vector<DenseLayer>& layers, const GradientSet& grads, double lr) {
  if (lr < 0.0) {
    throw InvalidInputError("sgd_step: learning rate must be >= 0");
  }
  if (layers.size() != grads.size()) {
    throw ShapeError("sgd_step: layer and gradient counts differ");
  }
  for (std::size_t li = 0; li < layers.size(); ++li) {
    auto& layer = layers[li];
    const auto& grad = grads[li];
    if (!layer.weights.same_shape(grad.weights) ||
        layer.biases.size() != grad.biases.size()) {
      throw ShapeError("sgd_step: gradient shape mismatch at layer " + std::to_string(li));
    }
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      layer.weights.data()[i] -= lr * grad.weights.data()[i];
    }
    for (std::size_t i = 0; i < layer.biases.size(); ++i) {
      layer.biases[i] -= lr * grad.biases[i];
    }
  }
}

GradientSet zero_gradients(const std::vector<DenseLayer>& layers) {
  GradientSet grads;
  grads.reserve(layers.size());
  for (const auto& layer : layers) {
    grads.push_back({Matrix(layer.out_dim(), layer.in_dim()),
                     std::vector<double>(layer.out_dim(), 0.0)});
  }
  return grads;
}

double finite_diff_check(const std::function<double()>& loss_eval,
                         std::vector<DenseLayer>& params, const GradientSet& analytic,
                         double epsilon) {
  if (epsilon <= 0.0) {
    throw InvalidInputError("finite_diff_check: epsilon must be positive");
  }
  if (params.size() != analytic.size()) {
    throw ShapeError("finite_diff_check: gradient set does not match parameters");
  }
  const auto probe = [&](double& coord, double analytic_grad) {
    const double saved = coord;
    coord = saved + epsilon;
    const double up = loss_eval();
    coord = saved - epsilon;
    const double down = loss_eval();
    coord = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw DiagnosticError("finite_diff_check: loss evaluated to a non-finite value");
    }
    const double numeric = (up - down) / (2.0 * epsilon);
    return std::abs(analytic_grad - numeric) / std::max(1.0, std::abs(numeric));
  };
  double worst = 0.0;
  for (std::size_t li = 0; li < params.size(); ++li) {
    auto& layer = params[li];
    const auto& grad = analytic[li];
    if (!layer.weights.same_shape(grad.weights) ||
        layer.biases.size() != grad.biases.size()) {
      throw ShapeError("finite_diff_check: gradient shape mismatch at layer " +
                       std::to_string(li));
    }
    for (std::size_t i = 0; i < layer.weights.size(); ++i) {
      worst = std::max(worst, probe(layer.weights.data()[i], grad.weights.data()[i]));
    }
    for (std::size_t i = 0; i < layer.biases.size(); ++i) {
      worst = std::max(worst, probe(layer.biases[i], grad.biases[i]));
    }
  }
  return worst;
}

}  // namespace unideal
