#pragma once

// Skip-gram negative-sampling objective for one (center, context) pair.
//
// With hidden vector h (mean of the center's input rows), one positive
// output row o+ and negative output rows o-_k:
//
//   L = -log s(o+ . h) - sum_k log s(-o-_k . h),   s = logistic sigmoid
//
//   dL/dh   = sum_t (s(o_t . h) - label_t) o_t
//   dL/do_t = (s(o_t . h) - label_t) h

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace varfam::sgns {

template <class T>
T sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// -log s(x) for label 1, -log s(-x) for label 0, computed stably.
template <class T>
T pair_loss(T score, bool positive) {
  const T x = positive ? score : -score;
  return x >= 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

/// Loss and analytic gradients. `outputs[0]` is the positive target, the
/// rest are negatives. `grad_hidden` is overwritten; `grad_outputs[t]` is
/// overwritten for each target.
template <class T>
T loss_and_gradient(std::span<const T> hidden, const std::vector<std::span<const T>>& outputs,
                    std::span<T> grad_hidden, const std::vector<std::span<T>>& grad_outputs) {
  T loss = 0;
  for (auto& g : grad_hidden) g = 0;
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    const bool positive = (t == 0);
    const T score = dot<T>(outputs[t], hidden);
    loss += pair_loss(score, positive);
    const T coef = sigmoid(score) - (positive ? T(1) : T(0));
    for (std::size_t c = 0; c < hidden.size(); ++c) {
      grad_hidden[c] += coef * outputs[t][c];
      grad_outputs[t][c] = coef * hidden[c];
    }
  }
  return loss;
}

/// One stochastic step for target `output` with the given label: moves
/// `output` by -lr * dL/do and accumulates -lr * dL/dh into
/// `hidden_update`. The hidden contribution uses `output` before its update.
template <class T>
void step(std::span<const T> hidden, std::span<T> output, bool positive, T lr, std::span<T> hidden_update) {
  const T score = dot<T>(output, hidden);
  const T coef = lr * ((positive ? T(1) : T(0)) - sigmoid(score));
  for (std::size_t c = 0; c < hidden.size(); ++c) {
    hidden_update[c] += coef * output[c];
    output[c] += coef * hidden[c];
  }
}

}  // namespace varfam::sgns
