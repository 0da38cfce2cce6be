#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "frugal/core.hpp"

namespace frugal {

struct TrainerConfig {
  double lr = 0.1;
  std::size_t epochs = 300;
  double l2 = 1e-4;
};

// Multinomial logistic regression on fixed feature vectors.
struct SoftmaxModel {
  Matrix weights;             // nc x d
  std::vector<double> bias;   // nc
  TrainerConfig config{};
  double lr_used = 0.0;       // after any step-size halving
  std::vector<double> loss_trace;

  std::size_t classes() const noexcept { return weights.rows(); }
  std::size_t dims() const noexcept { return weights.cols(); }

  static SoftmaxModel zeros(std::size_t nc, std::size_t d, TrainerConfig cfg = {}) {
    SoftmaxModel m;
    m.weights = Matrix(nc, d);
    m.bias.assign(nc, 0.0);
    m.config = cfg;
    m.lr_used = cfg.lr;
    return m;
  }
};

// Row-stochastic class scores.
struct ScoreMatrix {
  Matrix F;
  std::size_t model_iteration = 0;
};

namespace detail {

// Max-shifted softmax of one row of logits, in place.
inline void softmax_inplace(std::span<double> z) {
  const double hi = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) {
    v = std::exp(v - hi);
    s += v;
  }
  for (double& v : z) v /= s;
}

inline void logits_row(const SoftmaxModel& m, std::span<const double> x, std::span<double> out) {
  for (std::size_t c = 0; c < m.classes(); ++c) {
    double z = m.bias[c];
    auto w = m.weights.row(c);
    for (std::size_t j = 0; j < x.size(); ++j) z += w[j] * x[j];
    out[c] = z;
  }
}

}  // namespace detail

// Mean cross-entropy plus (l2/2)||W||^2, optionally with its gradient. The
// bias is not regularized.
inline double softmax_loss(const SoftmaxModel& m, const Matrix& x, std::span<const int> y, double l2,
                           Matrix* grad_w = nullptr, std::vector<double>* grad_b = nullptr) {
  const std::size_t n = x.rows();
  const std::size_t nc = m.classes();
  const std::size_t d = m.dims();
  if (grad_w) *grad_w = Matrix(nc, d);
  if (grad_b) grad_b->assign(nc, 0.0);
  std::vector<double> z(nc);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    detail::logits_row(m, x.row(i), z);
    const double hi = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - hi);
    const double log_norm = hi + std::log(s);
    const auto label = static_cast<std::size_t>(y[i]);
    loss += log_norm - z[label];
    if (grad_w) {
      auto xi = x.row(i);
      for (std::size_t c = 0; c < nc; ++c) {
        const double g = (std::exp(z[c] - log_norm) - (c == label ? 1.0 : 0.0)) * inv_n;
        auto gw = grad_w->row(c);
        for (std::size_t j = 0; j < d; ++j) gw[j] += g * xi[j];
        (*grad_b)[c] += g;
      }
    }
  }
  loss *= inv_n;
  double sq = 0.0;
  for (double v : m.weights.data()) sq += v * v;
  loss += 0.5 * l2 * sq;
  if (grad_w) {
    auto& g = grad_w->data();
    const auto& w = m.weights.data();
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += l2 * w[k];
  }
  return loss;
}

namespace detail {

inline bool descend(SoftmaxModel& m, const Matrix& x, std::span<const int> y, const TrainerConfig& cfg, double lr) {
  m = SoftmaxModel::zeros(m.classes(), m.dims(), cfg);
  m.lr_used = lr;
  Matrix gw;
  std::vector<double> gb;
  double loss = softmax_loss(m, x, y, cfg.l2, &gw, &gb);
  m.loss_trace.push_back(loss);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    auto& w = m.weights.data();
    const auto& g = gw.data();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
    for (std::size_t c = 0; c < m.bias.size(); ++c) m.bias[c] -= lr * gb[c];
    const double next = softmax_loss(m, x, y, cfg.l2, &gw, &gb);
    m.loss_trace.push_back(next);
    if (!std::isfinite(next) || next > loss + 1e-12 * std::max(1.0, std::abs(loss))) return false;
    loss = next;
  }
  return true;
}

}  // namespace detail

// Full-batch gradient descent from zero weights. If the loss ever increases
// the run restarts once at half the learning rate; a second violation throws.
inline SoftmaxModel train_softmax(const Matrix& x, std::span<const int> y, std::size_t nc,
                                  const TrainerConfig& cfg = {}) {
  if (x.rows() == 0) throw TrainingError("train: no labeled samples");
  if (y.size() != x.rows()) throw ShapeError("train: label count does not match rows");
  if (nc < 2) throw ParameterError("train: nc must be >= 2");
  if (!(cfg.lr > 0.0) || !(cfg.l2 >= 0.0)) throw ParameterError("train: lr must be > 0 and l2 >= 0");
  for (int v : y)
    if (v < 0 || static_cast<std::size_t>(v) >= nc) throw ParameterError("train: label outside [0, nc)");
  auto m = SoftmaxModel::zeros(nc, x.cols(), cfg);
  if (detail::descend(m, x, y, cfg, cfg.lr)) return m;
  if (detail::descend(m, x, y, cfg, cfg.lr * 0.5)) return m;
  throw TrainingError("train: loss increased even at half the learning rate");
}

inline ScoreMatrix score_all(const SoftmaxModel& m, const Matrix& x) {
  if (x.cols() != m.dims()) throw ShapeError("score_all: feature dimension does not match model");
  ScoreMatrix out{Matrix(x.rows(), m.classes()), 0};
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = out.F.row(i);
    detail::logits_row(m, x.row(i), row);
    detail::softmax_inplace(row);
  }
  return out;
}

// Argmax class per row, ties to the lower class id.
inline std::vector<int> predict(const SoftmaxModel& m, const Matrix& x) {
  if (x.cols() != m.dims()) throw ShapeError("predict: feature dimension does not match model");
  std::vector<int> out(x.rows());
  std::vector<double> z(m.classes());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    detail::logits_row(m, x.row(i), z);
    out[i] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }
  return out;
}

// Mean per-class error rate over the classes present in truth.
inline double eer(std::span<const int> predictions, std::span<const int> truth, std::size_t nc) {
  if (predictions.empty() || truth.empty()) throw ParameterError("eer: empty inputs");
  if (predictions.size() != truth.size()) throw ShapeError("eer: length mismatch");
  std::vector<std::size_t> total(nc, 0), wrong(nc, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto c = static_cast<std::size_t>(truth[i]);
    if (c >= nc) throw ParameterError("eer: truth label outside [0, nc)");
    ++total[c];
    if (predictions[i] != truth[i]) ++wrong[c];
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    if (total[c] == 0) continue;
    sum += static_cast<double>(wrong[c]) / static_cast<double>(total[c]);
    ++present;
  }
  return sum / static_cast<double>(present);
}

inline double accuracy(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.empty()) throw ParameterError("accuracy: empty inputs");
  if (predictions.size() != truth.size()) throw ShapeError("accuracy: length mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predictions[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace frugal
