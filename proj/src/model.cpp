#include "confidssl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "confidssl/errors.hpp"

namespace confidssl {

namespace {

void check_shapes(const ModelParams& p) {
  if (p.w1.rows == 0 || p.w1.cols == 0 || p.w2.rows == 0 || p.w2.cols == 0 ||
      p.b1.size() != p.w1.rows || p.b2.size() != p.w2.rows ||
      p.w2.cols != p.w1.rows)
    throw ConfigError("model: inconsistent parameter shapes");
}

void check_input(const ModelParams& p, const Vec& x) {
  if (x.size() != p.input_dim())
    throw ConfigError("model: input dimension mismatch");
}

// Hidden pre-activations, then logits. Shared by loss and gradient paths.
void affine_relu_affine(const ModelParams& p, const Vec& x, Vec& pre, Vec& hidden,
                        Vec& z) {
  const std::size_t h = p.hidden_dim();
  const std::size_t c = p.num_classes();
  pre.assign(h, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    double acc = p.b1[i];
    const double* row = &p.w1.data[i * p.w1.cols];
    for (std::size_t j = 0; j < x.size(); ++j) acc += row[j] * x[j];
    pre[i] = acc;
  }
  hidden.resize(h);
  for (std::size_t i = 0; i < h; ++i) hidden[i] = pre[i] > 0.0 ? pre[i] : 0.0;
  z.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    double acc = p.b2[k];
    const double* row = &p.w2.data[k * p.w2.cols];
    for (std::size_t i = 0; i < h; ++i) acc += row[i] * hidden[i];
    z[k] = acc;
  }
}

ProbVector softmax(const Vec& z) {
  const double m = *std::max_element(z.begin(), z.end());
  ProbVector p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

// Backprop one sample given d(loss)/d(logits), adding into the accumulator.
void accumulate_backward(const ModelParams& p, const Vec& x, const Vec& pre,
                         const Vec& hidden, const Vec& dz, ModelGrad& g) {
  const std::size_t h = p.hidden_dim();
  const std::size_t c = p.num_classes();
  for (std::size_t k = 0; k < c; ++k) {
    const double d = dz[k];
    double* row = &g.w2.data[k * g.w2.cols];
    for (std::size_t i = 0; i < h; ++i) row[i] += d * hidden[i];
    g.b2[k] += d;
  }
  Vec dpre(h, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    if (pre[i] <= 0.0) continue;
    double acc = 0.0;
    for (std::size_t k = 0; k < c; ++k) acc += p.w2.at(k, i) * dz[k];
    dpre[i] = acc;
  }
  for (std::size_t i = 0; i < h; ++i) {
    const double d = dpre[i];
    if (d == 0.0) continue;
    double* row = &g.w1.data[i * g.w1.cols];
    for (std::size_t j = 0; j < x.size(); ++j) row[j] += d * x[j];
    g.b1[i] += d;
  }
}

}  // namespace

ModelParams init_params(std::size_t d_in, std::size_t hidden, std::size_t classes,
                        Rng& rng) {
  if (d_in == 0 || hidden == 0 || classes < 2)
    throw ConfigError("init_params: need d_in >= 1, hidden >= 1, classes >= 2");
  ModelParams p;
  p.w1 = Matrix(hidden, d_in);
  p.b1.assign(hidden, 0.0);
  p.w2 = Matrix(classes, hidden);
  p.b2.assign(classes, 0.0);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d_in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto& w : p.w1.data) w = rng.uniform(-s1, s1);
  for (auto& b : p.b1) b = rng.uniform(-s1, s1);
  for (auto& w : p.w2.data) w = rng.uniform(-s2, s2);
  for (auto& b : p.b2) b = rng.uniform(-s2, s2);
  return p;
}

Vec logits(const ModelParams& params, const Vec& x) {
  check_shapes(params);
  check_input(params, x);
  Vec pre, hidden, z;
  affine_relu_affine(params, x, pre, hidden, z);
  return z;
}

ProbVector forward(const ModelParams& params, const Vec& x) {
  return softmax(logits(params, x));
}

double cross_entropy_from_logits(const Vec& z, std::size_t label) {
  if (z.empty()) throw std::invalid_argument("cross_entropy_from_logits: empty logits");
  if (label >= z.size())
    throw std::invalid_argument("cross_entropy_from_logits: label out of range");
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (const double v : z) sum += std::exp(v - m);
  const double ce = m + std::log(sum) - z[label];
  return ce > 0.0 ? ce : 0.0;
}

LossValue supervised_loss(const ModelParams& params, const std::vector<Instance>& batch) {
  check_shapes(params);
  if (batch.empty()) throw std::invalid_argument("supervised_loss: empty batch");
  double acc = 0.0;
  Vec pre, hidden, z;
  for (const auto& inst : batch) {
    check_input(params, inst.features);
    if (inst.label >= params.num_classes())
      throw std::invalid_argument("supervised_loss: label out of range");
    affine_relu_affine(params, inst.features, pre, hidden, z);
    acc += cross_entropy_from_logits(z, inst.label);
  }
  return acc / static_cast<double>(batch.size());
}

std::pair<LossValue, std::size_t> unsupervised_loss(
    const ModelParams& params, const std::vector<ProbVector>& weak_probs,
    const std::vector<Vec>& student_features, const ThresholdVector& thresholds) {
  check_shapes(params);
  if (weak_probs.size() != student_features.size())
    throw std::invalid_argument("unsupervised_loss: batch size mismatch");
  if (weak_probs.empty()) return {0.0, 0};
  const auto mask = pseudo_label_mask(weak_probs, thresholds);
  double acc = 0.0;
  std::size_t used = 0;
  Vec pre, hidden, z;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i].keep) continue;
    check_input(params, student_features[i]);
    affine_relu_affine(params, student_features[i], pre, hidden, z);
    acc += cross_entropy_from_logits(z, mask[i].label);
    ++used;
  }
  return {acc / static_cast<double>(weak_probs.size()), used};
}

LossValue total_loss(LossValue loss_s, LossValue loss_u, double lambda_s,
                     double lambda_u) {
  return lambda_s * loss_s + lambda_u * loss_u;
}

GradientResult gradient(const ModelParams& params, const std::vector<Instance>& labeled,
                        const UnlabeledBatch& unlabeled, const ThresholdVector& thresholds,
                        double lambda_s, double lambda_u) {
  check_shapes(params);
  if (labeled.empty()) throw std::invalid_argument("gradient: empty labeled batch");
  if (unlabeled.weak_probs.size() != unlabeled.student_features.size())
    throw std::invalid_argument("gradient: unlabeled batch size mismatch");

  GradientResult out;
  out.grad = ModelGrad(params.input_dim(), params.hidden_dim(), params.num_classes());

  Vec pre, hidden, z;
  const double ws = lambda_s / static_cast<double>(labeled.size());
  double loss_s = 0.0;
  for (const auto& inst : labeled) {
    check_input(params, inst.features);
    if (inst.label >= params.num_classes())
      throw std::invalid_argument("gradient: label out of range");
    affine_relu_affine(params, inst.features, pre, hidden, z);
    loss_s += cross_entropy_from_logits(z, inst.label);
    ProbVector p = softmax(z);
    Vec dz(p.size());
    for (std::size_t k = 0; k < p.size(); ++k)
      dz[k] = ws * (p[k] - (k == inst.label ? 1.0 : 0.0));
    accumulate_backward(params, inst.features, pre, hidden, dz, out.grad);
  }
  out.loss_s = loss_s / static_cast<double>(labeled.size());

  if (!unlabeled.weak_probs.empty()) {
    const auto mask = pseudo_label_mask(unlabeled.weak_probs, thresholds);
    const double wu = lambda_u / static_cast<double>(unlabeled.weak_probs.size());
    double loss_u = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i].keep) continue;
      const Vec& x = unlabeled.student_features[i];
      check_input(params, x);
      affine_relu_affine(params, x, pre, hidden, z);
      loss_u += cross_entropy_from_logits(z, mask[i].label);
      ProbVector p = softmax(z);
      Vec dz(p.size());
      for (std::size_t k = 0; k < p.size(); ++k)
        dz[k] = wu * (p[k] - (k == mask[i].label ? 1.0 : 0.0));
      accumulate_backward(params, x, pre, hidden, dz, out.grad);
      ++out.used_count;
    }
    out.loss_u = loss_u / static_cast<double>(unlabeled.weak_probs.size());
  }
  return out;
}

double learning_rate(const LrSchedule& schedule, std::size_t epoch) {
  if (schedule.total_epochs == 0)
    throw std::invalid_argument("learning_rate: total_epochs must be >= 1");
  if (epoch > schedule.total_epochs)
    throw std::invalid_argument("learning_rate: epoch past end of schedule");
  if (!(schedule.lr_min > 0.0 && schedule.lr_min <= schedule.lr_max))
    throw std::invalid_argument("learning_rate: need 0 < lr_min <= lr_max");
  const double t = static_cast<double>(epoch) / static_cast<double>(schedule.total_epochs);
  return schedule.lr_min +
         0.5 * (schedule.lr_max - schedule.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

ModelParams sgd_step(const ModelParams& params, const ModelGrad& grad,
                     std::size_t epoch, const LrSchedule& schedule) {
  check_shapes(params);
  if (grad.w1.rows != params.w1.rows || grad.w1.cols != params.w1.cols ||
      grad.w2.rows != params.w2.rows || grad.w2.cols != params.w2.cols ||
      grad.b1.size() != params.b1.size() || grad.b2.size() != params.b2.size())
    throw ConfigError("sgd_step: gradient shape mismatch");
  const double lr = learning_rate(schedule, epoch);
  ModelParams next = params;
  for (std::size_t i = 0; i < next.w1.data.size(); ++i)
    next.w1.data[i] = params.w1.data[i] - lr * grad.w1.data[i];
  for (std::size_t i = 0; i < next.b1.size(); ++i)
    next.b1[i] = params.b1[i] - lr * grad.b1[i];
  for (std::size_t i = 0; i < next.w2.data.size(); ++i)
    next.w2.data[i] = params.w2.data[i] - lr * grad.w2.data[i];
  for (std::size_t i = 0; i < next.b2.size(); ++i)
    next.b2[i] = params.b2[i] - lr * grad.b2[i];
  return next;
}

}  // namespace confidssl
