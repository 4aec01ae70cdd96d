#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "confidssl/pseudo_label.hpp"
#include "confidssl/rng.hpp"
#include "confidssl/types.hpp"

namespace confidssl {

using LossValue = double;

// One-hidden-layer ReLU classifier: softmax(w2 * relu(w1 * x + b1) + b2).
struct ModelParams {
  Matrix w1;  // hidden x d_in
  Vec b1;     // hidden
  Matrix w2;  // classes x hidden
  Vec b2;     // classes

  std::size_t input_dim() const { return w1.cols; }
  std::size_t hidden_dim() const { return w1.rows; }
  std::size_t num_classes() const { return w2.rows; }
};

// Gradient of the joint objective, same shapes as ModelParams.
struct ModelGrad {
  Matrix w1;
  Vec b1;
  Matrix w2;
  Vec b2;

  ModelGrad() = default;
  ModelGrad(std::size_t d_in, std::size_t hidden, std::size_t classes)
      : w1(hidden, d_in), b1(hidden, 0.0), w2(classes, hidden), b2(classes, 0.0) {}
};

struct LrSchedule {
  double lr_max = 0.01;
  double lr_min = 0.0001;
  std::size_t total_epochs = 1;
};

// Pseudo-label sources paired with the student views they supervise. The
// probabilities are plain numbers here: no gradient ever flows through them.
struct UnlabeledBatch {
  std::vector<ProbVector> weak_probs;
  std::vector<Vec> student_features;
};

struct GradientResult {
  ModelGrad grad;
  LossValue loss_s = 0.0;
  LossValue loss_u = 0.0;
  std::size_t used_count = 0;
};

// Parameters drawn from centered uniform with scale 1/sqrt(fan_in), biases
// included. Draw order: w1 row-major, b1, w2 row-major, b2.
ModelParams init_params(std::size_t d_in, std::size_t hidden, std::size_t classes,
                        Rng& rng);

Vec logits(const ModelParams& params, const Vec& x);
ProbVector forward(const ModelParams& params, const Vec& x);

// log-sum-exp minus the true logit, with max subtraction. Never negative.
double cross_entropy_from_logits(const Vec& z, std::size_t label);

// Mean cross-entropy over the batch.
LossValue supervised_loss(const ModelParams& params, const std::vector<Instance>& batch);

// Masked pseudo-label cross-entropy, summed over kept instances and divided by
// the full batch size (not the kept count). Returns the loss and how many
// instances passed their class threshold. Empty batch yields (0, 0).
std::pair<LossValue, std::size_t> unsupervised_loss(
    const ModelParams& params, const std::vector<ProbVector>& weak_probs,
    const std::vector<Vec>& student_features, const ThresholdVector& thresholds);

LossValue total_loss(LossValue loss_s, LossValue loss_u, double lambda_s,
                     double lambda_u);

// Gradient of lambda_s * supervised + lambda_u * unsupervised in one backward
// pass. Also reports the two loss terms so the trainer need not recompute.
GradientResult gradient(const ModelParams& params, const std::vector<Instance>& labeled,
                        const UnlabeledBatch& unlabeled, const ThresholdVector& thresholds,
                        double lambda_s, double lambda_u);

// Cosine annealing: lr_min + (lr_max - lr_min)/2 * (1 + cos(pi * epoch / total)).
// Defined on epoch in [0, total_epochs].
double learning_rate(const LrSchedule& schedule, std::size_t epoch);

// One step of plain SGD at the scheduled rate; returns the updated parameters.
ModelParams sgd_step(const ModelParams& params, const ModelGrad& grad,
                     std::size_t epoch, const LrSchedule& schedule);

}  // namespace confidssl
