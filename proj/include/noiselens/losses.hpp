#pragma once

#include <span>
#include <vector>

#include "noiselens/core_data.hpp"
#include "noiselens/matrix.hpp"
#include "noiselens/priors.hpp"

namespace noiselens {

/// Margin-adjusted focal objective parameters.
///   delta: weight of the transition-matrix (noise-aware) margin
///   t:     weight of the log class-prior (balanced) margin
///   s:     temperature dividing the adjusted logits
///   gamma: focal exponent
struct MarginConfig {
    double delta = 0.5;
    double t = 1.0;
    double s = 1.0;
    double gamma = 1.0;

    void validate() const;

    /// Shallow-head preset (s=1, delta=0.5, t=1).
    static MarginConfig shallow() { return {0.5, 1.0, 1.0, 1.0}; }
    /// Deeper-backbone preset (s=0.1, delta=0.1, t=0.01).
    static MarginConfig deep() { return {0.1, 0.01, 0.1, 1.0}; }
    /// Plain focal loss on raw logits.
    static MarginConfig focal_only(double gamma = 1.0) { return {0.0, 0.0, 1.0, gamma}; }
    /// Plain cross-entropy.
    static MarginConfig cross_entropy() { return {0.0, 0.0, 1.0, 0.0}; }
};

struct LossBatch {
    Matrix logits;
    std::vector<ClassIndex> labels;
    std::vector<double> per_sample_loss;
    Matrix grad_logits;
    std::vector<double> nabm_prob;

    /// Left-to-right mean of per_sample_loss.
    double mean_loss() const;
};

/// Softmax over a_j = (z_j + delta*M[label][j] + t*log(prior_j)) / s.
std::vector<double> nabm_probability(std::span<const double> logits, ClassIndex label, const TransitionMatrix& tm,
                                     const ClassPrior& prior, const MarginConfig& cfg);

/// -log softmax(z)[label] via log-sum-exp.
double cross_entropy(std::span<const double> logits, ClassIndex label);

/// (1-p)^gamma * (-log p) for p in (0, 1].
double focal_loss(double prob_at_label, double gamma);

/// Per-sample focal loss on the margin-adjusted probability and its exact
/// gradient with respect to the raw logits.
LossBatch nabm_loss_batch(const Matrix& logits, std::span<const ClassIndex> labels, const TransitionMatrix& tm,
                          const ClassPrior& prior, const MarginConfig& cfg);

}  // namespace noiselens
