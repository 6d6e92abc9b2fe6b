#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "noiselens/core_data.hpp"
#include "noiselens/losses.hpp"
#include "noiselens/matrix.hpp"
#include "noiselens/priors.hpp"

namespace noiselens {

/// Linear head z = W x + b over frozen features.
struct LinearClassifier {
    Matrix weights;  // C x d
    std::vector<double> bias;

    std::size_t num_classes() const noexcept { return weights.rows(); }
    std::size_t dim() const noexcept { return weights.cols(); }
    void logits(std::span<const double> x, std::span<double> out) const;

    bool operator==(const LinearClassifier&) const = default;
};

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 128;
    double learning_rate = 0.1;
    double weight_decay = 1e-4;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    bool shuffle = true;
    // Optional step decay: lr *= lr_decay every lr_step_epochs (0 = constant).
    std::size_t lr_step_epochs = 0;
    double lr_decay = 0.1;

    void validate() const;
};

struct TrainReport {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_accuracy;
    LinearClassifier classifier;
    double wall_seconds = 0.0;
};

/// Weights uniform in [-1/sqrt(d), 1/sqrt(d)], zero bias.
LinearClassifier init_classifier(std::size_t dim, std::size_t classes, std::uint64_t seed);

/// Mini-batch SGD with momentum and L2 weight decay on the margin-adjusted
/// focal objective. Starts from init_classifier(d, C, cfg.seed).
TrainReport train(const Dataset& clean_subset, const TransitionMatrix& tm, const ClassPrior& prior,
                  const MarginConfig& margin, const TrainConfig& cfg);

struct ClassifierGradient {
    Matrix weights;
    std::vector<double> bias;
    double loss = 0.0;
};

/// Mean loss over rows [indices] and its gradient w.r.t. W and b (no decay).
ClassifierGradient loss_gradient(const LinearClassifier& clf, const Dataset& data, std::span<const std::size_t> indices,
                                 const TransitionMatrix& tm, const ClassPrior& prior, const MarginConfig& margin);

struct Predictions {
    std::vector<ClassIndex> labels;
    Matrix probabilities;  // N x C, plain softmax of raw logits
};

/// Inference uses raw logits; the margins are a training-time adjustment.
Predictions predict(const LinearClassifier& clf, const Dataset& dataset);

void save_classifier(const LinearClassifier& clf, const std::filesystem::path& path,
                     FileEncoding encoding = FileEncoding::text);
LinearClassifier load_classifier(const std::filesystem::path& path);

}  // namespace noiselens
