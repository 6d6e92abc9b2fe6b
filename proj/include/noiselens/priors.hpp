#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "noiselens/core_data.hpp"
#include "noiselens/matrix.hpp"

namespace noiselens {

/// Row-stochastic C x C matrix; row i averages the surrogate rows of all
/// samples whose noisy label is i.
struct TransitionMatrix {
    Matrix values;
    std::vector<std::size_t> source_count;
    /// Classes absent from the noisy labels; their rows were set uniform.
    std::vector<ClassIndex> empty_classes;

    std::size_t num_classes() const noexcept { return values.rows(); }
    std::vector<std::string> warnings() const;
};

/// Smoothed class frequencies of the clean subset.
struct ClassPrior {
    std::vector<double> values;
    std::vector<std::size_t> counts;
    std::size_t total = 0;

    /// Unsmoothed N'_j / N'.
    std::vector<double> raw() const;
};

inline constexpr double kPriorSmoothing = 0.5;

TransitionMatrix estimate_transition_matrix(const Dataset& dataset, const ScoreMatrix& scores);

/// Mean absolute entry-wise difference.
double transition_matrix_error(const TransitionMatrix& estimated, const Matrix& reference);

ClassPrior compute_class_prior(const Dataset& clean_subset, const LabelSpace& label_space,
                               double smoothing = kPriorSmoothing);

void save_transition_matrix(const TransitionMatrix& tm, const std::filesystem::path& path);
TransitionMatrix load_transition_matrix(const std::filesystem::path& path);
void save_class_prior(const ClassPrior& prior, const std::filesystem::path& path);
ClassPrior load_class_prior(const std::filesystem::path& path);

}  // namespace noiselens
