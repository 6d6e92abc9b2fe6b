#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noiselens/matrix.hpp"

namespace noiselens {

using SampleId = std::int64_t;
using ClassIndex = std::uint32_t;

class LabelSpace {
public:
    /// Names default to "class_<k>".
    explicit LabelSpace(std::size_t num_classes);
    LabelSpace(std::size_t num_classes, std::vector<std::string> class_names);

    std::size_t num_classes() const noexcept { return names_.size(); }
    const std::vector<std::string>& class_names() const noexcept { return names_; }

    bool operator==(const LabelSpace&) const = default;

private:
    std::vector<std::string> names_;
};

/// One labeled sample, used to build datasets.
struct Sample {
    SampleId id = 0;
    std::vector<double> features;
    ClassIndex noisy_label = 0;
    std::optional<ClassIndex> true_label;
};

/// Immutable labeled feature set. Features are stored contiguously (N x d).
///
/// true_label is exposed only through ground_truth(); selection and training
/// code never calls it.
class Dataset {
public:
    Dataset(LabelSpace label_space, std::vector<Sample> samples);
    Dataset(LabelSpace label_space, std::vector<SampleId> ids, Matrix features,
            std::vector<ClassIndex> noisy_labels,
            std::optional<std::vector<ClassIndex>> true_labels);

    const LabelSpace& label_space() const noexcept { return label_space_; }
    std::size_t num_classes() const noexcept { return label_space_.num_classes(); }
    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t feature_dim() const noexcept { return features_.cols(); }
    bool has_ground_truth() const noexcept { return true_labels_.has_value(); }

    SampleId id(std::size_t i) const { return ids_[i]; }
    std::span<const double> features(std::size_t i) const { return features_.row(i); }
    ClassIndex noisy_label(std::size_t i) const { return noisy_labels_[i]; }

    const std::vector<SampleId>& ids() const noexcept { return ids_; }
    const Matrix& feature_matrix() const noexcept { return features_; }
    const std::vector<ClassIndex>& noisy_labels() const noexcept { return noisy_labels_; }

    /// Ground-truth labels; throws if the dataset carries none.
    const std::vector<ClassIndex>& ground_truth() const;

    Sample sample(std::size_t i) const;

    /// Rows [indices] in the given order.
    Dataset subset(std::span<const std::size_t> indices) const;
    Dataset with_noisy_labels(std::vector<ClassIndex> labels) const;

    bool operator==(const Dataset&) const = default;

private:
    void validate() const;

    LabelSpace label_space_;
    std::vector<SampleId> ids_;
    Matrix features_;
    std::vector<ClassIndex> noisy_labels_;
    std::optional<std::vector<ClassIndex>> true_labels_;
};

/// Row-stochastic N x C surrogate predictions aligned to sample ids.
class ScoreMatrix {
public:
    /// Validates entries and rows against the internal 1e-9 tolerance.
    ScoreMatrix(std::vector<SampleId> sample_ids, Matrix values);

    /// Checks rows against `tolerance`, then renormalizes each row to sum to 1.
    static ScoreMatrix from_external(std::vector<SampleId> sample_ids, Matrix values,
                                     double tolerance = kIngestTolerance);

    static constexpr double kIngestTolerance = 1e-6;
    static constexpr double kInternalTolerance = 1e-9;

    std::size_t rows() const noexcept { return values_.rows(); }
    std::size_t cols() const noexcept { return values_.cols(); }
    const Matrix& values() const noexcept { return values_; }
    const std::vector<SampleId>& sample_ids() const noexcept { return ids_; }
    std::span<const double> row(std::size_t i) const { return values_.row(i); }
    double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }

    ScoreMatrix subset(std::span<const std::size_t> indices) const;

    bool operator==(const ScoreMatrix&) const = default;

private:
    std::vector<SampleId> ids_;
    Matrix values_;
};

struct AlignmentReport {
    std::size_t rows = 0;
    double max_row_sum_deviation = 0.0;
};

/// Checks row count, id alignment and row-stochasticity of raw scores
/// against a dataset. Throws Error on the first violation.
AlignmentReport validate_score_matrix(std::span<const SampleId> sample_ids, const Matrix& values,
                                      const Dataset& dataset,
                                      double tolerance = ScoreMatrix::kIngestTolerance);
AlignmentReport validate_score_matrix(const ScoreMatrix& scores, const Dataset& dataset);

enum class FileEncoding { text, binary };

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  FileEncoding encoding = FileEncoding::text);

/// Loads scores without a dataset to check against (ingest tolerance applies).
ScoreMatrix load_scores(const std::filesystem::path& path);
/// Loads scores and validates alignment with `dataset`.
ScoreMatrix load_scores(const std::filesystem::path& path, const Dataset& dataset);
void save_scores(const ScoreMatrix& scores, const std::filesystem::path& path,
                 FileEncoding encoding = FileEncoding::text);

/// Per-sample embedding table (id + vector), used when the surrogate's
/// embedding space differs from the classifier features.
struct EmbeddingTable {
    std::vector<SampleId> ids;
    Matrix vectors;
};

EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path,
                     FileEncoding encoding = FileEncoding::text);

}  // namespace noiselens
