#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noiselens/core_data.hpp"
#include "noiselens/losses.hpp"
#include "noiselens/noise_lab.hpp"
#include "noiselens/selection.hpp"
#include "noiselens/trainer.hpp"

namespace noiselens {

double accuracy(std::span<const ClassIndex> predictions, std::span<const ClassIndex> reference);

/// Hit when the reference class ranks among the k most probable classes
/// (equal probabilities ranked by class index).
double top_k_accuracy(const Matrix& probabilities, std::span<const ClassIndex> reference, std::size_t k);

/// Recall of each class; classes absent from `reference` get 0.
std::vector<double> per_class_recall(std::span<const ClassIndex> predictions, std::span<const ClassIndex> reference,
                                     std::size_t num_classes);

struct HistogramReport {
    std::array<double, 11> bin_edges{};
    std::array<std::size_t, 10> counts{};
    std::string source;
};

/// Ten equal bins over [0, 1]; 1.0 falls in the last bin.
HistogramReport confidence_histogram(std::span<const double> scores, std::string source = "scores");

struct SweepPoint {
    double threshold = 0.0;
    std::size_t selected_count = 0;
    bool skipped = false;
    std::string note;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> test_accuracy;
};

struct SweepReport {
    std::vector<SweepPoint> points;
};

/// Everything downstream of selection that a sweep point needs.
struct SweepBundle {
    MarginConfig margin;
    TrainConfig train;
    std::optional<Dataset> test_set;
};

/// For each threshold: confidence selection, class prior on the clean subset,
/// training, and test evaluation. The transition matrix is estimated once on
/// the full dataset. Stage failures are recorded on the point, not thrown.
SweepReport threshold_sweep(const Dataset& dataset, const ScoreMatrix& scores, std::span<const double> thresholds,
                            const SweepBundle& bundle);

/// Selection quality from the dataset's own ground truth.
SelectionQuality selection_quality(const SelectionMask& mask, const Dataset& dataset);

// Structured reports: one record per line of `key=value` pairs, or an aligned
// text table grouped by record kind.
struct ReportRecord {
    std::string kind;
    std::vector<std::pair<std::string, std::string>> fields;

    ReportRecord& add(std::string key, std::string value);
    ReportRecord& add(std::string key, double value);
    ReportRecord& add(std::string key, std::size_t value);
};

enum class ReportFormat { table, records };
ReportFormat parse_report_format(const std::string& name);

std::vector<ReportRecord> to_records(const HistogramReport& histogram);
std::vector<ReportRecord> to_records(const SweepReport& sweep);
ReportRecord to_record(const SelectionQuality& quality);

std::string render(const std::vector<ReportRecord>& records, ReportFormat format);

}  // namespace noiselens
