#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "noiselens/core_data.hpp"

namespace noiselens {

enum class SelectionCriterion {
    confidence,          // clean iff q_i(y_i) > threshold
    prompt_consistency,  // clean iff JS(q_i, q~_i) < threshold
    conjunction,         // confidence AND prompt consistency
};

std::string to_string(SelectionCriterion criterion);
SelectionCriterion parse_criterion(const std::string& name);

/// Per-sample clean/rejected verdicts plus the score each verdict came from.
/// For `conjunction`, scores and threshold are the confidence ones and the
/// prompt-consistency side is kept in `secondary_*`.
struct SelectionMask {
    std::vector<SampleId> sample_ids;
    std::vector<bool> verdicts;
    std::vector<double> scores;
    SelectionCriterion criterion = SelectionCriterion::confidence;
    double threshold = 0.0;
    std::vector<double> secondary_scores;
    double secondary_threshold = 0.0;

    std::size_t size() const noexcept { return verdicts.size(); }
    std::size_t selected_count() const;
    std::vector<std::size_t> selected_indices() const;
};

/// Preset thresholds for the confidence criterion.
namespace rho_presets {
inline constexpr double large_web = 0.6;
inline constexpr double default_10_class = 0.5;
inline constexpr double many_class = 0.1;
}  // namespace rho_presets

/// Unvalidated placeholder: identical scorings pass, disjoint rows fail.
inline constexpr double kDefaultMu = 0.1;

SelectionMask select_by_confidence(const Dataset& dataset, const ScoreMatrix& scores, double rho);

/// Jensen-Shannon divergence with natural log, in [0, ln 2].
double js_divergence(std::span<const double> p, std::span<const double> q);

SelectionMask select_by_prompt_consistency(const Dataset& dataset, const ScoreMatrix& scores_a,
                                           const ScoreMatrix& scores_b, double mu);

/// Logical AND of a confidence mask and a prompt-consistency mask.
SelectionMask combine_masks(const SelectionMask& confidence, const SelectionMask& consistency);

/// Clean subset in original order. Throws on an empty selection.
Dataset apply_mask(const Dataset& dataset, const SelectionMask& mask);

void save_mask(const SelectionMask& mask, const std::filesystem::path& path);
SelectionMask load_mask(const std::filesystem::path& path);

}  // namespace noiselens
