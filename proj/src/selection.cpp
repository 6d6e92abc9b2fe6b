#include "noiselens/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "io_util.hpp"
#include "noiselens/error.hpp"

namespace noiselens {

namespace {

constexpr double kZeroFloor = 1e-15;
constexpr double kNormTolerance = 1e-9;

void check_alignment(const Dataset& dataset, const ScoreMatrix& scores) {
    if (scores.rows() != dataset.size()) {
        throw Error("score matrix has " + std::to_string(scores.rows()) + " rows, dataset has " +
                    std::to_string(dataset.size()));
    }
    if (scores.cols() != dataset.num_classes()) throw Error("score matrix column count differs from class count");
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (scores.sample_ids()[i] != dataset.id(i)) throw Error("score matrix misaligned with dataset", i);
    }
}

void check_distribution(std::span<const double> p, const char* name) {
    double s = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw Error(std::string(name) + " has a negative or non-finite entry");
        s += v;
    }
    if (std::abs(s - 1.0) > kNormTolerance) throw Error(std::string(name) + " is not normalized");
}

bool conjunction_verdict(double conf, double rho, double js, double mu) { return conf > rho && js < mu; }

}  // namespace

std::string to_string(SelectionCriterion criterion) {
    switch (criterion) {
        case SelectionCriterion::confidence: return "confidence";
        case SelectionCriterion::prompt_consistency: return "prompt-consistency";
        case SelectionCriterion::conjunction: return "conjunction";
    }
    return "unknown";
}

SelectionCriterion parse_criterion(const std::string& name) {
    if (name == "confidence") return SelectionCriterion::confidence;
    if (name == "prompt-consistency" || name == "prompt_consistency") return SelectionCriterion::prompt_consistency;
    if (name == "conjunction" || name == "both") return SelectionCriterion::conjunction;
    throw Error("unknown selection criterion '" + name + "'");
}

std::size_t SelectionMask::selected_count() const {
    std::size_t n = 0;
    for (bool v : verdicts) n += v ? 1 : 0;
    return n;
}

std::vector<std::size_t> SelectionMask::selected_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        if (verdicts[i]) out.push_back(i);
    }
    return out;
}

SelectionMask select_by_confidence(const Dataset& dataset, const ScoreMatrix& scores, double rho) {
    check_alignment(dataset, scores);
    SelectionMask mask;
    mask.criterion = SelectionCriterion::confidence;
    mask.threshold = rho;
    mask.sample_ids = dataset.ids();
    mask.scores.resize(dataset.size());
    mask.verdicts.resize(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const double q = scores(i, dataset.noisy_label(i));
        mask.scores[i] = q;
        mask.verdicts[i] = q > rho;
    }
    return mask;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw Error("js_divergence: length mismatch");
    check_distribution(p, "js_divergence: p");
    check_distribution(q, "js_divergence: q");
    double kl_p = 0.0;
    double kl_q = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double pk = p[k] < kZeroFloor ? 0.0 : p[k];
        const double qk = q[k] < kZeroFloor ? 0.0 : q[k];
        const double mk = 0.5 * (pk + qk);
        if (mk == 0.0) continue;
        if (pk > 0.0) kl_p += pk * std::log(pk / mk);
        if (qk > 0.0) kl_q += qk * std::log(qk / mk);
    }
    const double js = 0.5 * kl_p + 0.5 * kl_q;
    return std::clamp(js, 0.0, std::numbers::ln2);
}

SelectionMask select_by_prompt_consistency(const Dataset& dataset, const ScoreMatrix& scores_a,
                                           const ScoreMatrix& scores_b, double mu) {
    check_alignment(dataset, scores_a);
    check_alignment(dataset, scores_b);
    if (!(mu > 0.0)) throw Error("mu must be positive");
    SelectionMask mask;
    mask.criterion = SelectionCriterion::prompt_consistency;
    mask.threshold = mu;
    mask.sample_ids = dataset.ids();
    mask.scores.resize(dataset.size());
    mask.verdicts.resize(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const double d = js_divergence(scores_a.row(i), scores_b.row(i));
        mask.scores[i] = d;
        mask.verdicts[i] = d < mu;
    }
    return mask;
}

SelectionMask combine_masks(const SelectionMask& confidence, const SelectionMask& consistency) {
    if (confidence.criterion != SelectionCriterion::confidence ||
        consistency.criterion != SelectionCriterion::prompt_consistency) {
        throw Error("combine_masks expects a confidence mask and a prompt-consistency mask");
    }
    if (confidence.sample_ids != consistency.sample_ids) throw Error("masks cover different samples");
    SelectionMask out = confidence;
    out.criterion = SelectionCriterion::conjunction;
    out.secondary_scores = consistency.scores;
    out.secondary_threshold = consistency.threshold;
    for (std::size_t i = 0; i < out.size(); ++i) out.verdicts[i] = confidence.verdicts[i] && consistency.verdicts[i];
    return out;
}

Dataset apply_mask(const Dataset& dataset, const SelectionMask& mask) {
    if (mask.size() != dataset.size() || mask.sample_ids.size() != dataset.size()) {
        throw Error("mask covers " + std::to_string(mask.size()) + " samples, dataset has " +
                    std::to_string(dataset.size()));
    }
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (mask.sample_ids[i] != dataset.id(i)) throw Error("mask/dataset id mismatch", i);
    }
    const auto indices = mask.selected_indices();
    if (indices.empty()) throw Error("empty selection: no sample passed the " + to_string(mask.criterion) + " criterion");
    return dataset.subset(indices);
}

void save_mask(const SelectionMask& mask, const std::filesystem::path& path) {
    auto out = io::open_output(path, false);
    const bool conj = mask.criterion == SelectionCriterion::conjunction;
    out << "#noiselens-mask v1 N=" << mask.size() << " CRITERION=" << to_string(mask.criterion)
        << " THRESHOLD=" << io::format_double(mask.threshold);
    if (conj) out << " SECONDARY_THRESHOLD=" << io::format_double(mask.secondary_threshold);
    out << '\n';
    for (std::size_t i = 0; i < mask.size(); ++i) {
        out << mask.sample_ids[i] << ',' << io::format_double(mask.scores[i]) << ',' << (mask.verdicts[i] ? 1 : 0);
        if (conj) out << ',' << io::format_double(mask.secondary_scores[i]);
        out << '\n';
    }
    if (!out) throw Error("failed writing " + path.string());
}

SelectionMask load_mask(const std::filesystem::path& path) {
    auto in = io::open_input(path, false);
    std::string line;
    if (!std::getline(in, line)) throw Error("empty mask file");
    const auto header = io::parse_header(line, "noiselens-mask");
    SelectionMask mask;
    mask.criterion = parse_criterion(header.field("CRITERION"));
    mask.threshold = header.double_field("THRESHOLD");
    const bool conj = mask.criterion == SelectionCriterion::conjunction;
    if (conj) mask.secondary_threshold = header.double_field("SECONDARY_THRESHOLD");
    const auto n = header.int_field("N");
    io::LineReader reader(in);
    while (reader.next(line)) {
        const std::size_t rec = reader.record();
        const auto fields = io::split(line, ',');
        if (fields.size() != (conj ? 4u : 3u)) throw Error("malformed mask record", rec);
        mask.sample_ids.push_back(io::parse_int(fields[0], rec));
        const double score = io::parse_double(fields[1], rec);
        const auto verdict = io::parse_int(fields[2], rec);
        if (verdict != 0 && verdict != 1) throw Error("verdict must be 0 or 1", rec);
        bool expected = false;
        switch (mask.criterion) {
            case SelectionCriterion::confidence: expected = score > mask.threshold; break;
            case SelectionCriterion::prompt_consistency: expected = score < mask.threshold; break;
            case SelectionCriterion::conjunction: {
                const double js = io::parse_double(fields[3], rec);
                mask.secondary_scores.push_back(js);
                expected = conjunction_verdict(score, mask.threshold, js, mask.secondary_threshold);
                break;
            }
        }
        if (expected != (verdict == 1)) throw Error("verdict inconsistent with score and threshold", rec);
        mask.scores.push_back(score);
        mask.verdicts.push_back(verdict == 1);
    }
    if (mask.size() != static_cast<std::size_t>(n)) throw Error("mask record count differs from header N");
    return mask;
}

}  // namespace noiselens
