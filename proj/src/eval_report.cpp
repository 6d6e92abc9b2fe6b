#include "noiselens/eval_report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "io_util.hpp"
#include "noiselens/error.hpp"
#include "noiselens/priors.hpp"

namespace noiselens {

double accuracy(std::span<const ClassIndex> predictions, std::span<const ClassIndex> reference) {
    if (predictions.size() != reference.size()) throw Error("accuracy: length mismatch");
    if (predictions.empty()) throw Error("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == reference[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double top_k_accuracy(const Matrix& probabilities, std::span<const ClassIndex> reference, std::size_t k) {
    if (probabilities.rows() != reference.size()) throw Error("top-k accuracy: length mismatch");
    if (reference.empty()) throw Error("top-k accuracy: empty input");
    if (k < 1) throw Error("top-k accuracy: k must be at least 1");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const auto row = probabilities.row(i);
        const ClassIndex ref = reference[i];
        if (ref >= row.size()) throw Error("top-k accuracy: reference label out of range", i);
        std::size_t rank = 0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] > row[ref] || (row[j] == row[ref] && j < ref)) ++rank;
        }
        hits += rank < k ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(reference.size());
}

std::vector<double> per_class_recall(std::span<const ClassIndex> predictions, std::span<const ClassIndex> reference,
                                     std::size_t num_classes) {
    if (predictions.size() != reference.size()) throw Error("per-class recall: length mismatch");
    std::vector<std::size_t> total(num_classes, 0);
    std::vector<std::size_t> hit(num_classes, 0);
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (reference[i] >= num_classes) throw Error("per-class recall: label out of range", i);
        ++total[reference[i]];
        hit[reference[i]] += predictions[i] == reference[i] ? 1 : 0;
    }
    std::vector<double> recall(num_classes, 0.0);
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (total[k] > 0) recall[k] = static_cast<double>(hit[k]) / static_cast<double>(total[k]);
    }
    return recall;
}

HistogramReport confidence_histogram(std::span<const double> scores, std::string source) {
    HistogramReport h;
    h.source = std::move(source);
    for (std::size_t k = 0; k <= 10; ++k) h.bin_edges[k] = static_cast<double>(k) / 10.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double v = scores[i];
        if (!(v >= 0.0 && v <= 1.0)) throw Error("histogram value outside [0, 1]", i);
        auto bin = static_cast<std::size_t>(std::min(9.0, std::floor(v * 10.0)));
        // Settle against the stored edges so binning agrees with [lo, hi).
        while (bin > 0 && v < h.bin_edges[bin]) --bin;
        while (bin < 9 && v >= h.bin_edges[bin + 1]) ++bin;
        ++h.counts[bin];
    }
    return h;
}

SelectionQuality selection_quality(const SelectionMask& mask, const Dataset& dataset) {
    const auto& truth = dataset.ground_truth();
    CorruptionRecord record;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset.noisy_label(i) != truth[i]) record.flipped_ids.push_back(dataset.id(i));
    }
    return selection_quality(mask, dataset, record);
}

SweepReport threshold_sweep(const Dataset& dataset, const ScoreMatrix& scores, std::span<const double> thresholds,
                            const SweepBundle& bundle) {
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) throw Error("sweep thresholds must be ascending");
    const TransitionMatrix tm = estimate_transition_matrix(dataset, scores);
    SweepReport report;
    for (double rho : thresholds) {
        SweepPoint point;
        point.threshold = rho;
        const SelectionMask mask = select_by_confidence(dataset, scores, rho);
        point.selected_count = mask.selected_count();
        if (dataset.has_ground_truth()) {
            const auto q = selection_quality(mask, dataset);
            point.precision = q.precision;
            point.recall = q.recall;
        }
        if (point.selected_count == 0) {
            point.skipped = true;
            point.note = "empty selection";
            report.points.push_back(std::move(point));
            continue;
        }
        try {
            const Dataset clean = apply_mask(dataset, mask);
            const ClassPrior prior = compute_class_prior(clean, dataset.label_space());
            const TrainReport trained = train(clean, tm, prior, bundle.margin, bundle.train);
            if (bundle.test_set) {
                const auto pred = predict(trained.classifier, *bundle.test_set);
                const auto& t = *bundle.test_set;
                point.test_accuracy = accuracy(pred.labels, t.has_ground_truth() ? t.ground_truth() : t.noisy_labels());
            }
        } catch (const Error& e) {
            point.skipped = true;
            point.note = e.what();
        }
        report.points.push_back(std::move(point));
    }
    return report;
}

ReportRecord& ReportRecord::add(std::string key, std::string value) {
    fields.emplace_back(std::move(key), std::move(value));
    return *this;
}

ReportRecord& ReportRecord::add(std::string key, double value) { return add(std::move(key), io::format_double(value)); }

ReportRecord& ReportRecord::add(std::string key, std::size_t value) {
    return add(std::move(key), std::to_string(value));
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "table") return ReportFormat::table;
    if (name == "records") return ReportFormat::records;
    throw Error("unknown report format '" + name + "'");
}

std::vector<ReportRecord> to_records(const HistogramReport& histogram) {
    std::vector<ReportRecord> out;
    for (std::size_t k = 0; k < 10; ++k) {
        ReportRecord r{"histogram", {}};
        r.add("source", histogram.source)
            .add("bin", k)
            .add("lo", histogram.bin_edges[k])
            .add("hi", histogram.bin_edges[k + 1])
            .add("count", histogram.counts[k]);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ReportRecord> to_records(const SweepReport& sweep) {
    std::vector<ReportRecord> out;
    for (const auto& p : sweep.points) {
        ReportRecord r{"sweep", {}};
        r.add("rho", p.threshold).add("selected", p.selected_count).add("skipped", std::string(p.skipped ? "1" : "0"));
        r.add("precision", p.precision ? io::format_double(*p.precision) : std::string("na"));
        r.add("recall", p.recall ? io::format_double(*p.recall) : std::string("na"));
        r.add("test_accuracy", p.test_accuracy ? io::format_double(*p.test_accuracy) : std::string("na"));
        if (!p.note.empty()) {
            std::string note = p.note;
            std::replace(note.begin(), note.end(), ' ', '_');
            r.add("note", note);
        }
        out.push_back(std::move(r));
    }
    return out;
}

ReportRecord to_record(const SelectionQuality& quality) {
    ReportRecord r{"selection_quality", {}};
    r.add("selected", quality.selected)
        .add("selected_clean", quality.selected_clean)
        .add("total_clean", quality.total_clean)
        .add("precision", quality.precision)
        .add("recall", quality.recall)
        .add("f1", quality.f1);
    return r;
}

std::string render(const std::vector<ReportRecord>& records, ReportFormat format) {
    std::ostringstream out;
    if (format == ReportFormat::records) {
        for (const auto& r : records) {
            out << "kind=" << r.kind;
            for (const auto& [k, v] : r.fields) out << ' ' << k << '=' << v;
            out << '\n';
        }
        return out.str();
    }
    // Consecutive records of the same kind and shape share one table.
    std::size_t i = 0;
    while (i < records.size()) {
        std::size_t j = i + 1;
        auto same_shape = [&](const ReportRecord& a, const ReportRecord& b) {
            if (a.kind != b.kind || a.fields.size() != b.fields.size()) return false;
            for (std::size_t f = 0; f < a.fields.size(); ++f) {
                if (a.fields[f].first != b.fields[f].first) return false;
            }
            return true;
        };
        while (j < records.size() && same_shape(records[i], records[j])) ++j;
        const auto& head = records[i].fields;
        std::vector<std::size_t> width(head.size());
        for (std::size_t f = 0; f < head.size(); ++f) {
            width[f] = head[f].first.size();
            for (std::size_t r = i; r < j; ++r) width[f] = std::max(width[f], records[r].fields[f].second.size());
        }
        out << "[" << records[i].kind << "]\n";
        auto emit = [&](auto get) {
            for (std::size_t f = 0; f < head.size(); ++f) {
                const std::string cell = get(f);
                out << (f ? "  " : "") << cell << std::string(width[f] - cell.size(), ' ');
            }
            out << '\n';
        };
        emit([&](std::size_t f) { return head[f].first; });
        for (std::size_t r = i; r < j; ++r) emit([&](std::size_t f) { return records[r].fields[f].second; });
        out << '\n';
        i = j;
    }
    return out.str();
}

}  // namespace noiselens
