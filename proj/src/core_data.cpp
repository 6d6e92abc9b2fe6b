#include "noiselens/core_data.hpp"

#include <cmath>
#include <unordered_set>

#include "io_util.hpp"
#include "noiselens/error.hpp"

namespace noiselens {

namespace {

std::vector<std::string> default_names(std::size_t n) {
    std::vector<std::string> names;
    names.reserve(n);
    for (std::size_t k = 0; k < n; ++k) names.push_back("class_" + std::to_string(k));
    return names;
}

double row_sum(std::span<const double> row) {
    double s = 0.0;
    for (double v : row) s += v;
    return s;
}

}  // namespace

LabelSpace::LabelSpace(std::size_t num_classes) : LabelSpace(num_classes, default_names(num_classes)) {}

LabelSpace::LabelSpace(std::size_t num_classes, std::vector<std::string> class_names)
    : names_(std::move(class_names)) {
    if (num_classes < 2) throw Error("label space needs at least 2 classes");
    if (names_.size() != num_classes) throw Error("class_names must have one entry per class");
    std::unordered_set<std::string> seen;
    for (const auto& name : names_) {
        if (name.empty()) throw Error("class names must be non-empty");
        if (!seen.insert(name).second) throw Error("duplicate class name '" + name + "'");
    }
}

Dataset::Dataset(LabelSpace label_space, std::vector<Sample> samples) : label_space_(std::move(label_space)) {
    if (samples.empty()) throw Error("dataset must contain at least one sample");
    const std::size_t d = samples.front().features.size();
    features_ = Matrix(samples.size(), d);
    ids_.reserve(samples.size());
    noisy_labels_.reserve(samples.size());
    const bool gt = samples.front().true_label.has_value();
    if (gt) true_labels_.emplace();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.features.size() != d) throw Error("feature dimension mismatch", i);
        if (s.true_label.has_value() != gt) {
            throw Error("either every sample has a true label or none does", i);
        }
        ids_.push_back(s.id);
        noisy_labels_.push_back(s.noisy_label);
        if (gt) true_labels_->push_back(*s.true_label);
        std::copy(s.features.begin(), s.features.end(), features_.row(i).begin());
    }
    validate();
}

Dataset::Dataset(LabelSpace label_space, std::vector<SampleId> ids, Matrix features,
                 std::vector<ClassIndex> noisy_labels, std::optional<std::vector<ClassIndex>> true_labels)
    : label_space_(std::move(label_space)),
      ids_(std::move(ids)),
      features_(std::move(features)),
      noisy_labels_(std::move(noisy_labels)),
      true_labels_(std::move(true_labels)) {
    validate();
}

void Dataset::validate() const {
    const std::size_t n = ids_.size();
    if (n == 0) throw Error("dataset must contain at least one sample");
    if (features_.rows() != n || noisy_labels_.size() != n) throw Error("dataset columns have unequal lengths");
    if (true_labels_ && true_labels_->size() != n) throw Error("true label column has wrong length");
    if (features_.cols() == 0) throw Error("feature dimension must be positive");
    const std::size_t c = num_classes();
    std::unordered_set<SampleId> seen;
    seen.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!seen.insert(ids_[i]).second) throw Error("duplicate id " + std::to_string(ids_[i]), i);
        if (noisy_labels_[i] >= c) throw Error("label out of range", i);
        if (true_labels_ && (*true_labels_)[i] >= c) throw Error("label out of range", i);
        for (double v : features_.row(i)) {
            if (!std::isfinite(v)) throw Error("non-finite feature value", i);
        }
    }
}

const std::vector<ClassIndex>& Dataset::ground_truth() const {
    if (!true_labels_) throw Error("dataset has no ground-truth labels");
    return *true_labels_;
}

Sample Dataset::sample(std::size_t i) const {
    Sample s;
    s.id = ids_[i];
    s.features.assign(features_.row(i).begin(), features_.row(i).end());
    s.noisy_label = noisy_labels_[i];
    if (true_labels_) s.true_label = (*true_labels_)[i];
    return s;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<SampleId> ids;
    std::vector<ClassIndex> noisy;
    std::optional<std::vector<ClassIndex>> truth;
    if (true_labels_) truth.emplace();
    Matrix feats(indices.size(), feature_dim());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        if (i >= size()) throw Error("subset index out of range", i);
        ids.push_back(ids_[i]);
        noisy.push_back(noisy_labels_[i]);
        if (truth) truth->push_back((*true_labels_)[i]);
        std::copy(features_.row(i).begin(), features_.row(i).end(), feats.row(k).begin());
    }
    return Dataset(label_space_, std::move(ids), std::move(feats), std::move(noisy), std::move(truth));
}

Dataset Dataset::with_noisy_labels(std::vector<ClassIndex> labels) const {
    if (labels.size() != size()) throw Error("label vector length differs from dataset size");
    return Dataset(label_space_, ids_, features_, std::move(labels), true_labels_);
}

// ---------------------------------------------------------------------------
// ScoreMatrix

ScoreMatrix::ScoreMatrix(std::vector<SampleId> sample_ids, Matrix values)
    : ids_(std::move(sample_ids)), values_(std::move(values)) {
    if (ids_.size() != values_.rows()) throw Error("score matrix id list length differs from row count");
    if (values_.cols() < 2) throw Error("score matrix needs at least 2 columns");
    for (std::size_t i = 0; i < values_.rows(); ++i) {
        for (double v : values_.row(i)) {
            if (!(v >= 0.0 && v <= 1.0)) throw Error("score entry outside [0, 1]", i);
        }
        if (std::abs(row_sum(values_.row(i)) - 1.0) > kInternalTolerance) {
            throw Error("score row does not sum to 1", i);
        }
    }
}

ScoreMatrix ScoreMatrix::from_external(std::vector<SampleId> sample_ids, Matrix values, double tolerance) {
    for (std::size_t i = 0; i < values.rows(); ++i) {
        auto row = values.row(i);
        for (double v : row) {
            if (!std::isfinite(v)) throw Error("non-finite score entry", i);
            if (v < 0.0) throw Error("negative score entry", i);
        }
        const double s = row_sum(row);
        if (std::abs(s - 1.0) > tolerance) throw Error("score row sums to " + io::format_double(s), i);
        for (double& v : row) v /= s;
    }
    return ScoreMatrix(std::move(sample_ids), std::move(values));
}

ScoreMatrix ScoreMatrix::subset(std::span<const std::size_t> indices) const {
    std::vector<SampleId> ids;
    Matrix vals(indices.size(), cols());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        ids.push_back(ids_[indices[k]]);
        std::copy(values_.row(indices[k]).begin(), values_.row(indices[k]).end(), vals.row(k).begin());
    }
    return ScoreMatrix(std::move(ids), std::move(vals));
}

AlignmentReport validate_score_matrix(std::span<const SampleId> sample_ids, const Matrix& values,
                                      const Dataset& dataset, double tolerance) {
    if (values.rows() != dataset.size() || sample_ids.size() != dataset.size()) {
        throw Error("score matrix has " + std::to_string(values.rows()) + " rows, dataset has " +
                    std::to_string(dataset.size()) + " samples");
    }
    if (values.cols() != dataset.num_classes()) {
        throw Error("score matrix has " + std::to_string(values.cols()) + " columns, dataset has " +
                    std::to_string(dataset.num_classes()) + " classes");
    }
    AlignmentReport report;
    report.rows = values.rows();
    for (std::size_t i = 0; i < values.rows(); ++i) {
        if (sample_ids[i] != dataset.id(i)) {
            throw Error("id mismatch: score row has id " + std::to_string(sample_ids[i]) + ", dataset has " +
                            std::to_string(dataset.id(i)),
                        i);
        }
        for (double v : values.row(i)) {
            if (!std::isfinite(v)) throw Error("non-finite score entry", i);
            if (v < 0.0) throw Error("negative score entry", i);
        }
        const double dev = std::abs(row_sum(values.row(i)) - 1.0);
        if (dev > tolerance) throw Error("score row sum deviates from 1 by " + io::format_double(dev), i);
        report.max_row_sum_deviation = std::max(report.max_row_sum_deviation, dev);
    }
    return report;
}

AlignmentReport validate_score_matrix(const ScoreMatrix& scores, const Dataset& dataset) {
    return validate_score_matrix(scores.sample_ids(), scores.values(), dataset, ScoreMatrix::kIngestTolerance);
}

// ---------------------------------------------------------------------------
// Dataset files

namespace {

Dataset read_dataset_text(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("empty dataset file");
    const auto header = io::parse_header(line, "noiselens-dataset");
    const auto n = header.int_field("N");
    const auto c = header.int_field("C");
    const auto d = header.int_field("D");
    const auto gt = header.int_field("GT");
    if (n < 1 || c < 2 || d < 1 || (gt != 0 && gt != 1)) throw Error("invalid dataset header values");

    const std::size_t lead = gt ? 3 : 2;
    const std::size_t expected_fields = lead + static_cast<std::size_t>(d);
    std::vector<SampleId> ids;
    std::vector<ClassIndex> noisy;
    std::optional<std::vector<ClassIndex>> truth;
    if (gt) truth.emplace();
    Matrix feats(static_cast<std::size_t>(n), static_cast<std::size_t>(d));

    io::LineReader reader(in);
    std::size_t row = 0;
    while (reader.next(line)) {
        const std::size_t rec = reader.record();
        if (row >= static_cast<std::size_t>(n)) throw Error("more records than header N", rec);
        const auto fields = io::split(line, ',');
        if (fields.size() != expected_fields) {
            if (fields.size() > lead && fields.size() - lead != static_cast<std::size_t>(d)) {
                throw Error("dimension mismatch: expected " + std::to_string(d) + " features, found " +
                                std::to_string(fields.size() - lead),
                            rec);
            }
            throw Error("malformed record", rec);
        }
        ids.push_back(io::parse_int(fields[0], rec));
        auto label_of = [&](std::string_view tok) {
            const auto v = io::parse_int(tok, rec);
            if (v < 0 || v >= c) throw Error("label out of range", rec);
            return static_cast<ClassIndex>(v);
        };
        noisy.push_back(label_of(fields[1]));
        if (gt) truth->push_back(label_of(fields[2]));
        auto out = feats.row(row);
        for (std::size_t k = 0; k < static_cast<std::size_t>(d); ++k) {
            out[k] = io::parse_double(fields[lead + k], rec);
            if (!std::isfinite(out[k])) throw Error("non-finite feature value", rec);
        }
        ++row;
    }
    if (row != static_cast<std::size_t>(n)) {
        throw Error("header declares N=" + std::to_string(n) + " but file has " + std::to_string(row) + " records");
    }
    return Dataset(LabelSpace(static_cast<std::size_t>(c)), std::move(ids), std::move(feats), std::move(noisy),
                   std::move(truth));
}

Dataset read_dataset_binary(std::istream& in) {
    io::BinaryReader r(in, io::BinaryKind::dataset);
    const auto n = r.get<std::uint64_t>();
    const auto c = r.get<std::uint32_t>();
    const auto d = r.get<std::uint32_t>();
    const auto gt = r.get<std::uint8_t>();
    if (n < 1 || c < 2 || d < 1 || gt > 1) throw Error("invalid dataset header values");
    std::vector<SampleId> ids;
    std::vector<ClassIndex> noisy;
    std::optional<std::vector<ClassIndex>> truth;
    if (gt) truth.emplace();
    Matrix feats(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(r.get<std::int64_t>());
        const auto y = r.get<std::uint32_t>();
        if (y >= c) throw Error("label out of range", i);
        noisy.push_back(y);
        if (gt) {
            const auto t = r.get<std::uint32_t>();
            if (t >= c) throw Error("label out of range", i);
            truth->push_back(t);
        }
        for (auto& v : feats.row(i)) v = r.get<double>();
    }
    return Dataset(LabelSpace(c), std::move(ids), std::move(feats), std::move(noisy), std::move(truth));
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path) {
    const bool binary = io::is_binary_file(path);
    auto in = io::open_input(path, binary);
    return binary ? read_dataset_binary(in) : read_dataset_text(in);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, FileEncoding encoding) {
    const bool gt = dataset.has_ground_truth();
    auto out = io::open_output(path, encoding == FileEncoding::binary);
    if (encoding == FileEncoding::binary) {
        io::BinaryWriter w(out, io::BinaryKind::dataset);
        w.put<std::uint64_t>(dataset.size());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(dataset.num_classes()));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(dataset.feature_dim()));
        w.put<std::uint8_t>(gt ? 1 : 0);
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            w.put<std::int64_t>(dataset.id(i));
            w.put<std::uint32_t>(dataset.noisy_label(i));
            if (gt) w.put<std::uint32_t>(dataset.ground_truth()[i]);
            for (double v : dataset.features(i)) w.put<double>(v);
        }
    } else {
        out << "#noiselens-dataset v1 N=" << dataset.size() << " C=" << dataset.num_classes()
            << " D=" << dataset.feature_dim() << " GT=" << (gt ? 1 : 0) << '\n';
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            out << dataset.id(i) << ',' << dataset.noisy_label(i);
            if (gt) out << ',' << dataset.ground_truth()[i];
            out << ',' << io::join_doubles(dataset.features(i).data(), dataset.feature_dim()) << '\n';
        }
    }
    if (!out) throw Error("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Score files

namespace {

struct RawScores {
    std::vector<SampleId> ids;
    Matrix values;
};

RawScores read_scores_raw(const std::filesystem::path& path) {
    const bool binary = io::is_binary_file(path);
    auto in = io::open_input(path, binary);
    RawScores raw;
    if (binary) {
        io::BinaryReader r(in, io::BinaryKind::scores);
        const auto n = r.get<std::uint64_t>();
        const auto c = r.get<std::uint32_t>();
        raw.values = Matrix(n, c);
        for (std::size_t i = 0; i < n; ++i) {
            raw.ids.push_back(r.get<std::int64_t>());
            for (auto& v : raw.values.row(i)) v = r.get<double>();
        }
        return raw;
    }
    std::string line;
    if (!std::getline(in, line)) throw Error("empty score file");
    const auto header = io::parse_header(line, "noiselens-scores");
    const auto n = header.int_field("N");
    const auto c = header.int_field("C");
    if (n < 1 || c < 2) throw Error("invalid score header values");
    raw.values = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(c));
    io::LineReader reader(in);
    std::size_t row = 0;
    while (reader.next(line)) {
        const std::size_t rec = reader.record();
        if (row >= static_cast<std::size_t>(n)) throw Error("more records than header N", rec);
        const auto fields = io::split(line, ',');
        if (fields.size() != static_cast<std::size_t>(c) + 1) throw Error("malformed record", rec);
        raw.ids.push_back(io::parse_int(fields[0], rec));
        auto out = raw.values.row(row);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = io::parse_double(fields[k + 1], rec);
        ++row;
    }
    if (row != static_cast<std::size_t>(n)) {
        throw Error("header declares N=" + std::to_string(n) + " but file has " + std::to_string(row) + " records");
    }
    return raw;
}

}  // namespace

ScoreMatrix load_scores(const std::filesystem::path& path) {
    auto raw = read_scores_raw(path);
    return ScoreMatrix::from_external(std::move(raw.ids), std::move(raw.values));
}

ScoreMatrix load_scores(const std::filesystem::path& path, const Dataset& dataset) {
    auto raw = read_scores_raw(path);
    validate_score_matrix(raw.ids, raw.values, dataset);
    return ScoreMatrix::from_external(std::move(raw.ids), std::move(raw.values));
}

void save_scores(const ScoreMatrix& scores, const std::filesystem::path& path, FileEncoding encoding) {
    auto out = io::open_output(path, encoding == FileEncoding::binary);
    if (encoding == FileEncoding::binary) {
        io::BinaryWriter w(out, io::BinaryKind::scores);
        w.put<std::uint64_t>(scores.rows());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(scores.cols()));
        for (std::size_t i = 0; i < scores.rows(); ++i) {
            w.put<std::int64_t>(scores.sample_ids()[i]);
            for (double v : scores.row(i)) w.put<double>(v);
        }
    } else {
        out << "#noiselens-scores v1 N=" << scores.rows() << " C=" << scores.cols() << '\n';
        for (std::size_t i = 0; i < scores.rows(); ++i) {
            out << scores.sample_ids()[i] << ',' << io::join_doubles(scores.row(i).data(), scores.cols()) << '\n';
        }
    }
    if (!out) throw Error("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Embedding tables

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    const bool binary = io::is_binary_file(path);
    auto in = io::open_input(path, binary);
    EmbeddingTable table;
    if (binary) {
        io::BinaryReader r(in, io::BinaryKind::embeddings);
        const auto n = r.get<std::uint64_t>();
        const auto d = r.get<std::uint32_t>();
        table.vectors = Matrix(n, d);
        for (std::size_t i = 0; i < n; ++i) {
            table.ids.push_back(r.get<std::int64_t>());
            for (auto& v : table.vectors.row(i)) v = r.get<double>();
        }
        return table;
    }
    std::string line;
    if (!std::getline(in, line)) throw Error("empty embedding file");
    const auto header = io::parse_header(line, "noiselens-embeddings");
    const auto n = header.int_field("N");
    const auto d = header.int_field("D");
    if (n < 1 || d < 1) throw Error("invalid embedding header values");
    table.vectors = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
    io::LineReader reader(in);
    std::size_t row = 0;
    while (reader.next(line)) {
        const std::size_t rec = reader.record();
        if (row >= static_cast<std::size_t>(n)) throw Error("more records than header N", rec);
        const auto fields = io::split(line, ',');
        if (fields.size() != static_cast<std::size_t>(d) + 1) throw Error("dimension mismatch", rec);
        table.ids.push_back(io::parse_int(fields[0], rec));
        auto out = table.vectors.row(row);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = io::parse_double(fields[k + 1], rec);
        ++row;
    }
    if (row != static_cast<std::size_t>(n)) throw Error("embedding file record count differs from header N");
    return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path, FileEncoding encoding) {
    auto out = io::open_output(path, encoding == FileEncoding::binary);
    if (encoding == FileEncoding::binary) {
        io::BinaryWriter w(out, io::BinaryKind::embeddings);
        w.put<std::uint64_t>(table.vectors.rows());
        w.put<std::uint32_t>(static_cast<std::uint32_t>(table.vectors.cols()));
        for (std::size_t i = 0; i < table.vectors.rows(); ++i) {
            w.put<std::int64_t>(table.ids[i]);
            for (double v : table.vectors.row(i)) w.put<double>(v);
        }
    } else {
        out << "#noiselens-embeddings v1 N=" << table.vectors.rows() << " D=" << table.vectors.cols() << '\n';
        for (std::size_t i = 0; i < table.vectors.rows(); ++i) {
            out << table.ids[i] << ',' << io::join_doubles(table.vectors.row(i).data(), table.vectors.cols())
                << '\n';
        }
    }
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace noiselens
